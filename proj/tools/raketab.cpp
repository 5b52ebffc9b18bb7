// raketab: batch command line for BISG prediction, raking and evaluation.

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "raketab/bisg.hpp"
#include "raketab/calibmap.hpp"
#include "raketab/error.hpp"
#include "raketab/ingest.hpp"
#include "raketab/kernels.hpp"
#include "raketab/metrics.hpp"
#include "raketab/raking.hpp"
#include "raketab/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace raketab;

namespace {

constexpr const char* kVersion = "raketab 0.1.0";

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

// Collects digests of everything read and written by one run.
class Run {
 public:
  explicit Run(std::string command) : command_(std::move(command)) {}

  std::string read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string data = ss.str();
    inputs_[path] = sha256_hex(data);
    return data;
  }

  // Atomic: write a sibling temp file, then rename over the target.
  void write(const std::string& path, const std::string& data) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw InputError("cannot write '" + path + "'");
      out << data;
      if (!out.flush()) throw InputError("cannot write '" + path + "'");
    }
    fs::rename(tmp, target);
    outputs_[path] = sha256_hex(data);
  }

  void flag(const std::string& name, json value) { flags_[name] = std::move(value); }
  void seed(std::uint64_t s) { seed_ = s; }
  json& result() { return result_; }

  void write_manifest(const std::string& path) {
    json m;
    m["command"] = command_;
    m["version"] = kVersion;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["flags"] = flags_;
    m["seed"] = seed_ ? json(*seed_) : json(nullptr);
    if (!result_.is_null()) m["result"] = result_;
    const std::string text = m.dump(2) + "\n";
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw InputError("cannot write '" + path + "'");
      out << text;
    }
    fs::rename(tmp, path);
  }

 private:
  std::string command_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  json flags_ = json::object();
  std::optional<std::uint64_t> seed_;
  json result_;
};

std::size_t thread_count() {
  if (const char* env = std::getenv("RAKETAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return 1;
}

template <typename T, typename F>
std::string render(const T& value, F&& writer) {
  std::ostringstream out;
  writer(out, value);
  return out.str();
}

std::string table_text(const CellTable& t) {
  std::ostringstream out;
  write_table_csv(out, t);
  return out.str();
}

// Cell conditionals p(r|s,g) for each stored cell with mass.
std::string conditionals_text(const PredictionTable& t) {
  std::ostringstream out;
  out << kTableHeader << '\n';
  const auto& labels = t.labels();
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto p = t.conditional(i);
    if (!p) continue;
    const auto k = t.key(i);
    out << labels.surnames[k.surname] << ',' << labels.geolocations[k.geo];
    for (double v : *p) out << ',' << format_number(v);
    out << '\n';
  }
  return out.str();
}

std::string cell_rejects_text(const std::vector<CellReject>& rejects) {
  std::ostringstream out;
  out << "surname,geoid,reason\n";
  for (const auto& r : rejects) out << r.surname << ',' << r.geolocation << ',' << r.reason << '\n';
  return out.str();
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

RaceVector read_distribution(Run& run, const std::string& path) {
  std::istringstream in(run.read(path));
  return read_race_distribution(in);
}

FactorFile read_factor_file(Run& run, const std::string& path, bool surname) {
  std::istringstream in(run.read(path));
  return surname ? parse_surname_factors(in) : parse_geo_factors(in);
}

// Cell universe for prediction or raking targets.
struct CellInput {
  LabelsPtr labels;
  std::vector<CellKey> keys;
  std::vector<double> counts;
};

CellInput cells_from_table(const CellTable& t) {
  CellInput c{t.labels_ptr(), {t.keys().begin(), t.keys().end()}, {}};
  for (std::size_t i = 0; i < t.size(); ++i) c.counts.push_back(t.cell_total(i));
  return c;
}

struct CellSource {
  std::string voters;
  std::string mapping = "canonical";
  bool answered_only = false;
  std::string cells;
  std::string table;

  void add_options(CLI::App* sub) {
    auto* v = sub->add_option("--voters", voters, "Voter file; cell counts are voters per (surname, geoid)");
    sub->add_option("--mapping", mapping, "Race category mapping: canonical, florida, north-carolina");
    sub->add_flag("--answered-only", answered_only, "Drop inactive and race-missing voters first");
    auto* c = sub->add_option("--cells", cells, "Cell count CSV (surname,geoid,count)");
    auto* t = sub->add_option("--table", table, "Table CSV; cell counts are row totals");
    v->excludes(c)->excludes(t);
    c->excludes(t);
  }

  bool given() const { return !voters.empty() || !cells.empty() || !table.empty(); }

  CellInput load(Run& run) const {
    if (!voters.empty()) {
      run.flag("mapping", mapping);
      run.flag("answered_only", answered_only);
      std::istringstream in(run.read(voters));
      auto records = parse_voter_file(in, mapping_by_name(mapping));
      if (answered_only) records = filter_answered_active(records);
      if (records.empty()) throw InputError("voter file has no usable records");
      auto agg = aggregate_voters(records, false);
      return {agg.table.labels_ptr(), {agg.table.keys().begin(), agg.table.keys().end()}, agg.cell_counts};
    }
    if (!cells.empty()) {
      std::istringstream in(run.read(cells));
      auto c = read_cell_counts(in);
      return {c.labels, c.keys, c.counts};
    }
    if (!table.empty()) {
      std::istringstream in(run.read(table));
      return cells_from_table(read_table_csv(in));
    }
    throw InputError("one of --voters, --cells or --table is required");
  }
};

ContingencyTable read_table(Run& run, const std::string& path) {
  std::istringstream in(run.read(path));
  return read_table_csv(in);
}

std::string default_manifest(const std::string& primary) { return primary + ".manifest.json"; }

// ---------------------------------------------------------------------------
// Subcommands

struct FitFactorsCmd {
  std::string table, surname_out, geo_out, race_margin_out, manifest;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* sub = app.add_subcommand("fit-factors", "Labeled table to surname and geolocation factor files");
    sub->add_option("--table", table, "Labeled table CSV")->required();
    sub->add_option("--surname-out", surname_out, "Surname factor CSV")->required();
    sub->add_option("--geo-out", geo_out, "Geolocation factor CSV")->required();
    sub->add_option("--race-margin-out", race_margin_out, "Statewide race distribution JSON");
    sub->add_option("--manifest", manifest, "Manifest path");
    sub->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() {
    Run r("fit-factors");
    const auto t = read_table(r, table);
    const auto f = fit_factors(t);
    r.write(surname_out, render(f.race_given_surname, write_surname_factors));
    r.write(geo_out, render(f.race_given_geo, write_geo_factors));
    if (!race_margin_out.empty()) r.write(race_margin_out, render(f.race_prior, write_race_distribution));
    r.result()["surnames"] = f.race_given_surname.size();
    r.result()["geolocations"] = f.race_given_geo.size();
    r.write_manifest(manifest.empty() ? default_manifest(surname_out) : manifest);
  }
};

struct PredictCmd {
  std::string surname_factors, geo_factors, method = "bisg", adjust_cps, census_prior;
  std::string out, conditionals, rejects, manifest;
  CellSource source;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* sub = app.add_subcommand("predict", "Weighted BISG predictions per (surname, geoid) cell");
    sub->add_option("--surname-factors", surname_factors, "Surname factor CSV");
    sub->add_option("--geo-factors", geo_factors, "Geolocation factor CSV")->required();
    sub->add_option("--method", method, "bisg, geo-only or surname-only");
    sub->add_option("--adjust-cps", adjust_cps, "CPS race distribution of registered voters (JSON)");
    sub->add_option("--census-prior", census_prior,
                    "Census race distribution the adjustment divides by (JSON); default is the geo prior");
    sub->add_option("--out", out, "Predicted count table CSV")->required();
    sub->add_option("--conditionals", conditionals, "Per-cell conditional CSV");
    sub->add_option("--rejects", rejects, "Rejected rows and cells CSV");
    sub->add_option("--manifest", manifest, "Manifest path");
    source.add_options(sub);
    sub->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() {
    Run r("predict");
    auto m = parse_prediction_method(method);
    if (!m) throw InputError("unknown method '" + method + "'");
    r.flag("method", method);
    FactorFile sf;
    if (!surname_factors.empty()) sf = read_factor_file(r, surname_factors, true);
    else if (*m != PredictionMethod::GeoOnly) throw InputError("--surname-factors is required for " + method);
    FactorFile gf = read_factor_file(r, geo_factors, false);
    const std::size_t factor_rejects = sf.rejects.size() + gf.rejects.size();
    std::vector<RejectRow> row_rejects = sf.rejects;
    row_rejects.insert(row_rejects.end(), gf.rejects.begin(), gf.rejects.end());
    BisgFactors factors = assemble_factors(std::move(sf.entries), std::move(gf.entries));

    std::optional<VoterAdjustment> adjustment;
    if (!adjust_cps.empty()) {
      const RaceVector cps = read_distribution(r, adjust_cps);
      const RaceVector prior = census_prior.empty() ? factors.race_prior : read_distribution(r, census_prior);
      adjustment = voter_adjustment(cps, prior);
    } else if (!census_prior.empty()) {
      throw InputError("--census-prior only applies with --adjust-cps");
    }

    const CellInput cells = source.load(r);
    auto pred = predict_cells(factors, cells.labels, cells.keys, cells.counts, *m, adjustment);
    r.write(out, table_text(pred.table));
    if (!conditionals.empty()) r.write(conditionals, conditionals_text(pred.table));
    if (!rejects.empty()) {
      std::ostringstream rows;
      write_rejects(rows, row_rejects);
      r.write(rejects, cell_rejects_text(pred.rejects) + "\n" + rows.str());
    }
    r.result()["cells"] = pred.table.size();
    r.result()["cell_rejects"] = pred.rejects.size();
    r.result()["factor_row_rejects"] = factor_rejects;
    r.write_manifest(manifest.empty() ? default_manifest(out) : manifest);
  }
};

struct RakeCmd {
  std::string base, targets_from, race_margin, out, theta, manifest;
  double tol = 1e-10;
  std::size_t max_iters = 10'000;
  CellSource cell_margin;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* sub = app.add_subcommand("rake", "Rake base predictions to race and (surname, geoid) margins");
    sub->add_option("--base", base, "Base prediction table CSV")->required();
    sub->add_option("--targets-from", targets_from, "Table CSV supplying both margin families");
    sub->add_option("--race-margin", race_margin,
                    "Race distribution JSON, scaled by the cell margin total");
    sub->add_option("--tol", tol, "Relative margin tolerance");
    sub->add_option("--max-iters", max_iters, "Sweep cap");
    sub->add_option("--out", out, "Raked table CSV")->required();
    sub->add_option("--theta", theta, "Per-cell log scale CSV");
    sub->add_option("--manifest", manifest, "Manifest path");
    cell_margin.add_options(sub);
    sub->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() {
    Run r("rake");
    r.flag("tol", tol);
    r.flag("max_iters", max_iters);
    const auto base_table = read_table(r, base);

    MarginSet targets;
    LabelsPtr labels;
    if (!targets_from.empty()) {
      if (cell_margin.given() || !race_margin.empty()) {
        throw InputError("--targets-from excludes the other margin options");
      }
      const auto t = read_table(r, targets_from);
      labels = merge_labels(base_table.labels(), t.labels());
      targets = MarginSet::from_table(realign(t, labels));
    } else {
      if (race_margin.empty() || !cell_margin.given()) {
        throw InputError("rake needs --targets-from, or --race-margin with a cell margin source");
      }
      const RaceVector dist = read_distribution(r, race_margin);
      const CellInput cells = cell_margin.load(r);
      // Re-key the cell margin onto labels shared with the base table.
      AxisLabels cell_labels = *cells.labels;
      labels = merge_labels(base_table.labels(), cell_labels);
      std::vector<CellKey> keys;
      double total = 0.0;
      for (std::size_t i = 0; i < cells.keys.size(); ++i) {
        keys.push_back({*labels->surname_index(cell_labels.surnames[cells.keys[i].surname]),
                        *labels->geo_index(cell_labels.geolocations[cells.keys[i].geo])});
        total += cells.counts[i];
      }
      RaceVector race{};
      for (std::size_t k = 0; k < kRaceCount; ++k) race[k] = dist[k] * total;
      targets = MarginSet(labels, race, keys, cells.counts);
    }
    const PredictionTable aligned = as_prediction(realign(base_table, labels));

    RakingConfig cfg;
    cfg.tolerance = tol;
    cfg.max_iterations = max_iters;
    cfg.threads = thread_count();
    const RakingResult res = rake(aligned, targets, cfg);
    r.write(out, table_text(res.table));
    if (!theta.empty()) {
      std::ostringstream t;
      t << "surname,geoid,race,theta\n";
      for (std::size_t k = 0; k < kRaceCount; ++k) {
        t << ",," << race_key(kAllRaces[k]) << ',' << format_number(res.theta_race[k]) << '\n';
      }
      const auto& l = res.table.labels();
      for (std::size_t i = 0; i < res.table.size(); ++i) {
        const auto key = res.table.key(i);
        t << l.surnames[key.surname] << ',' << l.geolocations[key.geo] << ",,"
          << format_number(res.theta_cell[i]) << '\n';
      }
      r.write(theta, t.str());
    }
    r.result()["iterations"] = res.iterations;
    r.result()["final_margin_gap"] = res.final_margin_gap;
    r.write_manifest(manifest.empty() ? default_manifest(out) : manifest);
  }
};

struct CalibMapCmd {
  std::string source, target, out, apply, apply_out, manifest;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* sub = app.add_subcommand("calib-map", "Column-stochastic map nearest the identity between two distributions");
    sub->add_option("--source", source, "Source distribution JSON (CPS)")->required();
    sub->add_option("--target", target, "Target distribution JSON (voter file)")->required();
    sub->add_option("--out", out, "Matrix CSV")->required();
    auto* a = sub->add_option("--apply", apply, "Prediction table whose cell conditionals are mapped");
    auto* ao = sub->add_option("--apply-out", apply_out, "Mapped prediction table CSV");
    a->needs(ao);
    ao->needs(a);
    sub->add_option("--manifest", manifest, "Manifest path");
    sub->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() {
    Run r("calib-map");
    const RaceVector u = read_distribution(r, source);
    const RaceVector v = read_distribution(r, target);
    const CalibrationMap map = solve_calibration_map(u, v);
    std::ostringstream m;
    m << "race";
    for (Race c : kAllRaces) m << ',' << race_key(c);
    m << '\n';
    for (std::size_t i = 0; i < kRaceCount; ++i) {
      m << race_key(kAllRaces[i]);
      for (std::size_t j = 0; j < kRaceCount; ++j) m << ',' << format_number(map.at(i, j));
      m << '\n';
    }
    r.write(out, m.str());
    if (!apply.empty()) {
      const auto t = read_table(r, apply);
      std::vector<double> values;
      values.reserve(t.values().size());
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double n = t.cell_total(i);
        RaceVector row{};
        if (n > 0.0) {
          const RaceVector mapped = apply_calibration_map(map, conditional_race(t.row_vector(i)));
          for (std::size_t k = 0; k < kRaceCount; ++k) row[k] = std::max(0.0, n * mapped[k]);
        }
        values.insert(values.end(), row.begin(), row.end());
      }
      const ContingencyTable mapped(t.labels_ptr(), {t.keys().begin(), t.keys().end()}, std::move(values));
      r.write(apply_out, table_text(mapped));
    }
    r.result()["objective"] = map.objective;
    r.result()["constraint_residual"] = map.kkt_residual;
    r.result()["iterations"] = map.iterations;
    r.write_manifest(manifest.empty() ? default_manifest(out) : manifest);
  }
};

struct SubsampleCmd {
  std::string voters, mapping = "canonical", target, out, manifest;
  std::uint64_t seed = 0;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* sub = app.add_subcommand("subsample", "Subsample a voter file to a target race distribution");
    sub->add_option("--voters", voters, "Voter file")->required();
    sub->add_option("--mapping", mapping, "Race category mapping");
    sub->add_option("--target", target, "Target race distribution JSON")->required();
    sub->add_option("--seed", seed, "Sampling seed")->required();
    sub->add_option("--out", out, "Subsampled voter file")->required();
    sub->add_option("--manifest", manifest, "Manifest path");
    sub->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() {
    Run r("subsample");
    r.seed(seed);
    r.flag("mapping", mapping);
    std::istringstream in(r.read(voters));
    const auto records = filter_answered_active(parse_voter_file(in, mapping_by_name(mapping)));
    const auto sample = subsample_to_margin(records, read_distribution(r, target), seed);
    std::ostringstream o;
    write_voter_file(o, sample);
    r.write(out, o.str());
    r.result()["eligible_records"] = records.size();
    r.result()["sampled_records"] = sample.size();
    r.write_manifest(manifest.empty() ? default_manifest(out) : manifest);
  }
};

struct EvaluateCmd {
  std::string truth, pred, regions, out_dir, orientation = "estimate-minus-truth", manifest;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* sub = app.add_subcommand("evaluate", "Subpopulation, cellwise and calibration reports");
    sub->add_option("--truth", truth, "Truth table CSV")->required();
    sub->add_option("--pred", pred, "Prediction table CSV")->required();
    sub->add_option("--regions", regions, "geoid,region CSV for grouped cellwise metrics");
    sub->add_option("--orientation", orientation, "estimate-minus-truth or truth-minus-estimate");
    sub->add_option("--out-dir", out_dir, "Report directory")->required();
    sub->add_option("--manifest", manifest, "Manifest path");
    sub->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() {
    Run r("evaluate");
    ErrorOrientation o;
    if (orientation == "estimate-minus-truth") o = ErrorOrientation::EstimateMinusTruth;
    else if (orientation == "truth-minus-estimate") o = ErrorOrientation::TruthMinusEstimate;
    else throw InputError("unknown orientation '" + orientation + "'");
    r.flag("orientation", orientation);

    const auto t0 = read_table(r, truth);
    const auto p0 = read_table(r, pred);
    std::map<std::string, std::string> region_map;
    if (!regions.empty()) {
      std::istringstream in(r.read(regions));
      region_map = read_regions(in);
    }
    const LabelsPtr labels = merge_labels(t0.labels(), p0.labels());
    const ContingencyTable t = realign(t0, labels);
    const ContingencyTable p = realign(p0, labels);
    const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    const SubpopReport sub = subpop_report(t, p, o);
    std::ostringstream s;
    s << "geoid,race,truth,estimate,error,relative_error\n";
    for (std::size_t g = 0; g < sub.by_geo.size(); ++g) {
      for (std::size_t k = 0; k < kRaceCount; ++k) {
        const auto& e = sub.by_geo[g][k];
        s << labels->geolocations[g] << ',' << race_key(kAllRaces[k]) << ',' << format_number(e.truth) << ','
          << format_number(e.estimate) << ',' << format_number(e.error) << ',' << optional_number(e.relative)
          << '\n';
      }
    }
    r.write(path("subpop.csv"), s.str());

    std::ostringstream sw;
    sw << "race,truth,estimate,error,relative_error,sum_abs_geo_error\n";
    for (std::size_t k = 0; k < kRaceCount; ++k) {
      const auto& e = sub.statewide[k];
      sw << race_key(kAllRaces[k]) << ',' << format_number(e.truth) << ',' << format_number(e.estimate) << ','
         << format_number(e.error) << ',' << optional_number(e.relative) << ','
         << format_number(sub.mean_absolute_deviation[k]) << '\n';
    }
    r.write(path("statewide.csv"), sw.str());

    const CellwiseReport cw = cellwise_report(t, p, regions.empty() ? nullptr : &region_map);
    std::ostringstream c;
    c << "level,name,population,l1,l2,neg_log_likelihood,nll_excess\n";
    auto line = [&](const char* level, const CellwiseEntry& e) {
      c << level << ',' << e.name << ',' << format_number(e.population) << ',' << optional_number(e.l1) << ','
        << optional_number(e.l2) << ',' << optional_number(e.neg_log_likelihood) << ','
        << optional_number(e.nll_excess) << '\n';
    };
    for (const auto& e : cw.by_geo) line("geo", e);
    for (const auto& e : cw.by_region) line("region", e);
    line("overall", cw.overall);
    r.write(path("cellwise.csv"), c.str());

    json summary;
    summary["mean_absolute_subpop_error"] = mean_absolute_subpop_error(sub);
    for (Race race : kAllRaces) {
      const auto curve = calibration_curve(t, p, race);
      std::ostringstream cc;
      cc << "weight_fraction,miscalibration\n";
      for (const auto& pt : curve.points) {
        cc << format_number(pt.weight_fraction) << ',' << format_number(pt.miscalibration) << '\n';
      }
      const std::string key(race_key(race));
      r.write(path("calibration_" + key + ".csv"), cc.str());
      summary["kuiper"][key] = curve.kuiper;
    }
    // Other is computed like the rest but flagged for omission from headline tables.
    summary["kuiper_unreported"] = json::array({std::string(race_key(Race::Other))});
    if (cw.overall.l1) {
      summary["overall"] = {{"l1", *cw.overall.l1},
                            {"l2", *cw.overall.l2},
                            {"neg_log_likelihood", *cw.overall.neg_log_likelihood},
                            {"nll_excess", *cw.overall.nll_excess}};
    }
    r.write(path("summary.json"), summary.dump(2) + "\n");
    r.write_manifest(manifest.empty() ? path("manifest.json") : manifest);
  }
};

struct SynthCmd {
  SynthConfig cfg;
  std::vector<double> race_mix;
  std::string out_dir, manifest;
  bool voters = false;

  void add(CLI::App& app, std::function<void()>& action) {
    auto* sub = app.add_subcommand("synth", "Synthetic labeled population with tunable surname-geo coupling");
    sub->add_option("--n-surnames", cfg.n_surnames, "Surname count");
    sub->add_option("--n-geos", cfg.n_geos, "Geolocation count");
    sub->add_option("--race-mix", race_mix, "Six comma-separated race shares")->delimiter(',')->expected(6);
    sub->add_option("--dependence", cfg.dependence, "Coupling in [0, 1]; 0 satisfies conditional independence");
    sub->add_option("--population", cfg.total_population, "Total population");
    sub->add_option("--seed", cfg.seed, "Generator seed");
    sub->add_flag("--multinomial", cfg.multinomial, "Integer counts drawn from a multinomial");
    sub->add_flag("--voters", voters, "Also write voters.csv (needs --multinomial)");
    sub->add_option("--out-dir", out_dir, "Output directory")->required();
    sub->add_option("--manifest", manifest, "Manifest path");
    sub->callback([this, &action] { action = [this] { run(); }; });
  }

  void run() {
    Run r("synth");
    if (!race_mix.empty()) std::copy(race_mix.begin(), race_mix.end(), cfg.race_mix.begin());
    if (voters && !cfg.multinomial) throw InputError("--voters needs --multinomial counts");
    r.seed(cfg.seed);
    r.flag("n_surnames", cfg.n_surnames);
    r.flag("n_geos", cfg.n_geos);
    r.flag("race_mix", cfg.race_mix);
    r.flag("dependence", cfg.dependence);
    r.flag("population", cfg.total_population);
    r.flag("multinomial", cfg.multinomial);
    const auto t = generate(cfg);
    const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
    r.write(path("table.csv"), table_text(t));
    const CellInput cells = cells_from_table(t);
    std::ostringstream c;
    write_cell_counts(c, cells.labels, cells.keys, cells.counts);
    r.write(path("cells.csv"), c.str());
    RaceVector dist = t.race_totals();
    for (double& v : dist) v /= t.total();
    r.write(path("race_margin.json"), render(dist, write_race_distribution));
    if (voters) {
      std::vector<VoterRecord> records;
      const auto& l = t.labels();
      std::size_t id = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        for (std::size_t k = 0; k < kRaceCount; ++k) {
          for (double n = 0; n < t.row(i)[k]; n += 1.0) {
            records.push_back({"V" + std::to_string(++id), l.surnames[t.key(i).surname],
                               l.geolocations[t.key(i).geo], kAllRaces[k], true});
          }
        }
      }
      std::ostringstream v;
      write_voter_file(v, records);
      r.write(path("voters.csv"), v.str());
    }
    r.result()["cells"] = t.size();
    r.result()["total"] = t.total();
    r.write_manifest(manifest.empty() ? path("manifest.json") : manifest);
  }
};

int emit_error(const std::string& kind, const std::string& message, int code, json extra = json::object()) {
  json e = {{"error", {{"kind", kind}, {"message", message}}}};
  for (auto& [k, v] : extra.items()) e["error"][k] = v;
  std::cerr << e.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Race/ethnicity prediction by BISG and raking"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::function<void()> action;
  FitFactorsCmd fit;
  PredictCmd predict;
  RakeCmd rake_cmd;
  CalibMapCmd calib;
  SubsampleCmd subsample;
  EvaluateCmd evaluate;
  SynthCmd synth;
  fit.add(app, action);
  predict.add(app, action);
  rake_cmd.add(app, action);
  calib.add(app, action);
  subsample.add(app, action);
  evaluate.add(app, action);
  synth.add(app, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error("usage", e.what(), 2);
  }

  try {
    if (action) action();
    return 0;
  } catch (const NonConvergenceError& e) {
    return emit_error("non_convergence", e.what(), 3,
                      {{"final_margin_gap", e.final_margin_gap()}, {"iterations", e.iterations()}});
  } catch (const Error& e) {
    return emit_error(e.kind() == ErrorKind::Infeasible ? "infeasible" : "input", e.what(), 2);
  } catch (const fs::filesystem_error& e) {
    return emit_error("io", e.what(), 2);
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), 1);
  }
}
