#include "raketab/calibmap.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <numeric>

#include "raketab/error.hpp"

namespace raketab {

namespace {

std::vector<double> checked_distribution(std::span<const double> u, const char* what) {
  if (u.empty()) throw InputError(std::string(what) + " is empty");
  double s = 0.0;
  for (double x : u) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw InputError(std::string(what) + " is not a probability vector (negative entry)");
    }
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-6) {
    throw InputError(std::string(what) + " is not a probability vector (sum " + std::to_string(s) + ")");
  }
  std::vector<double> out(u.begin(), u.end());
  for (double& x : out) x /= s;
  return out;
}

}  // namespace

std::vector<double> project_to_simplex(std::span<const double> y) {
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0.0) theta = t;
  }
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::max(y[i] - theta, 0.0);
  return out;
}

CalibrationMap solve_calibration_map(std::span<const double> u_cps, std::span<const double> u_vf,
                                     const CalibMapOptions& options) {
  if (u_cps.size() != u_vf.size()) throw InputError("calibration distributions differ in length");
  const std::vector<double> u = checked_distribution(u_cps, "source distribution");
  const std::vector<double> v = checked_distribution(u_vf, "target distribution");
  const std::size_t n = u.size();
  const std::size_t nv = n * n;  // x[i * n + j] = A(i, j)

  // Equality rows: column sums, then A u = v. One row is redundant.
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), static_cast<Eigen::Index>(nv));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto k = static_cast<Eigen::Index>(i * n + j);
      c(static_cast<Eigen::Index>(j), k) = 1.0;
      c(static_cast<Eigen::Index>(n + i), k) = u[j];
    }
  }

  if (u == v) {
    CalibrationMap out;
    out.dim = n;
    out.matrix.assign(nv, 0.0);
    for (std::size_t i = 0; i < n; ++i) out.matrix[i * n + i] = 1.0;
    out.source = u;
    out.target = v;
    return out;
  }

  // Primal active set, started from the feasible rank-one map v 1^T.
  Eigen::VectorXd x(static_cast<Eigen::Index>(nv)), target = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));
  std::vector<bool> fixed(nv), pinned(nv);
  // Bounds released without progress; cleared after any positive step.
  std::vector<bool> stalled(nv);
  for (std::size_t i = 0; i < n; ++i) {
    target(static_cast<Eigen::Index>(i * n + i)) = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      x(static_cast<Eigen::Index>(i * n + j)) = v[i];
      fixed[i * n + j] = v[i] == 0.0;
      // A zero target row forces zeros wherever the source is positive.
      pinned[i * n + j] = v[i] == 0.0 && u[j] > 0.0;
    }
  }

  auto columns = [&](bool want_fixed) {
    std::vector<Eigen::Index> idx;
    for (std::size_t k = 0; k < nv; ++k) {
      if (fixed[k] == want_fixed) idx.push_back(static_cast<Eigen::Index>(k));
    }
    return idx;
  };

  std::size_t it = 0;
  bool optimal = false;
  for (; it < options.max_iterations; ++it) {
    const auto free_idx = columns(false);
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Eigen::MatrixXd cf(c.rows(), nf);
    Eigen::VectorXd tf(nf);
    for (Eigen::Index k = 0; k < nf; ++k) {
      cf.col(k) = c.col(free_idx[k]);
      tf(k) = target(free_idx[k]) - x(free_idx[k]);
    }
    // Step toward the target within the null space of the free equality rows.
    Eigen::VectorXd p = tf;
    if (nf > 0) p -= cf.completeOrthogonalDecomposition().solve(cf * tf);

    if (nf == 0 || p.cwiseAbs().maxCoeff() <= options.kkt_tolerance) {
      // Multipliers of the fixed-at-zero bounds must be nonnegative.
      const auto fixed_idx = columns(true);
      if (fixed_idx.empty()) {
        optimal = true;
        break;
      }
      Eigen::VectorXd gf(nf);
      for (Eigen::Index k = 0; k < nf; ++k) gf(k) = x(free_idx[k]) - target(free_idx[k]);
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(c.rows());
      if (nf > 0) mu = cf.transpose().completeOrthogonalDecomposition().solve(gf);
      double worst = -options.kkt_tolerance;
      std::optional<Eigen::Index> release;
      for (Eigen::Index k : fixed_idx) {
        if (pinned[static_cast<std::size_t>(k)] || stalled[static_cast<std::size_t>(k)]) continue;
        const double lambda = (x(k) - target(k)) - c.col(k).dot(mu);
        if (lambda < worst) {
          worst = lambda;
          release = k;
        }
      }
      if (!release) {
        optimal = true;
        break;
      }
      fixed[static_cast<std::size_t>(*release)] = false;
      continue;
    }

    double alpha = 1.0;
    std::optional<Eigen::Index> blocking;
    for (Eigen::Index k = 0; k < nf; ++k) {
      if (p(k) < 0.0) {
        const double ratio = -x(free_idx[k]) / p(k);
        if (ratio < alpha) {
          alpha = ratio;
          blocking = free_idx[k];
        }
      }
    }
    for (Eigen::Index k = 0; k < nf; ++k) x(free_idx[k]) += alpha * p(k);
    if (alpha > 0.0) {
      std::fill(stalled.begin(), stalled.end(), false);
    } else if (blocking) {
      stalled[static_cast<std::size_t>(*blocking)] = true;
    }
    if (blocking) {
      x(*blocking) = 0.0;
      fixed[static_cast<std::size_t>(*blocking)] = true;
    }
  }

  CalibrationMap out;
  out.dim = n;
  out.matrix.assign(x.data(), x.data() + x.size());
  for (double& e : out.matrix) {
    if (e < 0.0 && e >= -1e-12) e = 0.0;
  }
  out.source = u;
  out.target = v;
  double obj = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double au = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = out.at(i, j) - (i == j ? 1.0 : 0.0);
      obj += d * d;
      au += out.at(i, j) * u[j];
    }
    residual = std::max(residual, std::abs(au - v[i]));
  }
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += out.at(i, j);
    residual = std::max(residual, std::abs(col - 1.0));
  }
  const double min_entry = *std::min_element(out.matrix.begin(), out.matrix.end());
  if (!optimal || residual > options.accept_tolerance || min_entry < 0.0) {
    throw Error(ErrorKind::NonConvergence, "calibration map did not converge; constraint residual " +
                                               std::to_string(residual));
  }
  out.objective = std::sqrt(obj);
  out.kkt_residual = residual;
  out.iterations = it;
  return out;
}

CalibrationMap solve_calibration_map(const RaceVector& u_cps, const RaceVector& u_vf) {
  return solve_calibration_map(std::span<const double>(u_cps), std::span<const double>(u_vf));
}

std::vector<double> apply_calibration_map(const CalibrationMap& map, std::span<const double> p) {
  if (p.size() != map.dim) throw InputError("distribution length does not match the map");
  checked_distribution(p, "distribution");
  std::vector<double> out(map.dim, 0.0);
  for (std::size_t i = 0; i < map.dim; ++i) {
    for (std::size_t j = 0; j < map.dim; ++j) out[i] += map.at(i, j) * p[j];
  }
  return out;
}

RaceVector apply_calibration_map(const CalibrationMap& map, const RaceVector& p) {
  const auto v = apply_calibration_map(map, std::span<const double>(p));
  RaceVector out;
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace raketab
