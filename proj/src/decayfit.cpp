#include "dlcz/decayfit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>

#include "dlcz/dephase.hpp"
#include "dlcz/errors.hpp"

namespace dlcz {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_points(std::span<const CorrelationPoint> points, std::size_t min_points, std::size_t min_delays) {
  if (points.size() < min_points) {
    throw ValidationError("points", "need at least " + std::to_string(min_points) + " points, got " +
                                        std::to_string(points.size()));
  }
  std::set<std::int64_t> delays;
  for (const auto& p : points) {
    if (!(p.std_error > 0 && std::isfinite(p.std_error))) {
      throw ValidationError("points.std_error", "every point needs a positive standard error");
    }
    if (!(p.delay >= 0 && std::isfinite(p.g_value))) throw ValidationError("points", "non-finite point");
    delays.insert(delay_key(p.delay));
  }
  if (delays.size() < min_delays) {
    throw ValidationError("points", "need at least " + std::to_string(min_delays) + " distinct delays");
  }
}

// First delay at which g - 1 has fallen to `level` of its initial excess,
// linearly interpolated; the last delay if it never does.
double level_crossing(std::span<const CorrelationPoint> sorted, double level) {
  const double start = sorted.front().g_value - 1.0;
  const double target = level * start;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double y0 = sorted[i - 1].g_value - 1.0;
    const double y1 = sorted[i].g_value - 1.0;
    if (y1 <= target) {
      if (y0 == y1) return sorted[i].delay;
      const double f = std::clamp((y0 - target) / (y0 - y1), 0.0, 1.0);
      return sorted[i - 1].delay + f * (sorted[i].delay - sorted[i - 1].delay);
    }
  }
  return sorted.back().delay;
}

std::vector<CorrelationPoint> sorted_by_delay(std::span<const CorrelationPoint> points) {
  std::vector<CorrelationPoint> v(points.begin(), points.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.delay < b.delay; });
  return v;
}

struct LmOutcome {
  VectorXd theta;
  double cost;
  bool converged;
  int iterations;
};

// Levenberg-Marquardt on weighted residuals r(theta) with Jacobian J(theta).
// cost = |r|^2.
LmOutcome levenberg_marquardt(VectorXd theta, const std::function<VectorXd(const VectorXd&)>& residuals,
                              const std::function<MatrixXd(const VectorXd&)>& jacobian, int max_iterations,
                              double tolerance) {
  VectorXd r = residuals(theta);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  int iterations = 0;

  while (iterations < max_iterations) {
    const MatrixXd J = jacobian(theta);
    const MatrixXd A = J.transpose() * J;
    const VectorXd g = J.transpose() * r;
    const double diag_floor = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    while (iterations < max_iterations) {
      ++iterations;
      MatrixXd damped = A;
      for (Eigen::Index i = 0; i < A.rows(); ++i) damped(i, i) += lambda * std::max(A(i, i), diag_floor);
      const VectorXd step = damped.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        if (lambda > 1e20) break;
        continue;
      }
      const VectorXd trial = theta + step;
      const VectorXd r_trial = residuals(trial);
      const double trial_cost = r_trial.allFinite() ? r_trial.squaredNorm() : std::numeric_limits<double>::infinity();
      if (trial_cost <= cost) {
        const double cost_change = cost - trial_cost;
        const double rel_step = step.cwiseAbs().maxCoeff();  // log-space: relative parameter change
        theta = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-15);
        accepted = true;
        if (rel_step < tolerance && cost_change <= tolerance * cost + 1e-30) {
          return {theta, cost, true, iterations};
        }
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e20) break;
    }
    if (!accepted) {
      // No downhill step at any damping: a numerical minimum if the gradient
      // has vanished to working precision.
      const double grad = g.cwiseAbs().maxCoeff();
      return {theta, cost, grad <= 1e-8 * std::max(1.0, cost), iterations};
    }
  }
  return {theta, cost, false, iterations};
}

// Weighted Jacobian of the model in the original (linear) parameters for the
// subset `free` of parameter indices.
MatrixXd weighted_jacobian(std::span<const CorrelationPoint> pts, const DecayParams& p,
                           std::span<const int> free) {
  MatrixXd J(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(free.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto grad = model_gradient(p, pts[i].delay);
    for (std::size_t k = 0; k < free.size(); ++k) J(i, k) = grad[free[k]] / pts[i].std_error;
  }
  return J;
}

double& param_ref(DecayParams& p, int idx) {
  switch (idx) {
    case kAmpNc: return p.amp_nc;
    case kAmpC: return p.amp_c;
    case kTauNc: return p.tau_nc;
    default: return p.tau_c;
  }
}

DecayFitResult run_fit(std::span<const CorrelationPoint> pts, DecayParams init, std::span<const int> free,
                       const FitOptions& opts) {
  const auto k = static_cast<Eigen::Index>(free.size());
  auto unpack = [&](const VectorXd& theta) {
    DecayParams p = init;
    for (Eigen::Index i = 0; i < k; ++i) param_ref(p, free[i]) = std::exp(theta[i]);
    return p;
  };
  auto residuals = [&](const VectorXd& theta) {
    const DecayParams p = unpack(theta);
    VectorXd r(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) r[i] = (model_eval(p, pts[i].delay) - pts[i].g_value) / pts[i].std_error;
    return r;
  };
  auto jacobian = [&](const VectorXd& theta) {
    const DecayParams p = unpack(theta);
    MatrixXd J = weighted_jacobian(pts, p, free);
    for (Eigen::Index i = 0; i < k; ++i) J.col(i) *= std::exp(theta[i]);  // chain rule through log
    return J;
  };

  VectorXd theta(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    double v = param_ref(init, free[i]);
    if (!(v > 0 && std::isfinite(v))) throw ValidationError("init", "initial parameters must be positive and finite");
    theta[i] = std::log(v);
  }

  const auto lm = levenberg_marquardt(theta, residuals, jacobian, opts.max_iterations, opts.tolerance);

  DecayFitResult out;
  out.params = unpack(lm.theta);
  out.chi_square = lm.cost;
  out.dof = static_cast<int>(pts.size()) - static_cast<int>(k);
  out.converged = lm.converged;
  out.iterations = lm.iterations;

  // Invert in log-parameter space, where the columns are comparably scaled,
  // then map back with D = diag(p).
  VectorXd scale(k);
  for (Eigen::Index i = 0; i < k; ++i) scale[i] = param_ref(out.params, free[i]);
  const MatrixXd J = weighted_jacobian(pts, out.params, free) * scale.asDiagonal();
  const MatrixXd info = J.transpose() * J;
  Eigen::FullPivLU<MatrixXd> lu(info);
  lu.setThreshold(1e-13);
  if (!info.allFinite() || lu.rank() < k) {
    throw SingularFitError("degenerate Jacobian at the fitted parameters (rank " + std::to_string(lu.rank()) + " of " +
                           std::to_string(k) + "); the data do not constrain every parameter");
  }
  const MatrixXd cov = scale.asDiagonal() * lu.inverse() * scale.asDiagonal();
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) out.covariance(free[a], free[b]) = 0.5 * (cov(a, b) + cov(b, a));
  }
  return out;
}

void swap_labels(DecayFitResult& r) {
  std::swap(r.params.amp_nc, r.params.amp_c);
  std::swap(r.params.tau_nc, r.params.tau_c);
  Eigen::Matrix4d perm = Eigen::Matrix4d::Zero();
  perm(kAmpNc, kAmpC) = perm(kAmpC, kAmpNc) = perm(kTauNc, kTauC) = perm(kTauC, kTauNc) = 1.0;
  r.covariance = perm * r.covariance * perm;
}

}  // namespace

std::array<double, 4> DecayFitResult::std_errors() const {
  std::array<double, 4> e{};
  for (int i = 0; i < 4; ++i) e[i] = std::sqrt(std::max(0.0, covariance(i, i)));
  return e;
}

double model_eval(const DecayParams& p, double t) {
  const double x = t / p.tau_nc;
  const double y = t / p.tau_c;
  return 1.0 + p.amp_nc * std::exp(-x * x) + p.amp_c * std::exp(-y * y);
}

std::array<double, 4> model_gradient(const DecayParams& p, double t) {
  const double x = t / p.tau_nc;
  const double y = t / p.tau_c;
  const double ex = std::exp(-x * x);
  const double ey = std::exp(-y * y);
  return {ex, ey, p.amp_nc * ex * 2.0 * x * x / p.tau_nc, p.amp_c * ey * 2.0 * y * y / p.tau_c};
}

DecayParams auto_initial_params(std::span<const CorrelationPoint> points) {
  if (points.empty()) throw ValidationError("points", "need at least one point");
  const auto sorted = sorted_by_delay(points);
  const double excess = sorted.front().g_value - 1.0;
  if (!(excess > 0)) throw ValidationError("points", "g at the earliest delay must exceed 1");

  DecayParams p;
  p.amp_nc = p.amp_c = 0.5 * excess;
  p.tau_nc = level_crossing(sorted, 0.6);
  p.tau_c = level_crossing(sorted, 0.2);
  // Keep both times positive and distinct.
  const double span = std::max(sorted.back().delay, 1e-12);
  if (!(p.tau_nc > 0)) p.tau_nc = 0.25 * span;
  if (!(p.tau_c > p.tau_nc)) p.tau_c = 2.0 * p.tau_nc;
  return p;
}

DecayFitResult fit_decay(std::span<const CorrelationPoint> points, const FitOptions& opts) {
  check_points(points, 5, 4);
  const DecayParams init = opts.init ? *opts.init : auto_initial_params(points);
  static constexpr int free[] = {kAmpNc, kAmpC, kTauNc, kTauC};
  auto result = run_fit(points, init, free, opts);
  if (result.params.tau_nc > result.params.tau_c) swap_labels(result);
  return result;
}

DecayFitResult single_exponent_fit(std::span<const CorrelationPoint> points, bool clock_only,
                                   const FitOptions& opts) {
  check_points(points, 5, 4);
  std::vector<CorrelationPoint> used(points.begin(), points.end());
  if (!clock_only) {
    const double cutoff = 2.0 * auto_initial_params(points).tau_nc;
    std::erase_if(used, [&](const CorrelationPoint& p) { return p.delay < cutoff; });
    check_points(used, 3, 3);
  }

  DecayParams init;
  if (opts.init) {
    init = *opts.init;
  } else {
    const auto sorted = sorted_by_delay(used);
    const double excess = sorted.front().g_value - 1.0;
    if (!(excess > 0)) throw ValidationError("points", "g at the earliest delay must exceed 1");
    init.amp_c = excess;
    init.tau_c = level_crossing(sorted, std::exp(-1.0));
    if (!(init.tau_c > 0)) init.tau_c = std::max(sorted.back().delay, 1e-12);
  }
  init.amp_nc = 0.0;
  init.tau_nc = init.tau_c;

  static constexpr int free[] = {kAmpC, kTauC};
  auto result = run_fit(used, init, free, opts);
  result.params.amp_nc = 0.0;
  result.params.tau_nc = result.params.tau_c;
  return result;
}

PhysicsEstimate extract_physics(const DecayFitResult& result, double delta_k, const Constants& consts) {
  if (!result.converged) throw ValidationError("fit", "physics extraction needs a converged fit");
  const double tau_fit = result.params.tau_nc;
  const double tau_c = result.params.tau_c;
  if (!(tau_fit < tau_c)) {
    throw ValidationError("tau_nc", "must be shorter than tau_c to separate the field channel");
  }
  if (!(delta_k > 0)) throw ValidationError("delta_k", "must be > 0");
  // 1/tau_nc^2 = 1/tau_field^2 + 1/tau_motion^2, with tau_motion = tau_c.
  const double inv_sq = 1.0 / (tau_fit * tau_fit) - 1.0 / (tau_c * tau_c);
  const double tau_field = 1.0 / std::sqrt(inv_sq);
  return {infer_field_inhomogeneity(tau_field, consts), 1.0 / (tau_c * delta_k), tau_field};
}

PhysicsEstimate extract_physics(const DecayFitResult& result, const BeamGeometry& geometry, const Constants& consts) {
  return extract_physics(result, momentum_transfer(geometry, consts), consts);
}

}  // namespace dlcz
