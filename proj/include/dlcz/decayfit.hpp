#pragma once

// Two-Gaussian decay of g(t) toward the uncorrelated floor of 1, and a
// weighted damped least-squares fitter for it.

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dlcz/photostats.hpp"
#include "dlcz/physcore.hpp"

namespace dlcz {

struct DecayParams {
  double amp_nc = 0.0;
  double amp_c = 0.0;
  double tau_nc = 1.0;  // s
  double tau_c = 1.0;   // s
};

// Parameter order used by gradients and covariance matrices.
enum DecayParamIndex { kAmpNc = 0, kAmpC = 1, kTauNc = 2, kTauC = 3 };

struct DecayFitResult {
  DecayParams params;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
  double chi_square = 0.0;
  int dof = 0;
  bool converged = false;
  int iterations = 0;

  std::array<double, 4> std_errors() const;
};

double model_eval(const DecayParams& p, double t);

/// d model / d (amp_nc, amp_c, tau_nc, tau_c).
std::array<double, 4> model_gradient(const DecayParams& p, double t);

/// Amplitudes (g(0) - 1)/2 each; times from the delays where g - 1 falls to
/// 60% and 20% of its first value.
DecayParams auto_initial_params(std::span<const CorrelationPoint> points);

struct FitOptions {
  std::optional<DecayParams> init;
  int max_iterations = 500;
  double tolerance = 1e-10;
};

/// Inverse-variance weighted fit of all four parameters, log-parameterized
/// so amplitudes and times stay positive. Throws ValidationError on too few
/// points and SingularFitError when the Jacobian is rank deficient.
DecayFitResult fit_decay(std::span<const CorrelationPoint> points, const FitOptions& opts = {});

/// One Gaussian (amp_c, tau_c) with amp_nc pinned to 0. With clock_only
/// false only the tail is fitted: points earlier than twice the fast time of
/// auto_initial_params are dropped.
DecayFitResult single_exponent_fit(std::span<const CorrelationPoint> points, bool clock_only = true,
                                   const FitOptions& opts = {});

struct PhysicsEstimate {
  double field_rms;         // T
  double implied_velocity;  // m/s
  double tau_field;         // s, non-clock time with the motional channel removed
};

/// Removes the motional channel from tau_nc (inverse-square times add),
/// converts the remainder to a field rms, and reads a velocity off tau_c.
PhysicsEstimate extract_physics(const DecayFitResult& result, double delta_k, const Constants& consts = rb87());
PhysicsEstimate extract_physics(const DecayFitResult& result, const BeamGeometry& geometry,
                                const Constants& consts = rb87());

}  // namespace dlcz
