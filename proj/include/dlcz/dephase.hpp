#pragma once

// Phase-evolution statistics of the stored spin wave and the analytic
// coherence envelopes the Monte Carlo engine is checked against.

#include <string_view>
#include <vector>

#include "dlcz/physcore.hpp"

namespace dlcz {

enum class TransitionLabel { clock, non_clock };

std::string_view to_string(TransitionLabel label);

struct TransitionClass {
  TransitionLabel label = TransitionLabel::clock;
  double differential_zeeman_slope = 0.0;  // J/T, first-order shift of the Raman pair

  static TransitionClass clock() { return {TransitionLabel::clock, 0.0}; }
  static TransitionClass non_clock(const Constants& consts = rb87()) {
    return {TransitionLabel::non_clock, consts.bohr_magneton};
  }
};

struct WeightedClass {
  TransitionClass cls;
  double weight = 1.0;
};

struct DephasingModel {
  double delta_k = 0.0;    // 1/m
  double sigma_v = 0.0;    // m/s, 1D rms velocity along delta_k
  double field_rms = 0.0;  // T, quasi-static bias-field inhomogeneity
  std::vector<WeightedClass> classes;

  void validate() const;
};

/// |<exp(i phi(t))>|^2 for one transition class: Gaussian in t, product of the
/// motional and the field channel.
double coherence_envelope(const DephasingModel& model, const TransitionClass& cls, double t,
                          const Constants& consts = rb87());

/// Weight-averaged envelope over model.classes.
double mixed_envelope(const DephasingModel& model, double t, const Constants& consts = rb87());

/// 1/(sigma_v * delta_k): the 1/e time of the squared overlap.
double thermal_dephasing_time(double sigma_v, double delta_k);

/// hbar/(slope * field_rms); +infinity when the class has no first-order
/// sensitivity or the field is homogeneous.
double field_dephasing_time(double field_rms, const TransitionClass& cls, const Constants& consts = rb87());

/// Field rms that gives a non-clock dephasing time tau_nc.
double infer_field_inhomogeneity(double tau_nc, const Constants& consts = rb87());

}  // namespace dlcz
