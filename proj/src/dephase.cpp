#include "dlcz/dephase.hpp"

#include <cmath>
#include <limits>

#include "dlcz/errors.hpp"

namespace dlcz {

std::string_view to_string(TransitionLabel label) {
  return label == TransitionLabel::clock ? "clock" : "non_clock";
}

void DephasingModel::validate() const {
  if (!(delta_k >= 0 && std::isfinite(delta_k))) throw ValidationError("dephasing.delta_k", "must be >= 0");
  if (!(sigma_v >= 0 && std::isfinite(sigma_v))) throw ValidationError("dephasing.sigma_v", "must be >= 0");
  if (!(field_rms >= 0 && std::isfinite(field_rms))) throw ValidationError("dephasing.field_rms", "must be >= 0");
  for (const auto& wc : classes) {
    if (!(wc.weight >= 0 && std::isfinite(wc.weight))) {
      throw ValidationError("dephasing.classes", "amplitude weights must be nonnegative");
    }
  }
}

double coherence_envelope(const DephasingModel& model, const TransitionClass& cls, double t,
                          const Constants& consts) {
  if (t < 0) throw ValidationError("t", "must be >= 0");
  const double motional_rate = model.delta_k * model.sigma_v;
  const double field_rate = cls.differential_zeeman_slope * model.field_rms / consts.reduced_planck;
  const double a = motional_rate * t;
  const double b = field_rate * t;
  return std::exp(-a * a) * std::exp(-b * b);
}

double mixed_envelope(const DephasingModel& model, double t, const Constants& consts) {
  double total = 0.0;
  double weights = 0.0;
  for (const auto& wc : model.classes) {
    total += wc.weight * coherence_envelope(model, wc.cls, t, consts);
    weights += wc.weight;
  }
  if (!(weights > 0)) throw ValidationError("dephasing.classes", "need a class with positive weight");
  return total / weights;
}

double thermal_dephasing_time(double sigma_v, double delta_k) {
  if (!(sigma_v > 0)) throw ValidationError("sigma_v", "must be > 0 for a finite dephasing time");
  if (!(delta_k > 0)) throw ValidationError("delta_k", "must be > 0 for a finite dephasing time");
  return 1.0 / (sigma_v * delta_k);
}

double field_dephasing_time(double field_rms, const TransitionClass& cls, const Constants& consts) {
  if (field_rms < 0) throw ValidationError("field_rms", "must be >= 0");
  const double rate = cls.differential_zeeman_slope * field_rms;
  if (rate == 0.0) return std::numeric_limits<double>::infinity();
  return consts.reduced_planck / rate;
}

double infer_field_inhomogeneity(double tau_nc, const Constants& consts) {
  if (!(tau_nc > 0)) throw ValidationError("tau_nc", "must be > 0");
  return consts.reduced_planck / (consts.bohr_magneton * tau_nc);
}

}  // namespace dlcz
