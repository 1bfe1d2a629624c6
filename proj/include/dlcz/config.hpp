#pragma once

// Run configuration as read from a sectioned key = value file. Fields are
// kept in the units named by their keys (waist_um, power_w, ...) so that
// parse -> serialize -> parse is exact; the to_* accessors convert to SI.
//
//   [trap]      wavelength_nm power_w waist_um bias_field_g
//   [ensemble]  atom_count temperature_uk population_m_minus1 population_m0 population_m_plus1
//   [geometry]  write_wavelength_nm stokes_angle_deg write_detuning_mhz
//   [photon]    chi stokes_det_eff antistokes_det_eff retrieval_eff dark_prob_s dark_prob_as
//   [dephasing] field_rms_mg, optional sigma_v_mm_s and delta_k_per_mm overrides
//   [plan]      delays_us (comma list) or delay_start_us/delay_stop_us/delay_step_us,
//               trials_per_delay seed atoms_per_excitation threads
//   [analysis]  significance
//   [output]    dir photon_numbers

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlcz/dephase.hpp"
#include "dlcz/ensemble_mc.hpp"
#include "dlcz/physcore.hpp"

namespace dlcz {

struct RunConfig {
  // [trap]
  double wavelength_nm = 1030.0;
  double power_w = 7.0;
  double waist_um = 36.0;
  double bias_field_g = 3.23;
  // [ensemble]
  double atom_count = 2e5;
  double temperature_uk = 45.0;
  double population_m_minus1 = 1.0 / 3.0;
  double population_m0 = 1.0 / 3.0;
  double population_m_plus1 = 1.0 / 3.0;
  // [geometry]
  double write_wavelength_nm = 794.978851156;
  double stokes_angle_deg = 2.0;
  double write_detuning_mhz = 100.0;
  // [photon]; chi is the per-class mean excitation at uniform populations
  double chi = 0.02;
  double stokes_det_eff = 0.6;
  double antistokes_det_eff = 0.6;
  double retrieval_eff = 0.85;
  double dark_prob_s = 1e-4;
  double dark_prob_as = 0.04;
  // [dephasing]
  double field_rms_mg = 7.1;
  std::optional<double> sigma_v_mm_s;
  std::optional<double> delta_k_per_mm;
  // [plan]
  std::vector<double> delays_us = default_delays_us();
  std::uint64_t trials_per_delay = 100000;
  std::uint64_t seed = 42;
  std::uint32_t atoms_per_excitation = 256;
  unsigned threads = 0;
  // [analysis]
  double significance = 2.0;
  // [output]
  std::string output_dir = "out";
  bool photon_numbers = false;

  static std::vector<double> default_delays_us();

  TrapConfig to_trap() const;
  EnsembleConfig to_ensemble() const;
  BeamGeometry to_geometry() const;
  SimPlan to_plan() const;

  /// Checks every nested invariant; throws ValidationError naming the key.
  void validate(const Constants& consts = rb87()) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(std::string_view text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

struct DerivedQuantities {
  TrapDerived trap;
  CloudRadii radii;
  double peak_density;      // 1/m^3
  double sigma_v;           // m/s, possibly overridden
  double delta_k;           // 1/m, possibly overridden
  double field_rms;         // T
  double tau_thermal;       // s
  double tau_field;         // s, non-clock field channel alone
  double predicted_tau_nc;  // s, both channels
  double predicted_tau_c;   // s
  bool sigma_v_overridden;
  bool delta_k_overridden;
};

DerivedQuantities derive_quantities(const RunConfig& cfg, const Constants& consts = rb87());

/// Dephasing model with the clock class weighted by the m_F = -1 population
/// and the non-clock class by the m_F = 0 population.
DephasingModel make_dephasing_model(const RunConfig& cfg, const DerivedQuantities& derived,
                                    const Constants& consts = rb87());

/// Simulation models; each class's mean excitation is chi scaled by three
/// times its starting population.
SimModels make_models(const RunConfig& cfg, const DerivedQuantities& derived, const Constants& consts = rb87());

}  // namespace dlcz
