#pragma once

// Atomic data for 87Rb and closed-form trap / ensemble quantities.
// Everything here is SI in, SI out.

#include <array>
#include <numbers>

namespace dlcz {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct Constants {
  double boltzmann_constant = 1.380649e-23;      // J/K
  double reduced_planck = 1.054571817e-34;       // J s
  double bohr_magneton = 9.2740100783e-24;       // J/T
  double speed_of_light = 299792458.0;           // m/s
  double rb87_mass = 1.443160648e-25;            // kg
  double d1_wavelength = 794.978851156e-9;       // m, 5S1/2 -> 5P1/2
  double d2_wavelength = 780.241209686e-9;       // m, 5S1/2 -> 5P3/2
  double natural_linewidth_d1 = two_pi * 5.7500e6;  // rad/s
  double natural_linewidth_d2 = two_pi * 6.0666e6;  // rad/s
  double hyperfine_splitting = 6.834682610904e9;    // Hz, ground state

  void validate() const;
};

inline const Constants& rb87() {
  static const Constants c{};
  return c;
}

struct TrapConfig {
  double wavelength = 1030e-9;  // m
  double power = 7.0;           // W
  double waist = 36e-6;         // m, 1/e^2 intensity radius
  double bias_field = 3.23e-4;  // T

  void validate(const Constants& consts) const;
};

struct EnsembleConfig {
  double atom_count = 2e5;
  double temperature = 45e-6;  // K
  // F=1 sublevel populations, ordered m_F = -1, 0, +1.
  std::array<double, 3> zeeman_populations{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  void validate() const;
};

struct BeamGeometry {
  double write_wavelength = 794.978851156e-9;  // m, write addresses the D1 line
  double stokes_angle = 2.0 * pi / 180.0;      // rad, Stokes mode relative to the write beam
  double write_detuning = 100e6;               // Hz, blue of |g> -> |e>

  void validate() const;
};

struct TrapFrequencies {
  double radial;  // rad/s
  double axial;   // rad/s
};

struct CloudRadii {
  double sigma_r;  // m
  double sigma_z;  // m
};

struct TrapDerived {
  double depth;            // K
  double radial_freq;      // rad/s
  double axial_freq;       // rad/s
  double scattering_rate;  // 1/s
  double rayleigh_range;   // m
};

double peak_intensity(const TrapConfig& trap);
double rayleigh_range(const TrapConfig& trap);

/// Trap depth U0/k_B in kelvin from the D1+D2 rotating-wave dipole potential,
/// lines weighted 1/3 (D1) and 2/3 (D2). Throws ValidationError if the trap
/// wavelength sits on an atomic line.
double trap_depth(const TrapConfig& trap, const Constants& consts);

/// Weighted Gamma/Delta of the two lines, the same weighting the potential uses.
/// Negative for a red-detuned trap.
double effective_gamma_over_detuning(const TrapConfig& trap, const Constants& consts);

TrapFrequencies trap_frequencies(double depth, const TrapConfig& trap, const Constants& consts);

/// Photon scattering rate at the trap centre, (U0/hbar) * |Gamma/Delta|_eff.
double scattering_rate(double depth, const TrapConfig& trap, const Constants& consts);
double scattering_rate(double depth, double gamma_over_detuning, const Constants& consts);

CloudRadii cloud_radii(const EnsembleConfig& ens, const TrapFrequencies& freqs, const Constants& consts);

/// Peak density of a Gaussian cloud, atoms per m^3.
double peak_density(const EnsembleConfig& ens, const CloudRadii& radii);

/// 1D rms velocity sqrt(k_B T / m).
double thermal_velocity(double temperature, const Constants& consts);

/// |k_s - k_w| for a Stokes photon red-shifted from the write photon by the
/// ground hyperfine splitting and emitted at geom.stokes_angle.
double momentum_transfer(const BeamGeometry& geom, const Constants& consts);

TrapDerived derive_trap(const TrapConfig& trap, const Constants& consts);

}  // namespace dlcz
