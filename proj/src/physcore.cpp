#include "dlcz/physcore.hpp"

#include <cmath>
#include <string>

#include "dlcz/errors.hpp"

namespace dlcz {

namespace {

struct Line {
  double weight;
  double omega;  // rad/s
  double gamma;  // rad/s
};

std::array<Line, 2> dipole_lines(const Constants& c) {
  return {{{1.0 / 3.0, two_pi * c.speed_of_light / c.d1_wavelength, c.natural_linewidth_d1},
           {2.0 / 3.0, two_pi * c.speed_of_light / c.d2_wavelength, c.natural_linewidth_d2}}};
}

void require(bool ok, const char* field, const char* constraint) {
  if (!ok) throw ValidationError(field, constraint);
}

// Sum over lines of w * (3 pi c^2 / 2 w0^3) * (Gamma/Delta)^power.
double weighted_line_sum(const TrapConfig& trap, const Constants& c, int power) {
  const double omega_laser = two_pi * c.speed_of_light / trap.wavelength;
  double sum = 0.0;
  for (const auto& line : dipole_lines(c)) {
    const double detuning = omega_laser - line.omega;
    if (detuning == 0.0) {
      throw ValidationError("trap.wavelength", "coincides with an atomic resonance (zero detuning)");
    }
    const double prefactor = 3.0 * pi * c.speed_of_light * c.speed_of_light / (2.0 * std::pow(line.omega, 3));
    sum += line.weight * prefactor * std::pow(line.gamma / detuning, power);
  }
  return sum;
}

}  // namespace

void Constants::validate() const {
  require(boltzmann_constant > 0 && reduced_planck > 0 && bohr_magneton > 0 && speed_of_light > 0 &&
              rb87_mass > 0 && d1_wavelength > 0 && d2_wavelength > 0 && natural_linewidth_d1 > 0 &&
              natural_linewidth_d2 > 0 && hyperfine_splitting > 0,
          "constants", "all constants must be strictly positive");
  require(d1_wavelength > d2_wavelength, "constants.d1_wavelength", "must exceed d2_wavelength");
}

void TrapConfig::validate(const Constants& consts) const {
  require(std::isfinite(power) && power > 0, "trap.power", "must be > 0");
  require(std::isfinite(waist) && waist > 0, "trap.waist", "must be > 0");
  require(std::isfinite(bias_field) && bias_field >= 0, "trap.bias_field", "must be >= 0");
  require(std::isfinite(wavelength) && wavelength > consts.d1_wavelength, "trap.wavelength",
          "must be red-detuned (longer than the D1 wavelength)");
}

void EnsembleConfig::validate() const {
  require(std::isfinite(atom_count) && atom_count >= 1, "ensemble.atom_count", "must be >= 1");
  require(std::isfinite(temperature) && temperature > 0, "ensemble.temperature", "must be > 0");
  double sum = 0.0;
  for (double p : zeeman_populations) {
    require(std::isfinite(p) && p >= 0 && p <= 1, "ensemble.zeeman_populations", "each must lie in [0, 1]");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-12, "ensemble.zeeman_populations", "must sum to 1 within 1e-12");
}

void BeamGeometry::validate() const {
  require(std::isfinite(write_wavelength) && write_wavelength > 0, "geometry.write_wavelength", "must be > 0");
  require(stokes_angle > 0 && stokes_angle < pi / 2, "geometry.stokes_angle", "must lie in (0, pi/2)");
  require(std::isfinite(write_detuning), "geometry.write_detuning", "must be finite");
}

double peak_intensity(const TrapConfig& trap) { return 2.0 * trap.power / (pi * trap.waist * trap.waist); }

double rayleigh_range(const TrapConfig& trap) { return pi * trap.waist * trap.waist / trap.wavelength; }

double trap_depth(const TrapConfig& trap, const Constants& consts) {
  // U0 < 0 for a red-detuned beam; depth is reported as |U0|/k_B.
  const double potential = weighted_line_sum(trap, consts, 1) * peak_intensity(trap);
  return -potential / consts.boltzmann_constant;
}

double effective_gamma_over_detuning(const TrapConfig& trap, const Constants& consts) {
  return weighted_line_sum(trap, consts, 2) / weighted_line_sum(trap, consts, 1);
}

TrapFrequencies trap_frequencies(double depth, const TrapConfig& trap, const Constants& consts) {
  if (!(depth > 0)) throw ValidationError("depth", "must be > 0");
  const double u0 = depth * consts.boltzmann_constant;
  const double m = consts.rb87_mass;
  const double z_r = rayleigh_range(trap);
  return {std::sqrt(4.0 * u0 / (m * trap.waist * trap.waist)), std::sqrt(2.0 * u0 / (m * z_r * z_r))};
}

double scattering_rate(double depth, double gamma_over_detuning, const Constants& consts) {
  if (depth < 0) throw ValidationError("depth", "must be >= 0");
  return depth * consts.boltzmann_constant / consts.reduced_planck * std::abs(gamma_over_detuning);
}

double scattering_rate(double depth, const TrapConfig& trap, const Constants& consts) {
  return scattering_rate(depth, effective_gamma_over_detuning(trap, consts), consts);
}

CloudRadii cloud_radii(const EnsembleConfig& ens, const TrapFrequencies& freqs, const Constants& consts) {
  if (!(ens.temperature > 0)) throw ValidationError("ensemble.temperature", "must be > 0");
  const double v = thermal_velocity(ens.temperature, consts);
  return {v / freqs.radial, v / freqs.axial};
}

double peak_density(const EnsembleConfig& ens, const CloudRadii& radii) {
  if (!(radii.sigma_r > 0 && radii.sigma_z > 0)) throw ValidationError("radii", "must be > 0");
  return ens.atom_count / (std::pow(two_pi, 1.5) * radii.sigma_r * radii.sigma_r * radii.sigma_z);
}

double thermal_velocity(double temperature, const Constants& consts) {
  if (temperature < 0) throw ValidationError("temperature", "must be >= 0");
  return std::sqrt(consts.boltzmann_constant * temperature / consts.rb87_mass);
}

double momentum_transfer(const BeamGeometry& geom, const Constants& consts) {
  const double c = consts.speed_of_light;
  const double k_w = two_pi / geom.write_wavelength + two_pi * geom.write_detuning / c;
  const double k_s = k_w - two_pi * consts.hyperfine_splitting / c;
  // Law of cosines, written to stay accurate near theta = 0.
  const double half_sin = std::sin(0.5 * geom.stokes_angle);
  return std::sqrt((k_w - k_s) * (k_w - k_s) + 4.0 * k_w * k_s * half_sin * half_sin);
}

TrapDerived derive_trap(const TrapConfig& trap, const Constants& consts) {
  trap.validate(consts);
  const double depth = trap_depth(trap, consts);
  const auto freqs = trap_frequencies(depth, trap, consts);
  return {depth, freqs.radial, freqs.axial, scattering_rate(depth, trap, consts), rayleigh_range(trap)};
}

}  // namespace dlcz
