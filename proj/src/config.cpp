#include "dlcz/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "dlcz/errors.hpp"
#include "dlcz/text_io.hpp"

namespace dlcz {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct KeySpec {
  const char* section;
  const char* name;
  std::function<void(RunConfig&, std::string_view, std::size_t)> set;
  // Empty optional: key omitted from serialized output.
  std::function<std::optional<std::string>(const RunConfig&)> get;
};

template <typename T>
T parse_value(std::string_view v, std::size_t line, const std::string& key) {
  return parse_field<T>(v, line, key);
}

KeySpec number(const char* section, const char* name, double RunConfig::*member) {
  return {section, name,
          [=](RunConfig& c, std::string_view v, std::size_t line) {
            c.*member = parse_value<double>(v, line, std::string(section) + "." + name);
          },
          [=](const RunConfig& c) -> std::optional<std::string> { return fmt_double(c.*member); }};
}

KeySpec optional_number(const char* section, const char* name, std::optional<double> RunConfig::*member) {
  return {section, name,
          [=](RunConfig& c, std::string_view v, std::size_t line) {
            c.*member = parse_value<double>(v, line, std::string(section) + "." + name);
          },
          [=](const RunConfig& c) -> std::optional<std::string> {
            if (!(c.*member)) return std::nullopt;
            return fmt_double(*(c.*member));
          }};
}

template <typename T>
KeySpec integer(const char* section, const char* name, T RunConfig::*member) {
  return {section, name,
          [=](RunConfig& c, std::string_view v, std::size_t line) {
            c.*member = parse_value<T>(v, line, std::string(section) + "." + name);
          },
          [=](const RunConfig& c) -> std::optional<std::string> { return std::to_string(c.*member); }};
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      number("trap", "wavelength_nm", &RunConfig::wavelength_nm),
      number("trap", "power_w", &RunConfig::power_w),
      number("trap", "waist_um", &RunConfig::waist_um),
      number("trap", "bias_field_g", &RunConfig::bias_field_g),
      number("ensemble", "atom_count", &RunConfig::atom_count),
      number("ensemble", "temperature_uk", &RunConfig::temperature_uk),
      number("ensemble", "population_m_minus1", &RunConfig::population_m_minus1),
      number("ensemble", "population_m0", &RunConfig::population_m0),
      number("ensemble", "population_m_plus1", &RunConfig::population_m_plus1),
      number("geometry", "write_wavelength_nm", &RunConfig::write_wavelength_nm),
      number("geometry", "stokes_angle_deg", &RunConfig::stokes_angle_deg),
      number("geometry", "write_detuning_mhz", &RunConfig::write_detuning_mhz),
      number("photon", "chi", &RunConfig::chi),
      number("photon", "stokes_det_eff", &RunConfig::stokes_det_eff),
      number("photon", "antistokes_det_eff", &RunConfig::antistokes_det_eff),
      number("photon", "retrieval_eff", &RunConfig::retrieval_eff),
      number("photon", "dark_prob_s", &RunConfig::dark_prob_s),
      number("photon", "dark_prob_as", &RunConfig::dark_prob_as),
      number("dephasing", "field_rms_mg", &RunConfig::field_rms_mg),
      optional_number("dephasing", "sigma_v_mm_s", &RunConfig::sigma_v_mm_s),
      optional_number("dephasing", "delta_k_per_mm", &RunConfig::delta_k_per_mm),
      {"plan", "delays_us",
       [](RunConfig& c, std::string_view v, std::size_t line) {
         c.delays_us.clear();
         for (auto f : split_fields(v)) c.delays_us.push_back(parse_value<double>(f, line, "plan.delays_us"));
       },
       [](const RunConfig& c) -> std::optional<std::string> {
         std::string s;
         for (std::size_t i = 0; i < c.delays_us.size(); ++i) {
           if (i) s += ", ";
           s += fmt_double(c.delays_us[i]);
         }
         return s;
       }},
      integer("plan", "trials_per_delay", &RunConfig::trials_per_delay),
      integer("plan", "seed", &RunConfig::seed),
      integer("plan", "atoms_per_excitation", &RunConfig::atoms_per_excitation),
      integer("plan", "threads", &RunConfig::threads),
      number("analysis", "significance", &RunConfig::significance),
      {"output", "dir", [](RunConfig& c, std::string_view v, std::size_t) { c.output_dir = std::string(v); },
       [](const RunConfig& c) -> std::optional<std::string> { return c.output_dir; }},
      {"output", "photon_numbers",
       [](RunConfig& c, std::string_view v, std::size_t line) {
         if (v == "true" || v == "1") {
           c.photon_numbers = true;
         } else if (v == "false" || v == "0") {
           c.photon_numbers = false;
         } else {
           throw FormatError(line, "output.photon_numbers must be true or false");
         }
       },
       [](const RunConfig& c) -> std::optional<std::string> { return c.photon_numbers ? "true" : "false"; }},
  };
  return table;
}

void require(bool ok, const char* key, const char* constraint) {
  if (!ok) throw ValidationError(key, constraint);
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0 && p <= 1; }

}  // namespace

std::vector<double> RunConfig::default_delays_us() {
  std::vector<double> d;
  for (int i = 0; i <= 20; ++i) d.push_back(5.0 * i);
  return d;
}

TrapConfig RunConfig::to_trap() const {
  return {wavelength_nm * 1e-9, power_w, waist_um * 1e-6, bias_field_g * 1e-4};
}

EnsembleConfig RunConfig::to_ensemble() const {
  return {atom_count, temperature_uk * 1e-6, {population_m_minus1, population_m0, population_m_plus1}};
}

BeamGeometry RunConfig::to_geometry() const {
  return {write_wavelength_nm * 1e-9, stokes_angle_deg * pi / 180.0, write_detuning_mhz * 1e6};
}

SimPlan RunConfig::to_plan() const {
  SimPlan plan;
  for (double d : delays_us) plan.delays.push_back(d * 1e-6);
  plan.trials_per_delay = trials_per_delay;
  plan.rng_seed = seed;
  plan.atoms_per_excitation = atoms_per_excitation;
  plan.threads = threads;
  return plan;
}

void RunConfig::validate(const Constants& consts) const {
  require(std::isfinite(power_w) && power_w > 0, "trap.power_w", "must be > 0");
  require(std::isfinite(waist_um) && waist_um > 0, "trap.waist_um", "must be > 0");
  require(std::isfinite(wavelength_nm) && wavelength_nm * 1e-9 > consts.d1_wavelength, "trap.wavelength_nm",
          "must be longer than the D1 line (red-detuned trap)");
  require(std::isfinite(bias_field_g) && bias_field_g >= 0, "trap.bias_field_g", "must be >= 0");
  require(std::isfinite(atom_count) && atom_count >= 1, "ensemble.atom_count", "must be >= 1");
  require(std::isfinite(temperature_uk) && temperature_uk > 0, "ensemble.temperature_uk", "must be > 0");
  for (double p : {population_m_minus1, population_m0, population_m_plus1}) {
    require(is_probability(p), "ensemble.population_*", "each population must lie in [0, 1]");
  }
  require(std::abs(population_m_minus1 + population_m0 + population_m_plus1 - 1.0) <= 1e-12,
          "ensemble.population_*", "populations must sum to 1 within 1e-12");
  require(std::isfinite(write_wavelength_nm) && write_wavelength_nm > 0, "geometry.write_wavelength_nm", "must be > 0");
  require(stokes_angle_deg > 0 && stokes_angle_deg < 90, "geometry.stokes_angle_deg", "must lie in (0, 90)");
  require(std::isfinite(write_detuning_mhz), "geometry.write_detuning_mhz", "must be finite");
  require(std::isfinite(chi) && chi >= 0, "photon.chi", "must be >= 0");
  require(3.0 * chi <= 1e6, "photon.chi", "unreasonably large");
  require(is_probability(stokes_det_eff), "photon.stokes_det_eff", "must lie in [0, 1]");
  require(is_probability(antistokes_det_eff), "photon.antistokes_det_eff", "must lie in [0, 1]");
  require(is_probability(retrieval_eff), "photon.retrieval_eff", "must lie in [0, 1]");
  require(is_probability(dark_prob_s), "photon.dark_prob_s", "must lie in [0, 1]");
  require(is_probability(dark_prob_as), "photon.dark_prob_as", "must lie in [0, 1]");
  require(std::isfinite(field_rms_mg) && field_rms_mg >= 0, "dephasing.field_rms_mg", "must be >= 0");
  if (sigma_v_mm_s) require(std::isfinite(*sigma_v_mm_s) && *sigma_v_mm_s >= 0, "dephasing.sigma_v_mm_s", "must be >= 0");
  if (delta_k_per_mm) {
    require(std::isfinite(*delta_k_per_mm) && *delta_k_per_mm >= 0, "dephasing.delta_k_per_mm", "must be >= 0");
  }
  require(!delays_us.empty(), "plan.delays_us", "must be non-empty");
  for (double d : delays_us) require(std::isfinite(d) && d >= 0, "plan.delays_us", "each delay must be >= 0");
  require(trials_per_delay >= 1, "plan.trials_per_delay", "must be >= 1");
  require(atoms_per_excitation >= 1, "plan.atoms_per_excitation", "must be >= 1");
  require(std::isfinite(significance) && significance >= 0, "analysis.significance", "must be >= 0");
  require(!output_dir.empty(), "output.dir", "must be non-empty");
}

RunConfig parse_config(std::istream& in) {
  std::map<std::string, const KeySpec*, std::less<>> lookup;
  for (const auto& k : key_table()) lookup[std::string(k.section) + "." + k.name] = &k;

  RunConfig cfg;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  std::optional<double> start, stop, step;
  bool have_list = false;

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    std::string_view v = trim(line);
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = trim(v.substr(0, hash));
    if (v.empty()) continue;
    if (v.front() == '[') {
      if (v.back() != ']') throw FormatError(line_no, "malformed section header");
      section = std::string(trim(v.substr(1, v.size() - 2)));
      continue;
    }
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) throw FormatError(line_no, "expected key = value");
    const std::string key = std::string(trim(v.substr(0, eq)));
    const std::string_view value = trim(v.substr(eq + 1));
    const std::string full = section + "." + key;

    if (full == "plan.delay_start_us" || full == "plan.delay_stop_us" || full == "plan.delay_step_us") {
      const double x = parse_field<double>(value, line_no, full);
      (full == "plan.delay_start_us" ? start : full == "plan.delay_stop_us" ? stop : step) = x;
      continue;
    }
    const auto it = lookup.find(full);
    if (it == lookup.end()) throw ValidationError(full, "unknown configuration key (line " + std::to_string(line_no) + ")");
    it->second->set(cfg, value, line_no);
    if (full == "plan.delays_us") have_list = true;
  }

  if (start || stop || step) {
    if (have_list) throw ValidationError("plan.delays_us", "give either a delay list or start/stop/step, not both");
    if (!(start && stop && step)) {
      throw ValidationError("plan.delay_step_us", "delay_start_us, delay_stop_us and delay_step_us go together");
    }
    if (!(*step > 0) || *stop < *start) throw ValidationError("plan.delay_step_us", "need step > 0 and stop >= start");
    cfg.delays_us.clear();
    const auto n = static_cast<long long>(std::floor((*stop - *start) / *step + 1e-9));
    for (long long i = 0; i <= n; ++i) cfg.delays_us.push_back(*start + static_cast<double>(i) * *step);
  }
  return cfg;
}

RunConfig parse_config_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("--config", "cannot open '" + path + "'");
  return parse_config(in);
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : key_table()) {
    const auto value = k.get(cfg);
    if (!value) continue;
    if (section != k.section) {
      if (!section.empty()) out += '\n';
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += std::string(k.name) + " = " + *value + "\n";
  }
  return out;
}

DerivedQuantities derive_quantities(const RunConfig& cfg, const Constants& consts) {
  cfg.validate(consts);
  DerivedQuantities d{};
  const auto trap = cfg.to_trap();
  const auto ens = cfg.to_ensemble();
  d.trap = derive_trap(trap, consts);
  d.radii = cloud_radii(ens, {d.trap.radial_freq, d.trap.axial_freq}, consts);
  d.peak_density = peak_density(ens, d.radii);

  d.sigma_v_overridden = cfg.sigma_v_mm_s.has_value();
  d.delta_k_overridden = cfg.delta_k_per_mm.has_value();
  d.sigma_v = d.sigma_v_overridden ? *cfg.sigma_v_mm_s * 1e-3 : thermal_velocity(ens.temperature, consts);
  d.delta_k = d.delta_k_overridden ? *cfg.delta_k_per_mm * 1e3 : momentum_transfer(cfg.to_geometry(), consts);
  d.field_rms = cfg.field_rms_mg * 1e-7;

  const double inf = std::numeric_limits<double>::infinity();
  d.tau_thermal = (d.sigma_v > 0 && d.delta_k > 0) ? thermal_dephasing_time(d.sigma_v, d.delta_k) : inf;
  d.tau_field = field_dephasing_time(d.field_rms, TransitionClass::non_clock(consts), consts);
  const double rate_sq = 1.0 / (d.tau_thermal * d.tau_thermal) + 1.0 / (d.tau_field * d.tau_field);
  d.predicted_tau_nc = rate_sq > 0 ? 1.0 / std::sqrt(rate_sq) : inf;
  d.predicted_tau_c = d.tau_thermal;
  return d;
}

DephasingModel make_dephasing_model(const RunConfig& cfg, const DerivedQuantities& derived, const Constants& consts) {
  DephasingModel m;
  m.delta_k = derived.delta_k;
  m.sigma_v = derived.sigma_v;
  m.field_rms = derived.field_rms;
  m.classes = {{TransitionClass::clock(), cfg.population_m_minus1},
               {TransitionClass::non_clock(consts), cfg.population_m0}};
  return m;
}

SimModels make_models(const RunConfig& cfg, const DerivedQuantities& derived, const Constants& consts) {
  SimModels models;
  models.consts = consts;
  models.dephasing = make_dephasing_model(cfg, derived, consts);
  models.photon.mean_excitation = {3.0 * cfg.chi * cfg.population_m_minus1, 3.0 * cfg.chi * cfg.population_m0};
  models.photon.stokes_det_eff = cfg.stokes_det_eff;
  models.photon.antistokes_det_eff = cfg.antistokes_det_eff;
  models.photon.retrieval_eff = cfg.retrieval_eff;
  models.photon.dark_prob_s = cfg.dark_prob_s;
  models.photon.dark_prob_as = cfg.dark_prob_as;
  return models;
}

}  // namespace dlcz
