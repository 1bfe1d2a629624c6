#include "dlcz/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>

#include <json.hpp>

#include "dlcz/errors.hpp"

namespace dlcz {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path prepare_output_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  body(out);
  out.flush();
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json derived_json(const DerivedQuantities& d) {
  json j;
  j["trap_depth_uK"] = d.trap.depth * 1e6;
  j["radial_freq_hz"] = d.trap.radial_freq / two_pi;
  j["axial_freq_hz"] = d.trap.axial_freq / two_pi;
  j["scattering_rate_per_s"] = d.trap.scattering_rate;
  j["rayleigh_range_mm"] = d.trap.rayleigh_range * 1e3;
  j["sigma_r_um"] = d.radii.sigma_r * 1e6;
  j["sigma_z_mm"] = d.radii.sigma_z * 1e3;
  j["peak_density_per_cm3"] = d.peak_density * 1e-6;
  j["sigma_v_mm_s"] = d.sigma_v * 1e3;
  j["delta_k_per_mm"] = d.delta_k * 1e-3;
  j["field_rms_mG"] = d.field_rms * 1e7;
  j["tau_thermal_us"] = d.tau_thermal * 1e6;
  j["tau_field_us"] = std::isfinite(d.tau_field) ? json(d.tau_field * 1e6) : json(nullptr);
  j["predicted_tau_nc_us"] = d.predicted_tau_nc * 1e6;
  j["predicted_tau_c_us"] = d.predicted_tau_c * 1e6;
  j["overrides"] = {{"sigma_v", d.sigma_v_overridden}, {"delta_k", d.delta_k_overridden}};
  return j;
}

// One manifest per invocation: enough to rerun the command and compare
// checksums of everything it wrote.
void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const DerivedQuantities& derived, const std::map<std::string, fs::path>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "memctl";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["created_utc"] = utc_timestamp();
  m["seed"] = cfg.seed;
  m["threads"] = resolve_threads(cfg.threads);
  m["config"] = serialize_config(cfg);
  m["derived"] = derived_json(derived);
  json in = json::object();
  for (const auto& [name, path] : inputs) in[name] = {{"path", path.string()}, {"fnv1a64", file_checksum(path)}};
  m["inputs"] = in;
  json out = json::object();
  for (const auto& name : outputs) out[name] = file_checksum(dir / name);
  m["outputs"] = out;
  write_file(dir / kManifestFile, [&](std::ostream& os) { os << m.dump(2) << '\n'; });
}

void print_derived(const DerivedQuantities& d, std::ostream& log) {
  struct Row {
    const char* name;
    double value;
    const char* unit;
    const char* reference;
  };
  const Row rows[] = {
      {"trap depth", d.trap.depth * 1e6, "uK", "500"},
      {"radial frequency / 2pi", d.trap.radial_freq / two_pi, "Hz", "2000"},
      {"axial frequency / 2pi", d.trap.axial_freq / two_pi, "Hz", "10"},
      {"scattering rate", d.trap.scattering_rate, "1/s", "4"},
      {"cloud radius sigma_r", d.radii.sigma_r * 1e6, "um", "5.5"},
      {"cloud length sigma_z", d.radii.sigma_z * 1e3, "mm", "0.85"},
      {"peak density", d.peak_density * 1e-6, "1/cm^3", "1e12"},
      {"sigma_v", d.sigma_v * 1e3, "mm/s", "66"},
      {"|delta k|", d.delta_k * 1e-3, "1/mm", "290"},
      {"tau_thermal", d.tau_thermal * 1e6, "us", "53"},
      {"field rms", d.field_rms * 1e7, "mG", "-"},
      {"tau_field (non-clock)", d.tau_field * 1e6, "us", "-"},
      {"predicted tau_nc", d.predicted_tau_nc * 1e6, "us", "16"},
      {"predicted tau_c", d.predicted_tau_c * 1e6, "us", "45"},
  };
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %14s  %-7s %s\n", "quantity", "value", "unit", "reference");
  log << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-24s %14.6g  %-7s %s\n", r.name, r.value, r.unit, r.reference);
    log << buf;
  }
  if (d.sigma_v_overridden) log << "note: sigma_v taken from [dephasing] sigma_v_mm_s\n";
  if (d.delta_k_overridden) log << "note: |delta k| taken from [dephasing] delta_k_per_mm\n";
}

void write_analysis(const fs::path& dir, const AnalyzeOutput& a) {
  write_file(dir / kCorrelationsFile, [&](std::ostream& os) { write_correlation_table(os, a.points); });
  write_file(dir / kCauchySchwarzFile, [&](std::ostream& os) {
    os << "delay_us,g_ss,g_asas,ratio,significance,violated\n";
    char buf[200];
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      const auto& cs = a.cauchy_schwarz[i];
      const int len = std::snprintf(buf, sizeof buf, "%.6f,%.17g,%.17g,%.17g,%.17g,%d\n", a.points[i].delay * 1e6,
                                    a.g_ss[i], a.g_asas[i], cs.ratio, cs.significance, cs.violated ? 1 : 0);
      os.write(buf, len);
    }
  });
}

void log_analysis(const AnalyzeOutput& a, double significance, std::ostream& log) {
  std::size_t violated = 0;
  for (const auto& cs : a.cauchy_schwarz) violated += cs.violated;
  log << "analyzed " << a.points.size() << " delays; Cauchy-Schwarz violated at " << violated << " (threshold "
      << significance << " sigma)\n";
}

// Delta-method errors for the derived physics, from the (tau_nc, tau_c) block.
struct PhysicsErrors {
  double field_rms = kNaN;
  double implied_velocity = kNaN;
  double tau_field = kNaN;
};

PhysicsErrors physics_errors(const DecayFitResult& fit, const PhysicsEstimate& ph) {
  const double a = fit.params.tau_nc;
  const double b = fit.params.tau_c;
  const double s2 = 1.0 / (a * a) - 1.0 / (b * b);
  const double c_aa = fit.covariance(kTauNc, kTauNc);
  const double c_bb = fit.covariance(kTauC, kTauC);
  const double c_ab = fit.covariance(kTauNc, kTauC);
  auto spread = [&](double da, double db) {
    return std::sqrt(std::max(0.0, da * da * c_aa + db * db * c_bb + 2.0 * da * db * c_ab));
  };
  PhysicsErrors e;
  // field and 1/tau_field are proportional to sqrt(s2)
  e.field_rms = spread(-ph.field_rms / (a * a * a * s2), ph.field_rms / (b * b * b * s2));
  const double s3 = s2 * std::sqrt(s2);
  e.tau_field = spread(1.0 / (a * a * a * s3), -1.0 / (b * b * b * s3));
  e.implied_velocity = spread(0.0, -ph.implied_velocity / b);
  return e;
}

void write_fit_outputs(const fs::path& dir, const std::vector<CorrelationPoint>& points, const FitOutput& f) {
  const auto& p = f.fit.params;
  const auto se = f.fit.std_errors();
  const auto& cov = f.fit.covariance;
  const double g0_err = std::sqrt(std::max(0.0, cov(kAmpNc, kAmpNc) + cov(kAmpC, kAmpC) + 2.0 * cov(kAmpNc, kAmpC)));
  PhysicsEstimate ph{kNaN, kNaN, kNaN};
  PhysicsErrors pe;
  if (f.physics) {
    ph = *f.physics;
    pe = physics_errors(f.fit, ph);
  }

  write_file(dir / kFitReportFile, [&](std::ostream& os) {
    os << "parameter,value,std_error\n";
    auto row = [&](const char* name, double v, double e) {
      os << name << ',' << fmt("%.17g", v) << ',' << fmt("%.17g", e) << '\n';
    };
    row("amp_nc", p.amp_nc, se[kAmpNc]);
    row("amp_c", p.amp_c, se[kAmpC]);
    row("tau_nc_us", p.tau_nc * 1e6, se[kTauNc] * 1e6);
    row("tau_c_us", p.tau_c * 1e6, se[kTauC] * 1e6);
    row("g0", model_eval(p, 0.0), g0_err);
    row("chi_square", f.fit.chi_square, kNaN);
    row("dof", f.fit.dof, kNaN);
    row("components", f.components, kNaN);
    row("converged", f.fit.converged ? 1.0 : 0.0, kNaN);
    row("iterations", f.fit.iterations, kNaN);
    row("field_rms_mG", ph.field_rms * 1e7, pe.field_rms * 1e7);
    row("implied_velocity_mm_s", ph.implied_velocity * 1e3, pe.implied_velocity * 1e3);
    row("tau_field_us", ph.tau_field * 1e6, pe.tau_field * 1e6);
  });

  double t_max = 0.0;
  for (const auto& pt : points) t_max = std::max(t_max, pt.delay);
  constexpr int kCurvePoints = 201;
  std::vector<double> grid(kCurvePoints);
  for (int i = 0; i < kCurvePoints; ++i) grid[i] = t_max * i / (kCurvePoints - 1);

  write_file(dir / kModelCurveFile, [&](std::ostream& os) {
    os << "t_us,g_model\n";
    for (double t : grid) os << fmt("%.6f", t * 1e6) << ',' << fmt("%.17g", model_eval(p, t)) << '\n';
  });

  // Single-time comparison: the full zero-delay excess decaying at tau_c alone.
  const DecayParams single{0.0, p.amp_nc + p.amp_c, p.tau_c, p.tau_c};
  write_file(dir / kPlotFile, [&](std::ostream& os) {
    os << "series,t_us,g,std_err\n";
    for (const auto& pt : points) {
      os << "measured," << fmt("%.6f", pt.delay * 1e6) << ',' << fmt("%.17g", pt.g_value) << ','
         << fmt("%.17g", pt.std_error) << '\n';
    }
    for (double t : grid) os << "fit," << fmt("%.6f", t * 1e6) << ',' << fmt("%.17g", model_eval(p, t)) << ",\n";
    for (double t : grid) {
      os << "single_tau," << fmt("%.6f", t * 1e6) << ',' << fmt("%.17g", model_eval(single, t)) << ",\n";
    }
    os << "quantum_bound," << fmt("%.6f", 0.0) << ",2,\n";
    os << "quantum_bound," << fmt("%.6f", t_max * 1e6) << ",2,\n";
  });
}

void log_fit(const FitOutput& f, std::ostream& log) {
  const auto se = f.fit.std_errors();
  char buf[200];
  std::snprintf(buf, sizeof buf, "tau_nc = %.2f +- %.2f us, tau_c = %.2f +- %.2f us, g(0) = %.3f, chi2/dof = %.2f/%d\n",
                f.fit.params.tau_nc * 1e6, se[kTauNc] * 1e6, f.fit.params.tau_c * 1e6, se[kTauC] * 1e6,
                model_eval(f.fit.params, 0.0), f.fit.chi_square, f.fit.dof);
  log << buf;
  if (f.components == 1) log << "warning: two-time fit degenerate (" << f.diagnostic << "); fell back to one time\n";
  if (!f.fit.converged) log << "warning: fit did not converge within the iteration limit\n";
  if (f.physics) {
    std::snprintf(buf, sizeof buf, "field rms = %.2f mG, implied velocity = %.1f mm/s\n", f.physics->field_rms * 1e7,
                  f.physics->implied_velocity * 1e3);
    log << buf;
  } else if (f.fit.converged) {
    log << "warning: the two fitted times coincide; no field estimate\n";
  }
}

const std::vector<std::string> kAnalyzeOutputs = {kCorrelationsFile, kCauchySchwarzFile};
const std::vector<std::string> kFitOutputs = {kFitReportFile, kModelCurveFile, kPlotFile};

}  // namespace

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

AnalyzeOutput analyze_events(const EventSet& events, const RunConfig& cfg) {
  AnalyzeOutput a;
  a.points = correlation_sweep(events);
  const bool measured =
      !events.empty() && std::all_of(events.begin(), events.end(), [](const TrialRecord& r) { return r.photons; });

  double g_ss = 2.0;
  std::map<std::int64_t, std::vector<std::uint32_t>> as_numbers;
  if (measured) {
    try {
      g_ss = auto_correlation(events, Field::stokes).value;
    } catch (const UnsupportedInputError&) {
      // no Stokes photons at all: keep the thermal value
    }
    for (const auto& r : events) as_numbers[delay_key(r.delay)].push_back(r.photons->antistokes);
  }
  for (const auto& pt : a.points) {
    double g_asas = 2.0;
    if (measured) {
      try {
        g_asas = auto_correlation(as_numbers[delay_key(pt.delay)]).value;
      } catch (const UnsupportedInputError&) {
      }
    }
    // A zero auto-correlation (at most one photon per trial) leaves no classical bound to test against.
    if (!(g_asas > 0)) g_asas = 2.0;
    if (!(g_ss > 0)) g_ss = 2.0;
    a.g_ss.push_back(g_ss);
    a.g_asas.push_back(g_asas);
    a.cauchy_schwarz.push_back(cauchy_schwarz(pt, g_ss, g_asas, cfg.significance));
  }
  return a;
}

FitOutput fit_points(const std::vector<CorrelationPoint>& points, const RunConfig& cfg) {
  FitOutput f;
  try {
    f.fit = fit_decay(points);
  } catch (const SingularFitError& e) {
    f.diagnostic = e.what();
    f.fit = single_exponent_fit(points, true);
    f.components = 1;
    // tau_nc is tied to tau_c; give it the same row and column.
    auto& cov = f.fit.covariance;
    cov.row(kTauNc) = cov.row(kTauC);
    cov.col(kTauNc) = cov.col(kTauC);
  }
  if (f.fit.converged && f.fit.params.tau_nc < f.fit.params.tau_c) {
    f.physics = extract_physics(f.fit, derive_quantities(cfg).delta_k);
  }
  return f;
}

DerivedQuantities cmd_derive(const RunConfig& cfg, std::ostream& log) {
  const auto derived = derive_quantities(cfg);
  print_derived(derived, log);
  const auto dir = prepare_output_dir(cfg);
  write_manifest(dir, "derive", cfg, derived, {}, {});
  return derived;
}

EventSet cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const auto derived = derive_quantities(cfg);
  const auto models = make_models(cfg, derived);
  const auto plan = cfg.to_plan();
  const auto dir = prepare_output_dir(cfg);
  log << "simulating " << plan.delays.size() << " delays x " << plan.trials_per_delay << " trials on "
      << resolve_threads(plan.threads) << " thread(s)\n";
  auto events = run_plan(plan, models);
  write_file(dir / kEventsFile, [&](std::ostream& os) { write_event_set(os, events, cfg.photon_numbers); });
  write_manifest(dir, "simulate", cfg, derived, {}, {kEventsFile});
  log << "wrote " << events.size() << " records to " << (dir / kEventsFile).string() << '\n';
  return events;
}

AnalyzeOutput cmd_analyze(const fs::path& events_path, const RunConfig& cfg, std::ostream& log) {
  std::ifstream in(events_path, std::ios::binary);
  if (!in) throw ValidationError("events", "cannot open '" + events_path.string() + "'");
  const auto events = read_event_set(in);
  const auto derived = derive_quantities(cfg);
  auto a = analyze_events(events, cfg);
  const auto dir = prepare_output_dir(cfg);
  write_analysis(dir, a);
  write_manifest(dir, "analyze", cfg, derived, {{"events", events_path}}, kAnalyzeOutputs);
  log_analysis(a, cfg.significance, log);
  return a;
}

FitOutput cmd_fit(const fs::path& results_path, const RunConfig& cfg, std::ostream& log) {
  std::ifstream in(results_path, std::ios::binary);
  if (!in) throw ValidationError("results", "cannot open '" + results_path.string() + "'");
  const auto points = read_correlation_table(in);
  const auto derived = derive_quantities(cfg);
  auto f = fit_points(points, cfg);
  const auto dir = prepare_output_dir(cfg);
  write_fit_outputs(dir, points, f);
  write_manifest(dir, "fit", cfg, derived, {{"results", results_path}}, kFitOutputs);
  log_fit(f, log);
  return f;
}

FitOutput cmd_pipeline(const RunConfig& cfg, std::ostream& log) {
  const auto derived = derive_quantities(cfg);
  print_derived(derived, log);
  const auto models = make_models(cfg, derived);
  const auto plan = cfg.to_plan();
  const auto dir = prepare_output_dir(cfg);

  log << "simulating " << plan.delays.size() << " delays x " << plan.trials_per_delay << " trials on "
      << resolve_threads(plan.threads) << " thread(s)\n";
  const auto events = run_plan(plan, models);
  write_file(dir / kEventsFile, [&](std::ostream& os) { write_event_set(os, events, cfg.photon_numbers); });

  const auto a = analyze_events(events, cfg);
  write_analysis(dir, a);
  log_analysis(a, cfg.significance, log);

  auto f = fit_points(a.points, cfg);
  write_fit_outputs(dir, a.points, f);
  log_fit(f, log);

  std::vector<std::string> outputs = {kEventsFile};
  outputs.insert(outputs.end(), kAnalyzeOutputs.begin(), kAnalyzeOutputs.end());
  outputs.insert(outputs.end(), kFitOutputs.begin(), kFitOutputs.end());
  write_manifest(dir, "pipeline", cfg, derived, {}, outputs);
  return f;
}

}  // namespace dlcz
