#pragma once

// The memctl verbs as library calls. Each writes only into the run's output
// directory and reports progress on the given stream.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dlcz/config.hpp"
#include "dlcz/decayfit.hpp"
#include "dlcz/photostats.hpp"

namespace dlcz {

inline constexpr const char* kToolVersion = "0.1.0";

// Output file names inside RunConfig::output_dir.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kEventsFile = "events.csv";
inline constexpr const char* kCorrelationsFile = "correlations.csv";
inline constexpr const char* kCauchySchwarzFile = "cauchy_schwarz.csv";
inline constexpr const char* kFitReportFile = "fit_report.csv";
inline constexpr const char* kModelCurveFile = "model_curve.csv";
inline constexpr const char* kPlotFile = "decay_plot.csv";

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

// Auto-correlations for the Cauchy-Schwarz bound are the thermal value 2
// unless every record carries photon numbers, in which case they are
// measured (g_ss over the whole set, g_asas per delay).
struct AnalyzeOutput {
  std::vector<CorrelationPoint> points;
  std::vector<double> g_ss;
  std::vector<double> g_asas;
  std::vector<CauchySchwarzResult> cauchy_schwarz;
};

// When the two-time fit is degenerate (the data hold one Gaussian) the
// diagnostic is kept and a single-time fit takes its place.
struct FitOutput {
  DecayFitResult fit;
  int components = 2;
  std::string diagnostic;
  std::optional<PhysicsEstimate> physics;  // empty when tau_nc >= tau_c
};

DerivedQuantities cmd_derive(const RunConfig& cfg, std::ostream& log);
EventSet cmd_simulate(const RunConfig& cfg, std::ostream& log);
AnalyzeOutput cmd_analyze(const std::filesystem::path& events_path, const RunConfig& cfg, std::ostream& log);
FitOutput cmd_fit(const std::filesystem::path& results_path, const RunConfig& cfg, std::ostream& log);
FitOutput cmd_pipeline(const RunConfig& cfg, std::ostream& log);

// In-memory stages shared by the verbs and the pipeline.
AnalyzeOutput analyze_events(const EventSet& events, const RunConfig& cfg);
FitOutput fit_points(const std::vector<CorrelationPoint>& points, const RunConfig& cfg);

}  // namespace dlcz
