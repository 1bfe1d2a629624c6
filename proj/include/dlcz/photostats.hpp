#pragma once

// Normalized Stokes / anti-Stokes correlation estimators over trial-gated
// click records, and the Cauchy-Schwarz test for non-classical pairs.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dlcz/ensemble_mc.hpp"

namespace dlcz {

struct ClickCounts {
  std::uint64_t n_trials = 0;
  std::uint64_t n_stokes = 0;
  std::uint64_t n_antistokes = 0;
  std::uint64_t n_coinc = 0;

  ClickCounts& operator+=(const ClickCounts& o) {
    n_trials += o.n_trials;
    n_stokes += o.n_stokes;
    n_antistokes += o.n_antistokes;
    n_coinc += o.n_coinc;
    return *this;
  }
};

struct CorrelationPoint {
  double delay = 0.0;  // s
  double g_value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_trials = 0;
  double p_s = 0.0;
  double p_as = 0.0;
  double p_sas = 0.0;
};

struct CauchySchwarzResult {
  double ratio = 0.0;         // g^2 / (g_ss * g_asas)
  bool violated = false;
  double significance = 0.0;  // standard errors above sqrt(g_ss * g_asas)
};

struct AutoCorrelation {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_trials = 0;
};

enum class Field { stokes, antistokes };

ClickCounts count_clicks(std::span<const TrialRecord> events);

/// g = N_coinc N / (N_S N_AS), with a delta-method standard error treating
/// the four outcome counts as one multinomial draw.
CorrelationPoint cross_correlation(const ClickCounts& counts, double delay);

/// Records must share one delay (after rounding to 1 ns).
CorrelationPoint cross_correlation(std::span<const TrialRecord> events);

/// Nonparametric bootstrap of g over trials, resampling the four outcome
/// counts. Resamples with an undefined estimate are skipped.
double bootstrap_std_error(const ClickCounts& counts, std::uint32_t resamples = 1000, std::uint64_t seed = 1);

/// g_XX = <n(n-1)> / <n>^2 from per-trial photon numbers.
AutoCorrelation auto_correlation(std::span<const std::uint32_t> photon_numbers);

/// Requires the photon-number side channel on every record.
AutoCorrelation auto_correlation(std::span<const TrialRecord> events, Field field);

CauchySchwarzResult cauchy_schwarz(const CorrelationPoint& cross, double g_ss, double g_asas,
                                   double required_significance = 2.0);

/// One point per distinct delay (1 ns grouping), strictly increasing delay.
std::vector<CorrelationPoint> correlation_sweep(std::span<const TrialRecord> events);

std::int64_t delay_key(double delay);

// Results table: `delay_us,g,std_err,n_trials,p_s,p_as,p_sas`.
void write_correlation_table(std::ostream& out, std::span<const CorrelationPoint> points);
std::vector<CorrelationPoint> read_correlation_table(std::istream& in);

}  // namespace dlcz
