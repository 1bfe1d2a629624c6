#include "dlcz/photostats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <string>

#include "dlcz/errors.hpp"
#include "dlcz/text_io.hpp"

namespace dlcz {

std::int64_t delay_key(double delay) { return std::llround(delay * 1e9); }

ClickCounts count_clicks(std::span<const TrialRecord> events) {
  ClickCounts c;
  c.n_trials = events.size();
  for (const auto& r : events) {
    c.n_stokes += r.stokes_click;
    c.n_antistokes += r.antistokes_click;
    c.n_coinc += r.stokes_click && r.antistokes_click;
  }
  return c;
}

CorrelationPoint cross_correlation(const ClickCounts& counts, double delay) {
  if (counts.n_trials == 0 || counts.n_stokes == 0 || counts.n_antistokes == 0) {
    throw UndefinedEstimateError(counts.n_trials, counts.n_stokes, counts.n_antistokes, counts.n_coinc);
  }
  const double n = static_cast<double>(counts.n_trials);
  const double p_s = counts.n_stokes / n;
  const double p_as = counts.n_antistokes / n;
  const double p11 = counts.n_coinc / n;
  const double p10 = p_s - p11;
  const double p01 = p_as - p11;

  CorrelationPoint pt;
  pt.delay = delay;
  pt.n_trials = counts.n_trials;
  pt.p_s = p_s;
  pt.p_as = p_as;
  pt.p_sas = p11;
  pt.g_value = static_cast<double>(counts.n_coinc) * n /
               (static_cast<double>(counts.n_stokes) * static_cast<double>(counts.n_antistokes));

  // Gradient of p11 / (p_s p_as) over (p11, p10, p01); the p00 component is zero.
  const double g = pt.g_value;
  const double d11 = 1.0 / (p_s * p_as) - g / p_s - g / p_as;
  const double d10 = -g / p_s;
  const double d01 = -g / p_as;
  const double mean = p11 * d11 + p10 * d10 + p01 * d01;
  const double second = p11 * d11 * d11 + p10 * d10 * d10 + p01 * d01 * d01;
  pt.std_error = std::sqrt(std::max(0.0, second - mean * mean) / n);
  return pt;
}

CorrelationPoint cross_correlation(std::span<const TrialRecord> events) {
  if (events.empty()) throw UndefinedEstimateError(0, 0, 0, 0);
  const auto key = delay_key(events.front().delay);
  for (const auto& r : events) {
    if (delay_key(r.delay) != key) throw ValidationError("events", "records span more than one delay");
  }
  return cross_correlation(count_clicks(events), static_cast<double>(key) * 1e-9);
}

double bootstrap_std_error(const ClickCounts& counts, std::uint32_t resamples, std::uint64_t seed) {
  if (counts.n_trials == 0) throw UndefinedEstimateError(0, 0, 0, 0);
  const double n = static_cast<double>(counts.n_trials);
  const std::uint64_t c11 = counts.n_coinc;
  const std::uint64_t c10 = counts.n_stokes - c11;
  const std::uint64_t c01 = counts.n_antistokes - c11;

  Rng rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t used = 0;
  for (std::uint32_t b = 0; b < resamples; ++b) {
    // Multinomial draw as a chain of conditional binomials.
    std::uint64_t left = counts.n_trials;
    double mass = 1.0;
    auto take = [&](std::uint64_t count) {
      const double p = std::clamp(static_cast<double>(count) / n / mass, 0.0, 1.0);
      const std::uint64_t k = left == 0 ? 0 : std::binomial_distribution<std::uint64_t>(left, p)(rng);
      left -= k;
      mass -= static_cast<double>(count) / n;
      return k;
    };
    const auto k11 = take(c11);
    const auto k10 = take(c10);
    const auto k01 = take(c01);
    const std::uint64_t ks = k11 + k10;
    const std::uint64_t kas = k11 + k01;
    if (ks == 0 || kas == 0) continue;
    const double g = static_cast<double>(k11) * n / (static_cast<double>(ks) * static_cast<double>(kas));
    sum += g;
    sum_sq += g * g;
    ++used;
  }
  if (used < 2) throw UndefinedEstimateError(counts.n_trials, counts.n_stokes, counts.n_antistokes, counts.n_coinc);
  const double m = sum / used;
  return std::sqrt(std::max(0.0, (sum_sq - used * m * m) / (used - 1.0)));
}

AutoCorrelation auto_correlation(std::span<const std::uint32_t> photon_numbers) {
  const double n = static_cast<double>(photon_numbers.size());
  double s1 = 0.0;   // sum n
  double s2 = 0.0;   // sum n(n-1)
  double s11 = 0.0;  // sum n^2
  double s22 = 0.0;  // sum (n(n-1))^2
  double s12 = 0.0;  // sum n * n(n-1)
  for (std::uint32_t k : photon_numbers) {
    const double x = k;
    const double f = x * (x - 1.0);
    s1 += x;
    s2 += f;
    s11 += x * x;
    s22 += f * f;
    s12 += x * f;
  }
  if (s1 == 0.0) throw UnsupportedInputError("auto-correlation undefined: no photons recorded");
  const double m1 = s1 / n;
  const double m2 = s2 / n;
  const double var1 = s11 / n - m1 * m1;
  const double var2 = s22 / n - m2 * m2;
  const double cov = s12 / n - m1 * m2;

  AutoCorrelation out;
  out.n_trials = photon_numbers.size();
  out.value = m2 / (m1 * m1);
  const double da = 1.0 / (m1 * m1);       // d g / d m2
  const double db = -2.0 * m2 / (m1 * m1 * m1);  // d g / d m1
  out.std_error = std::sqrt(std::max(0.0, da * da * var2 + db * db * var1 + 2.0 * da * db * cov) / n);
  return out;
}

AutoCorrelation auto_correlation(std::span<const TrialRecord> events, Field field) {
  std::vector<std::uint32_t> numbers;
  numbers.reserve(events.size());
  for (const auto& r : events) {
    if (!r.photons) {
      throw UnsupportedInputError("record " + std::to_string(r.trial_index) +
                                  " carries no photon-number information; auto-correlation needs the side channel");
    }
    numbers.push_back(field == Field::stokes ? r.photons->stokes : r.photons->antistokes);
  }
  return auto_correlation(numbers);
}

CauchySchwarzResult cauchy_schwarz(const CorrelationPoint& cross, double g_ss, double g_asas,
                                   double required_significance) {
  if (!(std::isfinite(g_ss) && g_ss > 0 && std::isfinite(g_asas) && g_asas > 0)) {
    throw ValidationError("auto-correlations", "must be finite and positive");
  }
  if (!(std::isfinite(cross.g_value) && std::isfinite(cross.std_error) && cross.std_error >= 0)) {
    throw ValidationError("cross-correlation", "must be finite");
  }
  const double bound = std::sqrt(g_ss * g_asas);
  const double excess = cross.g_value - bound;
  CauchySchwarzResult out;
  out.ratio = cross.g_value * cross.g_value / (g_ss * g_asas);
  if (cross.std_error > 0) {
    out.significance = excess / cross.std_error;
  } else {
    out.significance = excess > 0 ? HUGE_VAL : (excess < 0 ? -HUGE_VAL : 0.0);
  }
  out.violated = out.significance > required_significance;
  return out;
}

std::vector<CorrelationPoint> correlation_sweep(std::span<const TrialRecord> events) {
  std::vector<std::uint64_t> indices;
  indices.reserve(events.size());
  for (const auto& r : events) indices.push_back(r.trial_index);
  std::sort(indices.begin(), indices.end());
  const auto dup = std::adjacent_find(indices.begin(), indices.end());
  if (dup != indices.end()) {
    std::size_t pos = 0;
    while (events[pos].trial_index != *dup) ++pos;
    std::size_t second = pos + 1;
    while (events[second].trial_index != *dup) ++second;
    // +2: header line, then 1-based rows.
    throw FormatError(second + 2, "duplicate trial_index " + std::to_string(*dup));
  }

  std::map<std::int64_t, ClickCounts> groups;
  for (const auto& r : events) {
    auto& c = groups[delay_key(r.delay)];
    ++c.n_trials;
    c.n_stokes += r.stokes_click;
    c.n_antistokes += r.antistokes_click;
    c.n_coinc += r.stokes_click && r.antistokes_click;
  }
  std::vector<CorrelationPoint> out;
  out.reserve(groups.size());
  for (const auto& [key, counts] : groups) out.push_back(cross_correlation(counts, static_cast<double>(key) * 1e-9));
  return out;
}

void write_correlation_table(std::ostream& out, std::span<const CorrelationPoint> points) {
  out << "delay_us,g,std_err,n_trials,p_s,p_as,p_sas\n";
  char buf[256];
  for (const auto& p : points) {
    const int len = std::snprintf(buf, sizeof buf, "%.6f,%.17g,%.17g,%llu,%.17g,%.17g,%.17g\n", p.delay * 1e6,
                                  p.g_value, p.std_error, static_cast<unsigned long long>(p.n_trials), p.p_s, p.p_as,
                                  p.p_sas);
    out.write(buf, len);
  }
}

std::vector<CorrelationPoint> read_correlation_table(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw FormatError(1, "missing header");
  strip_cr(line);
  if (line != "delay_us,g,std_err,n_trials,p_s,p_as,p_sas") {
    throw FormatError(1, "unexpected header '" + line + "'");
  }
  std::vector<CorrelationPoint> points;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 7) throw FormatError(line_no, "expected 7 fields, got " + std::to_string(f.size()));
    CorrelationPoint p;
    p.delay = parse_field<double>(f[0], line_no, "delay_us") * 1e-6;
    p.g_value = parse_field<double>(f[1], line_no, "g");
    p.std_error = parse_field<double>(f[2], line_no, "std_err");
    p.n_trials = parse_field<std::uint64_t>(f[3], line_no, "n_trials");
    p.p_s = parse_field<double>(f[4], line_no, "p_s");
    p.p_as = parse_field<double>(f[5], line_no, "p_as");
    p.p_sas = parse_field<double>(f[6], line_no, "p_sas");
    points.push_back(p);
  }
  return points;
}

}  // namespace dlcz
