#include "dlcz/ensemble_mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <new>
#include <ostream>
#include <string>
#include <thread>

#include "dlcz/errors.hpp"
#include "dlcz/text_io.hpp"

namespace dlcz {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool draw(Rng& rng, double p) { return std::generate_canonical<double, 53>(rng) < p; }

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

constexpr std::size_t envelope_chunk = 4096;

}  // namespace

Rng trial_stream(std::uint64_t seed, std::uint64_t trial_index) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(trial_index + 0x632be59bd9b4e019ULL)));
}

unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void PhotonModel::validate() const {
  for (double chi : mean_excitation) {
    if (!(std::isfinite(chi) && chi >= 0)) throw ValidationError("photon.mean_excitation", "must be >= 0");
  }
  if (!is_probability(stokes_det_eff)) throw ValidationError("photon.stokes_det_eff", "must lie in [0, 1]");
  if (!is_probability(antistokes_det_eff)) throw ValidationError("photon.antistokes_det_eff", "must lie in [0, 1]");
  if (!is_probability(retrieval_eff)) throw ValidationError("photon.retrieval_eff", "must lie in [0, 1]");
  if (!is_probability(dark_prob_s)) throw ValidationError("photon.dark_prob_s", "must lie in [0, 1]");
  if (!is_probability(dark_prob_as)) throw ValidationError("photon.dark_prob_as", "must lie in [0, 1]");
}

void SimPlan::validate() const {
  if (delays.empty()) throw ValidationError("plan.delays", "must be non-empty");
  for (double d : delays) {
    if (!(std::isfinite(d) && d >= 0)) throw ValidationError("plan.delays", "each delay must be >= 0");
  }
  if (trials_per_delay < 1) throw ValidationError("plan.trials_per_delay", "must be >= 1");
  if (atoms_per_excitation < 1) throw ValidationError("plan.atoms_per_excitation", "must be >= 1");
}

void SimModels::validate() const {
  consts.validate();
  photon.validate();
  dephasing.validate();
  if (photon.mean_excitation.size() != dephasing.classes.size()) {
    throw ValidationError("photon.mean_excitation", "needs one entry per transition class");
  }
}

std::vector<std::uint32_t> sample_excitations(const PhotonModel& photon, Rng& rng) {
  std::vector<std::uint32_t> counts(photon.mean_excitation.size(), 0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double chi = photon.mean_excitation[i];
    if (chi <= 0.0) continue;
    std::geometric_distribution<std::uint32_t> dist(1.0 / (1.0 + chi));
    counts[i] = dist(rng);
  }
  return counts;
}

CollectiveExcitation build_excitation(const TransitionClass& cls, const DephasingModel& model, std::uint32_t atoms,
                                      Rng& rng, const Constants& consts) {
  if (atoms < 1) throw ValidationError("atoms_per_excitation", "must be >= 1");
  CollectiveExcitation exc{cls, std::vector<PhaseRates>(atoms, PhaseRates{0.0, 0.0})};

  if (model.sigma_v > 0 && model.delta_k > 0) {
    std::normal_distribution<double> velocity(0.0, model.sigma_v);
    for (auto& a : exc.atoms) a.velocity = model.delta_k * velocity(rng);
  }
  if (cls.differential_zeeman_slope != 0.0 && model.field_rms > 0) {
    std::normal_distribution<double> field(0.0, model.field_rms);
    const double scale = cls.differential_zeeman_slope / consts.reduced_planck;
    for (auto& a : exc.atoms) a.field = scale * field(rng);
  }
  return exc;
}

double collective_overlap(const CollectiveExcitation& exc, double t) {
  const auto m = exc.atoms.size();
  if (m == 0) throw ValidationError("excitation", "needs at least one atom");
  if (t < 0) throw ValidationError("t", "must be >= 0");
  if (m == 1 || t == 0.0) return 1.0;

  double re = 0.0;
  double im = 0.0;
  for (const auto& a : exc.atoms) {
    const double phase = (a.velocity + a.field) * t;
    re += std::cos(phase);
    im += std::sin(phase);
  }
  const double md = static_cast<double>(m);
  const double sq = (re * re + im * im) / (md * md);
  return (sq - 1.0 / md) * md / (md - 1.0);
}

double retrieval_probability(const CollectiveExcitation& exc, double t, const PhotonModel& photon) {
  return photon.retrieval_eff * collective_overlap(exc, t);
}

TrialRecord run_trial(const SimModels& models, std::uint32_t atoms_per_excitation, double delay,
                      std::uint64_t trial_index, Rng& rng) {
  const auto& photon = models.photon;
  TrialRecord rec;
  rec.trial_index = trial_index;
  rec.delay = delay;

  PhotonNumbers numbers;
  const auto counts = sample_excitations(photon, rng);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::uint32_t n = 0; n < counts[c]; ++n) {
      if (draw(rng, photon.stokes_det_eff)) ++numbers.stokes;
      const auto exc =
          build_excitation(models.dephasing.classes[c].cls, models.dephasing, atoms_per_excitation, rng, models.consts);
      const double p_read = photon.antistokes_det_eff * retrieval_probability(exc, delay, photon);
      if (draw(rng, p_read)) ++numbers.antistokes;
    }
  }
  const bool dark_s = draw(rng, photon.dark_prob_s);
  const bool dark_as = draw(rng, photon.dark_prob_as);

  rec.stokes_click = dark_s || numbers.stokes > 0;
  rec.antistokes_click = dark_as || numbers.antistokes > 0;
  rec.photons = numbers;
  return rec;
}

EventSet run_plan(const SimPlan& plan, const SimModels& models) {
  plan.validate();
  models.validate();

  const std::uint64_t n_delays = plan.delays.size();
  if (plan.trials_per_delay > std::numeric_limits<std::size_t>::max() / n_delays / sizeof(TrialRecord)) {
    throw ValidationError("plan", "trial count overflows addressable memory (delays=" + std::to_string(n_delays) +
                                      ", trials_per_delay=" + std::to_string(plan.trials_per_delay) + ")");
  }
  const std::uint64_t total = n_delays * plan.trials_per_delay;

  EventSet events;
  try {
    events.resize(total);
  } catch (const std::bad_alloc&) {
    throw ValidationError("plan", "cannot allocate " + std::to_string(total) + " trial records (delays=" +
                                      std::to_string(n_delays) +
                                      ", trials_per_delay=" + std::to_string(plan.trials_per_delay) + ")");
  }

  auto work = [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t i = begin; i < end; ++i) {
      const double delay = plan.delays[i / plan.trials_per_delay];
      auto rng = trial_stream(plan.rng_seed, i);
      events[i] = run_trial(models, plan.atoms_per_excitation, delay, i, rng);
    }
  };

  const unsigned threads = static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(plan.threads), total));
  if (threads <= 1) {
    work(0, total);
  } else {
    std::vector<std::jthread> pool;
    const std::uint64_t per = (total + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::uint64_t begin = t * per;
      const std::uint64_t end = std::min(total, begin + per);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  return events;
}

std::vector<EnvelopeEstimate> monte_carlo_envelope(const DephasingModel& model, std::span<const double> delays,
                                                   std::uint64_t trials, std::uint32_t atoms, std::uint64_t seed,
                                                   unsigned threads, const Constants& consts) {
  model.validate();
  if (trials < 2) throw ValidationError("trials", "must be >= 2");
  std::vector<double> cumulative;
  double total_weight = 0.0;
  for (const auto& wc : model.classes) cumulative.push_back(total_weight += wc.weight);
  if (!(total_weight > 0)) throw ValidationError("dephasing.classes", "need a class with positive weight");

  const std::size_t nd = delays.size();
  const std::size_t n_chunks = static_cast<std::size_t>((trials + envelope_chunk - 1) / envelope_chunk);
  // Per-chunk partial sums, reduced in chunk order so the result does not
  // depend on the number of threads.
  std::vector<double> sums(n_chunks * nd, 0.0);
  std::vector<double> sums_sq(n_chunks * nd, 0.0);

  auto work = [&](std::size_t chunk_begin, std::size_t chunk_end) {
    for (std::size_t chunk = chunk_begin; chunk < chunk_end; ++chunk) {
      const std::uint64_t begin = chunk * envelope_chunk;
      const std::uint64_t end = std::min<std::uint64_t>(trials, begin + envelope_chunk);
      for (std::uint64_t i = begin; i < end; ++i) {
        auto rng = trial_stream(seed, i);
        const double u = std::generate_canonical<double, 53>(rng) * total_weight;
        const auto pick = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const auto& cls = model.classes[std::min(pick, model.classes.size() - 1)].cls;
        const auto exc = build_excitation(cls, model, atoms, rng, consts);
        for (std::size_t d = 0; d < nd; ++d) {
          const double x = collective_overlap(exc, delays[d]);
          sums[chunk * nd + d] += x;
          sums_sq[chunk * nd + d] += x * x;
        }
      }
    }
  };

  const unsigned nthreads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n_chunks));
  if (nthreads <= 1) {
    work(0, n_chunks);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t per = (n_chunks + nthreads - 1) / nthreads;
    for (unsigned t = 0; t < nthreads; ++t) {
      const std::size_t begin = t * per;
      const std::size_t end = std::min(n_chunks, begin + per);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }

  std::vector<EnvelopeEstimate> out;
  const double n = static_cast<double>(trials);
  for (std::size_t d = 0; d < nd; ++d) {
    double s = 0.0;
    double ss = 0.0;
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
      s += sums[chunk * nd + d];
      ss += sums_sq[chunk * nd + d];
    }
    const double mean = s / n;
    const double var = std::max(0.0, (ss - n * mean * mean) / (n - 1.0));
    out.push_back({delays[d], mean, std::sqrt(var / n)});
  }
  return out;
}

void write_event_set(std::ostream& out, const EventSet& events, bool with_photon_numbers) {
  out << "trial_index,delay_us,stokes,antistokes";
  if (with_photon_numbers) out << ",stokes_n,antistokes_n";
  out << '\n';
  char buf[160];
  for (const auto& r : events) {
    int len = std::snprintf(buf, sizeof buf, "%llu,%.6f,%d,%d", static_cast<unsigned long long>(r.trial_index),
                            r.delay * 1e6, r.stokes_click ? 1 : 0, r.antistokes_click ? 1 : 0);
    out.write(buf, len);
    if (with_photon_numbers) {
      if (!r.photons) throw UnsupportedInputError("record " + std::to_string(r.trial_index) + " has no photon numbers");
      len = std::snprintf(buf, sizeof buf, ",%u,%u", r.photons->stokes, r.photons->antistokes);
      out.write(buf, len);
    }
    out << '\n';
  }
}

EventSet read_event_set(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw FormatError(1, "missing header");
  ++line_no;
  strip_cr(line);
  bool with_numbers = false;
  if (line == "trial_index,delay_us,stokes,antistokes,stokes_n,antistokes_n") {
    with_numbers = true;
  } else if (line != "trial_index,delay_us,stokes,antistokes") {
    throw FormatError(line_no, "unexpected header '" + line + "'");
  }
  const std::size_t expected = with_numbers ? 6 : 4;

  EventSet events;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != expected) {
      throw FormatError(line_no, "expected " + std::to_string(expected) + " fields, got " +
                                     std::to_string(fields.size()));
    }
    TrialRecord r;
    r.trial_index = parse_field<std::uint64_t>(fields[0], line_no, "trial_index");
    const double delay_us = parse_field<double>(fields[1], line_no, "delay_us");
    if (!(delay_us >= 0)) throw FormatError(line_no, "delay_us must be >= 0");
    r.delay = delay_us * 1e-6;
    r.stokes_click = parse_flag(fields[2], line_no, "stokes");
    r.antistokes_click = parse_flag(fields[3], line_no, "antistokes");
    if (with_numbers) {
      r.photons = PhotonNumbers{parse_field<std::uint32_t>(fields[4], line_no, "stokes_n"),
                                parse_field<std::uint32_t>(fields[5], line_no, "antistokes_n")};
    }
    events.push_back(r);
  }
  return events;
}

}  // namespace dlcz
