#pragma once

// Seeded trial-by-trial simulation of the write / store / read sequence.
//
// Each trial draws thermal excitation numbers per transition class, heralds
// Stokes photons through a lossy detector, stores each excitation as a spin
// wave over M sampled atoms, and retrieves it after the storage delay with a
// probability set by the dephased collective overlap. Every trial owns a
// random stream derived from (seed, trial_index), so results do not depend
// on scheduling or thread count.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "dlcz/dephase.hpp"
#include "dlcz/physcore.hpp"

namespace dlcz {

using Rng = std::mt19937_64;

/// Independent stream for one trial.
Rng trial_stream(std::uint64_t seed, std::uint64_t trial_index);

struct PhotonModel {
  // Mean thermal excitation number, one entry per class of the DephasingModel.
  std::vector<double> mean_excitation;
  double stokes_det_eff = 0.6;
  double antistokes_det_eff = 0.6;  // includes the 80% fibre mode-coupling factor
  double retrieval_eff = 0.85;      // at zero delay
  double dark_prob_s = 1e-4;        // per trial gate
  double dark_prob_as = 0.04;       // per trial gate, read-pulse leakage included

  void validate() const;
};

struct PhaseRates {
  double velocity;  // rad/s, delta_k * v
  double field;     // rad/s, slope * dB / hbar
};

struct CollectiveExcitation {
  TransitionClass cls;
  std::vector<PhaseRates> atoms;
};

struct PhotonNumbers {
  std::uint32_t stokes = 0;      // detected Stokes photons (number-resolved, no darks)
  std::uint32_t antistokes = 0;  // detected anti-Stokes photons

  friend bool operator==(const PhotonNumbers&, const PhotonNumbers&) = default;
};

struct TrialRecord {
  std::uint64_t trial_index = 0;
  double delay = 0.0;  // s
  bool stokes_click = false;
  bool antistokes_click = false;
  std::optional<PhotonNumbers> photons;  // side channel, absent in plain event files

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

using EventSet = std::vector<TrialRecord>;

struct SimPlan {
  std::vector<double> delays;  // s
  std::uint64_t trials_per_delay = 100000;
  std::uint64_t rng_seed = 42;
  std::uint32_t atoms_per_excitation = 256;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
};

struct SimModels {
  PhotonModel photon;
  DephasingModel dephasing;
  Constants consts = rb87();

  void validate() const;
};

/// Thermal excitation number per class, P(n) = chi^n / (1 + chi)^(n + 1).
std::vector<std::uint32_t> sample_excitations(const PhotonModel& photon, Rng& rng);

CollectiveExcitation build_excitation(const TransitionClass& cls, const DephasingModel& model, std::uint32_t atoms,
                                      Rng& rng, const Constants& consts = rb87());

/// Bias-corrected |(1/M) sum_j exp(i phi_j t)|^2, an unbiased estimate of the
/// squared mean phasor. Can dip slightly below zero once the spin wave has
/// dephased to the 1/M floor; M = 1 returns exactly 1.
double collective_overlap(const CollectiveExcitation& exc, double t);

/// retrieval_eff * collective_overlap. The value is used as a Bernoulli
/// probability by run_trial, where anything below zero never fires.
double retrieval_probability(const CollectiveExcitation& exc, double t, const PhotonModel& photon);

TrialRecord run_trial(const SimModels& models, std::uint32_t atoms_per_excitation, double delay,
                      std::uint64_t trial_index, Rng& rng);

EventSet run_plan(const SimPlan& plan, const SimModels& models);

struct EnvelopeEstimate {
  double delay;
  double mean;
  double std_error;
};

/// Monte Carlo mean of collective_overlap at each delay. Each trial draws a
/// class by the model's amplitude weights and evaluates one fresh spin wave at
/// every delay.
std::vector<EnvelopeEstimate> monte_carlo_envelope(const DephasingModel& model, std::span<const double> delays,
                                                   std::uint64_t trials, std::uint32_t atoms, std::uint64_t seed,
                                                   unsigned threads = 0, const Constants& consts = rb87());

// Delimited text: header `trial_index,delay_us,stokes,antistokes`, optionally
// followed by `stokes_n,antistokes_n` when the photon-number side channel is
// written.
void write_event_set(std::ostream& out, const EventSet& events, bool with_photon_numbers = false);
EventSet read_event_set(std::istream& in);

unsigned resolve_threads(unsigned requested);

}  // namespace dlcz
