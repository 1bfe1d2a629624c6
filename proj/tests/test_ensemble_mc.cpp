#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dlcz/config.hpp"
#include "dlcz/ensemble_mc.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/photostats.hpp"

using namespace dlcz;

namespace {

DephasingModel one_class(TransitionClass cls, double dk = 2.76e5, double sv = 65.6e-3, double field = 7.1e-7) {
  return {dk, sv, field, {{cls, 1.0}}};
}

SimModels quiet_models(std::vector<double> chi, DephasingModel dephasing) {
  SimModels m;
  m.dephasing = std::move(dephasing);
  m.photon.mean_excitation = std::move(chi);
  m.photon.dark_prob_s = 0.0;
  m.photon.dark_prob_as = 0.0;
  return m;
}

// P(no Stokes click) for one thermal mode, summed term by term up to n_max.
double no_click_brute_force(double chi, double eta, int n_max) {
  double sum = 0.0;
  for (int n = 0; n <= n_max; ++n) sum += std::pow(chi, n) / std::pow(1.0 + chi, n + 1) * std::pow(1.0 - eta, n);
  return sum;
}

}  // namespace

TEST_CASE("trial streams are reproducible and distinct") {
  auto a = trial_stream(42, 7);
  auto b = trial_stream(42, 7);
  auto c = trial_stream(42, 8);
  auto d = trial_stream(43, 7);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
}

TEST_CASE("excitation numbers") {
  PhotonModel zero;
  zero.mean_excitation = {0.0, 0.0};
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto n = sample_excitations(zero, rng);
    CHECK(n[0] == 0);
    CHECK(n[1] == 0);
  }

  const double chi = 0.02;
  PhotonModel pm;
  pm.mean_excitation = {chi};
  const int draws = 1000000;
  double sum = 0;
  double n1 = 0;
  double n2 = 0;
  for (int i = 0; i < draws; ++i) {
    const auto n = sample_excitations(pm, rng)[0];
    sum += n;
    n1 += n == 1;
    n2 += n == 2;
  }
  // Thermal variance chi (1 + chi).
  const double sigma_mean = std::sqrt(chi * (1 + chi) / draws);
  CHECK(std::abs(sum / draws - chi) < 3 * sigma_mean);
  const double ratio = n2 / n1;
  const double sigma_ratio = ratio * std::sqrt(1 / n1 + 1 / n2);
  CHECK(std::abs(ratio - chi / (1 + chi)) < 3 * sigma_ratio);
}

TEST_CASE("spin-wave phase rates") {
  Rng rng(2);
  const auto still = build_excitation(TransitionClass::non_clock(), one_class(TransitionClass::non_clock(), 2.76e5, 0, 0),
                                      64, rng);
  for (const auto& a : still.atoms) {
    CHECK(a.velocity == 0.0);
    CHECK(a.field == 0.0);
  }

  const auto model = one_class(TransitionClass::clock());
  const std::uint32_t m = 100000;
  const auto exc = build_excitation(TransitionClass::clock(), model, m, rng);
  double s = 0;
  double ss = 0;
  for (const auto& a : exc.atoms) {
    CHECK(a.field == 0.0);
    s += a.velocity;
    ss += a.velocity * a.velocity;
  }
  const double var = (ss - s * s / m) / (m - 1);
  const double target = std::pow(model.delta_k * model.sigma_v, 2);
  // Sample variance of a normal: standard deviation target * sqrt(2 / (m - 1)).
  CHECK(std::abs(var - target) < 3 * target * std::sqrt(2.0 / (m - 1)));

  const auto nc = build_excitation(TransitionClass::non_clock(), one_class(TransitionClass::non_clock(), 2.76e5, 0.0),
                                   m, rng);
  double fs = 0;
  double fss = 0;
  for (const auto& a : nc.atoms) {
    fs += a.field;
    fss += a.field * a.field;
  }
  const double fvar = (fss - fs * fs / m) / (m - 1);
  const double ftarget = std::pow(rb87().bohr_magneton * 7.1e-7 / rb87().reduced_planck, 2);
  CHECK(std::abs(fvar - ftarget) < 3 * ftarget * std::sqrt(2.0 / (m - 1)));
}

TEST_CASE("retrieval probability limits") {
  Rng rng(3);
  PhotonModel pm;
  pm.retrieval_eff = 0.85;
  const auto model = one_class(TransitionClass::non_clock());
  const auto exc = build_excitation(TransitionClass::non_clock(), model, 256, rng);
  CHECK(retrieval_probability(exc, 0.0, pm) == 0.85);
  const auto single = build_excitation(TransitionClass::non_clock(), model, 1, rng);
  for (double t : {0.0, 1e-6, 50e-6, 1e-3}) CHECK(retrieval_probability(single, t, pm) == 0.85);
  CHECK_THROWS_AS(collective_overlap(exc, -1e-6), ValidationError);
}

TEST_CASE("overlap is unbiased once fully dephased") {
  // At long delays the true squared mean phasor is ~0; the uncorrected
  // estimator would sit at 1/M.
  Rng rng(4);
  const auto model = one_class(TransitionClass::clock());
  const std::uint32_t m = 16;
  const int n = 200000;
  double s = 0;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    const double x = collective_overlap(build_excitation(TransitionClass::clock(), model, m, rng), 1e-3);
    s += x;
    ss += x * x;
  }
  const double mean = s / n;
  const double se = std::sqrt((ss / n - mean * mean) / n);
  CHECK(std::abs(mean) < 3 * se);
  CHECK(std::abs(mean) < 0.1 / m);
}

TEST_CASE("large-M retrieval follows the thermal envelope") {
  const auto model = one_class(TransitionClass::clock());
  const double delays[] = {0.0, 20e-6, 50e-6, 80e-6};
  const auto est = monte_carlo_envelope(model, delays, 20000, 256, 9, 1);
  for (const auto& e : est) {
    const double t = e.delay;
    const double analytic = std::exp(-std::pow(model.delta_k * model.sigma_v * t, 2));
    CHECK(std::abs(e.mean - analytic) <= 3 * e.std_error + 1e-15);
  }
}

TEST_CASE("envelope estimate does not depend on the thread count") {
  DephasingModel mixed{2.76e5, 65.6e-3, 7.1e-7, {{TransitionClass::clock(), 1.0}, {TransitionClass::non_clock(), 2.0}}};
  const double delays[] = {0.0, 10e-6, 40e-6};
  const auto one = monte_carlo_envelope(mixed, delays, 10000, 64, 5, 1);
  const auto many = monte_carlo_envelope(mixed, delays, 10000, 64, 5, 4);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].mean == many[i].mean);
    CHECK(one[i].std_error == many[i].std_error);
  }
}

TEST_CASE("trial outcomes in degenerate settings") {
  auto models = quiet_models({0.0, 0.0}, {2.76e5, 65.6e-3, 7.1e-7,
                                          {{TransitionClass::clock(), 1.0}, {TransitionClass::non_clock(), 1.0}}});
  for (std::uint64_t i = 0; i < 1000; ++i) {
    auto rng = trial_stream(1, i);
    const auto r = run_trial(models, 32, 10e-6, i, rng);
    CHECK_FALSE(r.stokes_click);
    CHECK_FALSE(r.antistokes_click);
  }

  models.photon.dark_prob_s = 1.0;
  models.photon.dark_prob_as = 0.3;
  const int n = 20000;
  int as = 0;
  for (int i = 0; i < n; ++i) {
    auto rng = trial_stream(2, i);
    const auto r = run_trial(models, 32, 10e-6, i, rng);
    CHECK(r.stokes_click);
    as += r.antistokes_click;
  }
  CHECK(std::abs(as / double(n) - 0.3) < 3 * std::sqrt(0.3 * 0.7 / n));
}

TEST_CASE("Stokes click probability against a brute-force sum over excitation numbers") {
  const double chi_a = 0.05;
  const double chi_b = 0.1;
  const double eta = 0.6;
  // Truncation at n = 20 is exact to well below 1e-12 for chi <= 0.1:
  // compare against the closed-form generating function 1 / (1 + chi eta).
  for (double chi : {0.01, 0.05, 0.1}) {
    CHECK(std::abs(no_click_brute_force(chi, eta, 20) - 1.0 / (1.0 + chi * eta)) < 1e-12);
  }
  const double p_s = 1.0 - no_click_brute_force(chi_a, eta, 20) * no_click_brute_force(chi_b, eta, 20);

  auto models = quiet_models({chi_a, chi_b}, {2.76e5, 65.6e-3, 7.1e-7,
                                              {{TransitionClass::clock(), 1.0}, {TransitionClass::non_clock(), 1.0}}});
  models.photon.stokes_det_eff = eta;
  SimPlan plan{{0.0}, 200000, 17, 8, 0};
  const auto events = run_plan(plan, models);
  const auto counts = count_clicks(events);
  const double est = counts.n_stokes / double(counts.n_trials);
  CHECK(std::abs(est - p_s) < 3 * std::sqrt(p_s * (1 - p_s) / counts.n_trials));
}

TEST_CASE("Stokes auto-correlation of thermal excitations") {
  SimPlan plan{{0.0}, 400000, 23, 4, 0};

  SUBCASE("one thermal mode gives 2") {
    auto models = quiet_models({0.05}, one_class(TransitionClass::clock()));
    const auto ac = auto_correlation(run_plan(plan, models), Field::stokes);
    CHECK(std::abs(ac.value - 2.0) < 3 * ac.std_error);
  }
  SUBCASE("two equal independent modes give 1.5") {
    auto models = quiet_models({0.05, 0.05}, {2.76e5, 65.6e-3, 7.1e-7,
                                              {{TransitionClass::clock(), 1.0}, {TransitionClass::non_clock(), 1.0}}});
    const auto ac = auto_correlation(run_plan(plan, models), Field::stokes);
    CHECK(std::abs(ac.value - 1.5) < 3 * ac.std_error);
  }
}

TEST_CASE("typical runs are non-classical at zero delay and decay") {
  RunConfig cfg;
  const auto derived = derive_quantities(cfg);
  const auto models = make_models(cfg, derived);
  SimPlan plan{{0.0, 60e-6}, 1000000, 42, 256, 0};
  const auto points = correlation_sweep(run_plan(plan, models));
  REQUIRE(points.size() == 2);
  CHECK(points[0].g_value > 2.0);
  CHECK(points[0].g_value > points[1].g_value);
  CHECK(points[1].g_value > 1.0);
}

TEST_CASE("run_plan determinism") {
  RunConfig cfg;
  const auto models = make_models(cfg, derive_quantities(cfg));
  SimPlan plan{{0.0, 30e-6, 90e-6}, 3000, 42, 64, 1};
  const auto a = run_plan(plan, models);
  const auto b = run_plan(plan, models);
  CHECK(a == b);
  plan.threads = 3;
  CHECK(run_plan(plan, models) == a);
  plan.rng_seed = 43;
  CHECK(run_plan(plan, models) != a);

  std::ostringstream sa;
  std::ostringstream sb;
  write_event_set(sa, a);
  write_event_set(sb, b);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("event file round trip") {
  RunConfig cfg;
  const auto models = make_models(cfg, derive_quantities(cfg));
  SimPlan plan{{0.0, 12.5e-6}, 500, 1, 16, 1};
  const auto events = run_plan(plan, models);

  std::stringstream plain;
  write_event_set(plain, events);
  CHECK(plain.str().rfind("trial_index,delay_us,stokes,antistokes\n", 0) == 0);
  const auto back = read_event_set(plain);
  REQUIRE(back.size() == events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(back[i].trial_index == events[i].trial_index);
    CHECK(back[i].delay == doctest::Approx(events[i].delay).epsilon(1e-12));
    CHECK(back[i].stokes_click == events[i].stokes_click);
    CHECK(back[i].antistokes_click == events[i].antistokes_click);
    CHECK_FALSE(back[i].photons.has_value());
  }

  std::stringstream side;
  write_event_set(side, events, true);
  const auto with_numbers = read_event_set(side);
  REQUIRE(with_numbers.size() == events.size());
  for (std::size_t i = 0; i < events.size(); ++i) CHECK((with_numbers[i].photons == events[i].photons));
}

TEST_CASE("malformed event rows report their line") {
  const std::string header = "trial_index,delay_us,stokes,antistokes\n";
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_event_set(in);
    } catch (const FormatError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of(header + "0,0.000000,1,0\n1,0.000000,1\n") == 3);
  CHECK(line_of(header + "0,0.000000,1,0\n1,0.000000,0,1\n2,abc,0,0\n") == 4);
  CHECK(line_of(header + "0,0.000000,2,0\n") == 2);
  CHECK(line_of(header + "0,-1.0,1,0\n") == 2);
  CHECK(line_of("index,delay\n") == 1);
  CHECK(line_of("") == 1);
  std::istringstream crlf(header.substr(0, header.size() - 1) + "\r\n0,5.000000,1,1\r\n");
  const auto ev = read_event_set(crlf);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].delay == doctest::Approx(5e-6));
}

TEST_CASE("plan and model validation") {
  RunConfig cfg;
  auto models = make_models(cfg, derive_quantities(cfg));
  SimPlan plan{{0.0}, 10, 1, 16, 1};
  CHECK_NOTHROW(run_plan(plan, models));

  SimPlan bad = plan;
  bad.delays.clear();
  CHECK_THROWS_AS(run_plan(bad, models), ValidationError);
  bad = plan;
  bad.delays = {-1e-6};
  CHECK_THROWS_AS(run_plan(bad, models), ValidationError);
  bad = plan;
  bad.trials_per_delay = 0;
  CHECK_THROWS_AS(run_plan(bad, models), ValidationError);
  bad = plan;
  bad.trials_per_delay = std::uint64_t(1) << 62;
  CHECK_THROWS_AS(run_plan(bad, models), ValidationError);

  auto bad_models = models;
  bad_models.photon.mean_excitation.pop_back();
  CHECK_THROWS_AS(run_plan(plan, bad_models), ValidationError);
  bad_models = models;
  bad_models.photon.retrieval_eff = 1.5;
  CHECK_THROWS_AS(run_plan(plan, bad_models), ValidationError);
  bad_models = models;
  bad_models.photon.mean_excitation[0] = -0.1;
  CHECK_THROWS_AS(run_plan(plan, bad_models), ValidationError);
}
