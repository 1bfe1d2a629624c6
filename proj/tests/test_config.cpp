#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dlcz/config.hpp"
#include "dlcz/errors.hpp"

using namespace dlcz;

TEST_CASE("defaults survive a round trip") {
  const RunConfig d;
  CHECK_NOTHROW(d.validate());
  CHECK(parse_config_text(serialize_config(d)) == d);
  CHECK(parse_config_text("") == d);
  CHECK(d.delays_us.size() == 21);
  CHECK(d.delays_us.back() == 100.0);
}

TEST_CASE("random configurations survive a round trip") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    RunConfig c;
    c.power_w = 0.1 + 20 * u(rng);
    c.waist_um = 5 + 100 * u(rng);
    c.temperature_uk = 1 + 200 * u(rng);
    c.population_m_minus1 = u(rng);
    c.population_m0 = 1.0 - c.population_m_minus1;
    c.population_m_plus1 = 0.0;
    c.chi = u(rng) * 0.1;
    c.dark_prob_as = u(rng);
    c.field_rms_mg = 20 * u(rng);
    if (i % 2) c.sigma_v_mm_s = 100 * u(rng);
    if (i % 3) c.delta_k_per_mm = 500 * u(rng);
    c.delays_us = {0.0, u(rng) * 50, 50 + u(rng) * 50};
    c.trials_per_delay = 1 + rng() % 1000000;
    c.seed = rng();
    c.threads = unsigned(rng() % 9);
    c.photon_numbers = i % 4 == 0;
    c.output_dir = "runs/r" + std::to_string(i);
    const auto text = serialize_config(c);
    CHECK(parse_config_text(text) == c);
    CHECK(serialize_config(parse_config_text(text)) == text);
  }
}

TEST_CASE("delay ranges") {
  const auto c = parse_config_text("[plan]\ndelay_start_us = 0\ndelay_stop_us = 100\ndelay_step_us = 10\n");
  REQUIRE(c.delays_us.size() == 11);
  CHECK(c.delays_us[10] == doctest::Approx(100.0));
  const auto l = parse_config_text("[plan]\ndelays_us = 0, 2.5, 40\n");
  CHECK(l.delays_us == std::vector<double>{0.0, 2.5, 40.0});
  CHECK_THROWS_AS(parse_config_text("[plan]\ndelays_us = 0, 5\ndelay_start_us = 0\ndelay_stop_us = 5\ndelay_step_us = 1\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config_text("[plan]\ndelay_start_us = 0\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[plan]\ndelay_start_us = 0\ndelay_stop_us = 5\ndelay_step_us = 0\n"),
                  ValidationError);
}

TEST_CASE("parse errors name the key or the line") {
  try {
    parse_config_text("# comment\n[trap]\npower_w = 7\nbogus = 3\n");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "trap.bogus");
  }
  try {
    parse_config_text("[trap]\n\npower_w = seven\n");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.line() == 3);
  }
  try {
    parse_config_text("[output]\nphoton_numbers = maybe\n");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("validation names the offending key") {
  auto expect_field = [](RunConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL("expected a validation error for " << field);
    } catch (const ValidationError& e) {
      CHECK(e.field() == field);
    }
  };
  RunConfig c;
  c.power_w = 0;
  expect_field(c, "trap.power_w");
  c = RunConfig{};
  c.wavelength_nm = 780;
  expect_field(c, "trap.wavelength_nm");
  c = RunConfig{};
  c.population_m0 = 0.5;
  expect_field(c, "ensemble.population_*");
  c = RunConfig{};
  c.dark_prob_as = 1.5;
  expect_field(c, "photon.dark_prob_as");
  c = RunConfig{};
  c.delays_us = {0, -5};
  expect_field(c, "plan.delays_us");
  c = RunConfig{};
  c.trials_per_delay = 0;
  expect_field(c, "plan.trials_per_delay");
}

TEST_CASE("derived quantities and overrides") {
  const RunConfig d;
  const auto q = derive_quantities(d);
  CHECK(q.tau_thermal == doctest::Approx(1.0 / (q.sigma_v * q.delta_k)).epsilon(1e-14));
  CHECK(q.predicted_tau_c == q.tau_thermal);
  const double expected_nc = 1.0 / std::sqrt(1.0 / (q.tau_thermal * q.tau_thermal) + 1.0 / (q.tau_field * q.tau_field));
  CHECK(q.predicted_tau_nc == doctest::Approx(expected_nc).epsilon(1e-14));
  CHECK(q.field_rms == doctest::Approx(7.1e-7).epsilon(1e-14));
  CHECK_FALSE(q.sigma_v_overridden);

  RunConfig slow;
  slow.sigma_v_mm_s = 33.0;
  RunConfig fast;
  fast.sigma_v_mm_s = 66.0;
  const auto qs = derive_quantities(slow);
  const auto qf = derive_quantities(fast);
  CHECK(qs.sigma_v_overridden);
  CHECK(qs.sigma_v == doctest::Approx(33e-3).epsilon(1e-14));
  CHECK(qs.tau_thermal / qf.tau_thermal == doctest::Approx(2.0).epsilon(1e-14));

  RunConfig k;
  k.delta_k_per_mm = 290.0;
  k.sigma_v_mm_s = 66.0;
  CHECK(derive_quantities(k).tau_thermal * 1e6 == doctest::Approx(52.25).epsilon(1e-3));

  RunConfig still;
  still.sigma_v_mm_s = 0.0;
  CHECK(std::isinf(derive_quantities(still).tau_thermal));
}

TEST_CASE("models follow the populations") {
  RunConfig c;
  const auto m = make_models(c, derive_quantities(c));
  REQUIRE(m.photon.mean_excitation.size() == 2);
  CHECK(m.photon.mean_excitation[0] == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(m.photon.mean_excitation[1] == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(m.dephasing.classes[0].cls.differential_zeeman_slope == 0.0);
  CHECK(m.dephasing.classes[1].cls.differential_zeeman_slope > 0.0);

  c.population_m_minus1 = 1.0;
  c.population_m0 = 0.0;
  c.population_m_plus1 = 0.0;
  const auto clock = make_models(c, derive_quantities(c));
  CHECK(clock.photon.mean_excitation[0] == doctest::Approx(0.06).epsilon(1e-14));
  CHECK(clock.photon.mean_excitation[1] == 0.0);
  CHECK(clock.dephasing.classes[1].weight == 0.0);
  CHECK_NOTHROW(clock.validate());
}
