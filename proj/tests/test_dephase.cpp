#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dlcz/dephase.hpp"
#include "dlcz/errors.hpp"

using namespace dlcz;

namespace {

constexpr double hbar = 1.054571817e-34;
constexpr double mu_b = 9.2740100783e-24;

DephasingModel model(double dk, double sv, double field) {
  return {dk, sv, field, {{TransitionClass::clock(), 1.0}, {TransitionClass::non_clock(), 1.0}}};
}

}  // namespace

TEST_CASE("transition classes") {
  CHECK(TransitionClass::clock().differential_zeeman_slope == 0.0);
  CHECK(TransitionClass::non_clock().differential_zeeman_slope == rb87().bohr_magneton);
  CHECK(to_string(TransitionLabel::clock) == "clock");
  CHECK(to_string(TransitionLabel::non_clock) == "non_clock");
}

TEST_CASE("envelope at zero delay is one") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const auto m = model(u(rng) * 1e6, u(rng), u(rng) * 1e-5);
    CHECK(coherence_envelope(m, TransitionClass::clock(), 0.0) == 1.0);
    CHECK(coherence_envelope(m, TransitionClass::non_clock(), 0.0) == 1.0);
    CHECK(mixed_envelope(m, 0.0) == 1.0);
  }
}

TEST_CASE("clock envelope at the thermal time") {
  const auto m = model(2.9e5, 66e-3, 7e-7);
  const double tau = 1.0 / (66e-3 * 2.9e5);
  CHECK(tau * 1e6 == doctest::Approx(52.2).epsilon(1e-3));
  CHECK(coherence_envelope(m, TransitionClass::clock(), tau) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(coherence_envelope(m, TransitionClass::clock(), 52e-6) == doctest::Approx(0.368).epsilon(0.01));
}

TEST_CASE("non-clock envelope at the field time") {
  const double field = hbar / (mu_b * 16e-6);
  const auto m = model(2.9e5, 0.0, field);
  CHECK(coherence_envelope(m, TransitionClass::non_clock(), 16e-6) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("thermal dephasing time") {
  CHECK(thermal_dephasing_time(66e-3, 290e3) * 1e6 == doctest::Approx(52.25).epsilon(1e-3));
  CHECK(std::abs(thermal_dephasing_time(66e-3, 290e3) / 53e-6 - 1) < 0.02);
  CHECK(thermal_dephasing_time(33e-3, 290e3) == doctest::Approx(2 * thermal_dephasing_time(66e-3, 290e3)));
  CHECK(thermal_dephasing_time(66e-3, 2.76e5) * 1e6 == doctest::Approx(54.9).epsilon(1e-3));
  CHECK_THROWS_AS(thermal_dephasing_time(0.0, 290e3), ValidationError);
  CHECK_THROWS_AS(thermal_dephasing_time(66e-3, 0.0), ValidationError);
}

TEST_CASE("field dephasing time") {
  const double tau = field_dephasing_time(7.1e-7, TransitionClass::non_clock());
  CHECK(tau == doctest::Approx(hbar / (mu_b * 7.1e-7)).epsilon(1e-12));
  CHECK(tau * 1e6 == doctest::Approx(16.0).epsilon(0.01));
  CHECK(field_dephasing_time(7.1e-7, TransitionClass::clock()) == std::numeric_limits<double>::infinity());
  CHECK(field_dephasing_time(0.0, TransitionClass::non_clock()) == std::numeric_limits<double>::infinity());
  CHECK(field_dephasing_time(14.2e-7, TransitionClass::non_clock()) == doctest::Approx(0.5 * tau).epsilon(1e-14));
}

TEST_CASE("field inference") {
  CHECK(infer_field_inhomogeneity(16e-6) * 1e7 == doctest::Approx(7.107).epsilon(1e-3));
  CHECK(std::abs(infer_field_inhomogeneity(16e-6) / 10e-7 - 1) < 0.5);
  CHECK(infer_field_inhomogeneity(32e-6) == doctest::Approx(0.5 * infer_field_inhomogeneity(16e-6)).epsilon(1e-14));
  CHECK_THROWS_AS(infer_field_inhomogeneity(0.0), ValidationError);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> log_tau(-7.0, -2.0);
  for (int i = 0; i < 100; ++i) {
    const double t = std::pow(10.0, log_tau(rng));
    const double back = field_dephasing_time(infer_field_inhomogeneity(t), TransitionClass::non_clock());
    CHECK(std::abs(back / t - 1) < 1e-12);
  }
}

TEST_CASE("envelope properties over random models") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dk(1e4, 1e6), sv(1e-3, 0.2), field(0.0, 3e-6), tt(0.0, 200e-6);
  for (int i = 0; i < 200; ++i) {
    const auto both = model(dk(rng), sv(rng), field(rng));
    auto velocity_only = both;
    velocity_only.field_rms = 0.0;
    auto field_only = both;
    field_only.sigma_v = 0.0;

    for (const auto& cls : {TransitionClass::clock(), TransitionClass::non_clock()}) {
      double previous = 1.0;
      for (int k = 0; k <= 40; ++k) {
        const double t = k * 5e-6;
        const double e = coherence_envelope(both, cls, t);
        CHECK(e <= previous);
        previous = e;
        const double product = coherence_envelope(velocity_only, cls, t) * coherence_envelope(field_only, cls, t);
        CHECK(std::abs(e - product) <= 1e-12 * product);
      }
    }

    // The clock class does not see the field at all.
    auto other_field = both;
    other_field.field_rms = field(rng);
    const double t = tt(rng);
    CHECK(coherence_envelope(both, TransitionClass::clock(), t) ==
          coherence_envelope(other_field, TransitionClass::clock(), t));

    // -ln c(t) is a pure quadratic in t: its third difference vanishes.
    const double field_rate = mu_b * both.field_rms / hbar;
    const double motion_rate = both.delta_k * both.sigma_v;
    const double tau = 1.0 / std::sqrt(field_rate * field_rate + motion_rate * motion_rate);
    const double h = 0.1 * tau;
    const double t0 = 3.0 * tau * tt(rng) / 200e-6;
    auto nl = [&](double x) { return -std::log(coherence_envelope(both, TransitionClass::non_clock(), x)); };
    const double third = nl(t0 + 3 * h) - 3 * nl(t0 + 2 * h) + 3 * nl(t0 + h) - nl(t0);
    const double scale = std::max(1.0, nl(t0 + 3 * h));
    CHECK(std::abs(third) / scale < 1e-9);
    const double second = nl(t0 + 2 * h) - 2 * nl(t0 + h) + nl(t0);
    CHECK(second > 0);
  }
}

TEST_CASE("mixed envelope is the weighted mean") {
  DephasingModel m{2.76e5, 65.6e-3, 7.1e-7, {{TransitionClass::clock(), 1.0}, {TransitionClass::non_clock(), 3.0}}};
  const double t = 20e-6;
  const double expected = 0.25 * coherence_envelope(m, TransitionClass::clock(), t) +
                          0.75 * coherence_envelope(m, TransitionClass::non_clock(), t);
  CHECK(mixed_envelope(m, t) == doctest::Approx(expected).epsilon(1e-14));
  m.classes.clear();
  CHECK_THROWS_AS(mixed_envelope(m, t), ValidationError);
}

TEST_CASE("model validation") {
  auto m = model(2.9e5, 66e-3, 7e-7);
  CHECK_NOTHROW(m.validate());
  m.sigma_v = -1;
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m = model(2.9e5, 66e-3, 7e-7);
  m.classes[0].weight = -0.1;
  CHECK_THROWS_AS(m.validate(), ValidationError);
  CHECK_THROWS_AS(coherence_envelope(model(1, 1, 0), TransitionClass::clock(), -1e-6), ValidationError);
}
