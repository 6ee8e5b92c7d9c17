#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "wavejoint/errors.hpp"
#include "wavejoint/joint_model.hpp"

using namespace wavejoint;

namespace {

bool has(const std::vector<Violation>& v, ViolationKind kind, const std::string& var) {
  for (const auto& x : v) {
    if (x.kind == kind && x.variable == var) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("validate_config on the default box") {
  const Bounds b = Bounds::joint_defaults();
  CHECK(validate_config({20, 4, 10, 0.5, 12}, b).empty());

  const auto low = validate_config({14.9, 4, 10, 0.5, 12}, b);
  REQUIRE(low.size() == 1);
  CHECK(has(low, ViolationKind::kBound, "l_t"));

  const auto frac = validate_config({20, 3.5, 10, 0.5, 12}, b);
  REQUIRE(frac.size() == 1);
  CHECK(has(frac, ViolationKind::kIntegrality, "n_r"));
}

TEST_CASE("validate_config reports every violation") {
  const auto v = validate_config({40, 7.5, 10, 0.5, -1}, Bounds::joint_defaults());
  CHECK(has(v, ViolationKind::kBound, "l_t"));
  CHECK(has(v, ViolationKind::kBound, "n_r"));
  CHECK(has(v, ViolationKind::kIntegrality, "n_r"));
  CHECK(has(v, ViolationKind::kBound, "alpha"));
}

TEST_CASE("non-positive amplitude is flagged") {
  Bounds wide({{"l_t", 1, 50, false}, {"n_r", 1, 10, true}, {"h_t", 0.1, 20, false},
               {"t_h", 0.1, 5, false}, {"alpha", 0, 90, true}});
  const auto v = validate_config({20, 4, 2, 1.0, 0}, wide);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == ViolationKind::kAmplitudeNonPositive);
  CHECK(validate_config({20, 4, 2.1, 1.0, 0}, wide).empty());
}

TEST_CASE("bounds construction rejects bad ranges") {
  CHECK_THROWS_AS(Bounds({{"x", 2, 1, false}}), Error);
  CHECK_THROWS_AS(Bounds({{"n", 0.5, 3, true}}), Error);
  CHECK(Bounds::joint_defaults().integral_combinations() == 4 * 25);
  CHECK(Bounds::uniform(3, -1, 1).integral_combinations() == 1);
}

TEST_CASE("wave_profile sample points") {
  const JointConfig cfg{25, 4, 5, 0.5, 10};
  CHECK(wave_profile(cfg, 0.0) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(wave_profile(cfg, 3.125) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(wave_profile(cfg, 1.5625)) < 1e-14);
  CHECK(wave_profile(cfg, 25.0) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("wave_profile domain") {
  const JointConfig cfg{25, 4, 5, 0.5, 10};
  try {
    wave_profile(cfg, -0.01);
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDomain);
  }
  CHECK_THROWS_AS(wave_profile(cfg, 25.01), Error);
}

TEST_CASE("wave_profile is periodic and bounded") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const JointConfig cfg{15 + 15 * u(rng), std::floor(3 + 4 * u(rng)), 8 + 6 * u(rng), 0.5 + 0.1 * u(rng), 0};
    const double period = cfg.length_mm / cfg.ridges;
    const double t = (cfg.length_mm - period) * u(rng);
    CHECK(wave_profile(cfg, t) == doctest::Approx(wave_profile(cfg, t + period)).epsilon(1e-9));
    const double s = cfg.length_mm * u(rng);
    CHECK(std::abs(wave_profile(cfg, s)) <= cfg.amplitude_mm() + 1e-12);
  }
}

TEST_CASE("clamp_and_round examples") {
  const Bounds b = Bounds::joint_defaults();
  CHECK(clamp_and_round(JointConfig{31.2, 3.4, 10, 0.5, 12.7}, b) == JointConfig{30, 3, 10, 0.5, 13});
  CHECK(clamp_and_round(JointConfig{15, 6.5, 8, 0.55, -1}, b) == JointConfig{15, 6, 8, 0.55, 0});
  CHECK(clamp_and_round(JointConfig{20, 4, 10, 0.5, 12}, b) == JointConfig{20, 4, 10, 0.5, 12});
  // Ties go away from zero.
  CHECK(clamp_and_round(JointConfig{20, 4.5, 10, 0.5, 11.5}, b) == JointConfig{20, 5, 10, 0.5, 12});
  Bounds sym({{"k", -5, 5, true}});
  const double neg[] = {-2.5};
  CHECK(clamp_and_round(neg, sym)[0] == -3.0);
}

TEST_CASE("clamp_and_round is idempotent and always valid") {
  const Bounds b = Bounds::joint_defaults();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 80.0);
  for (int trial = 0; trial < 500; ++trial) {
    const JointConfig raw{u(rng), u(rng) / 10, u(rng) / 5, u(rng) / 100, u(rng)};
    const JointConfig once = clamp_and_round(raw, b);
    CHECK(clamp_and_round(once, b) == once);
    CHECK(validate_config(once, b).empty());
  }
}

TEST_CASE("JointConfig span round trip") {
  const JointConfig c{21.5, 5, 9.25, 0.55, 7};
  const auto a = c.to_array();
  CHECK(JointConfig::from_span(a) == c);
  CHECK(c.amplitude_mm() == doctest::Approx(9.25 / 2 - 0.55));
}
