#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "wavejoint/errors.hpp"
#include "wavejoint/stiffness_oracle.hpp"

using namespace wavejoint;

namespace {

// Unit-load (flexibility) solution of the same discretized frame: the tip
// compliance is the integral of the squared internal actions over the
// member, with no stiffness matrix involved. Internal actions are linear
// along each straight element, so Simpson's rule is exact.
StiffnessTriple flexibility_reference(const JointConfig& cfg, const Material& m, int density) {
  using V = Eigen::Vector3d;
  const double depth = 16.0, lever_arm = 11.0;
  const int n = std::max(2, static_cast<int>(std::lround(cfg.ridges * density)));
  const double e = m.young_modulus_gpa * 1000.0;
  const double g = e / (2.0 * (1.0 + m.poisson_ratio));
  const double t = cfg.thickness_mm;
  const double ratio = t / depth;
  const double area = t * depth;
  const double i_thin = depth * t * t * t / 12.0;
  const double i_deep = t * depth * depth * depth / 12.0;
  const double j = (1.0 - 0.63 * ratio + 0.052 * std::pow(ratio, 5)) / 3.0 * depth * t * t * t;
  const double amp = cfg.height_mm / 2.0 - cfg.thickness_mm;

  std::vector<V> p(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double s = cfg.length_mm * i / n;
    p[i] = V(s, -amp * std::cos(2.0 * std::numbers::pi * cfg.ridges * s / cfg.length_mm), 0.0);
  }
  const V load_point = p[n] + V(lever_arm, -p[n].y(), 0.0);
  const double twist = cfg.twist_deg * std::numbers::pi / 180.0;

  auto compliance = [&](const V& force, const V& couple) {
    double c = 0.0;
    for (int el = 0; el < n; ++el) {
      const V chord = p[el + 1] - p[el];
      const double len = chord.norm();
      const V ax = chord / len;
      const double phi = twist * (el + 0.5) / n;
      const V b1 = std::cos(phi) * V(-ax.y(), ax.x(), 0.0) + std::sin(phi) * V(0, 0, 1);
      const V b2 = ax.cross(b1);
      auto density_at = [&](const V& r) {
        const V mom = couple + (load_point - r).cross(force);
        const double nx = force.dot(ax), tx = mom.dot(ax), m1 = mom.dot(b1), m2 = mom.dot(b2);
        return nx * nx / (e * area) + tx * tx / (g * j) + m1 * m1 / (e * i_deep) + m2 * m2 / (e * i_thin);
      };
      c += len / 6.0 * (density_at(p[el]) + 4.0 * density_at(0.5 * (p[el] + p[el + 1])) + density_at(p[el + 1]));
    }
    return c;
  };
  const double c_xi = compliance(V(0, 0, 1), V::Zero());
  const double c_eta = compliance(V(0, 1, 0), V::Zero());
  const double c_zeta = compliance(V::Zero(), V(1, 0, 0));
  return {1.0 / c_xi, 1.0 / c_eta, 1.0 / (c_zeta * 180.0 / std::numbers::pi)};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

StiffnessTriple exact_k(const JointConfig& c, const Material& m = {}) {
  const auto o = evaluate_stiffness(c, m, kExactMeshDensity);
  REQUIRE(o.ok());
  return *o.stiffness;
}

}  // namespace

TEST_CASE("stiffness method agrees with the flexibility method") {
  const JointConfig cases[] = {
      {20, 4, 10, 0.5, 12}, {15, 3, 8, 0.5, 0}, {30, 6, 14, 0.6, 24}, {25, 4, 5, 0.5, 10}, {17.3, 5, 12.2, 0.57, 7}};
  for (const auto& c : cases) {
    for (int density : {8, 32}) {
      const auto o = evaluate_stiffness(c, Material{}, density);
      REQUIRE(o.ok());
      const auto ref = flexibility_reference(c, Material{}, density);
      INFO("config l_t=" << c.length_mm << " n_r=" << c.ridges << " density=" << density);
      CHECK(rel(o.stiffness->k_xi, ref.k_xi) < 1e-8);
      CHECK(rel(o.stiffness->k_eta, ref.k_eta) < 1e-8);
      CHECK(rel(o.stiffness->k_zeta, ref.k_zeta) < 1e-8);
    }
  }
}

TEST_CASE("stiffness scales linearly with Young's modulus") {
  const JointConfig c{20, 4, 10, 0.5, 12};
  Material doubled;
  doubled.young_modulus_gpa *= 2.0;
  const auto a = exact_k(c), b = exact_k(c, doubled);
  CHECK(rel(b.k_xi, 2 * a.k_xi) < 1e-8);
  CHECK(rel(b.k_eta, 2 * a.k_eta) < 1e-8);
  CHECK(rel(b.k_zeta, 2 * a.k_zeta) < 1e-8);
  Material scaled;
  scaled.young_modulus_gpa *= 0.37;
  const auto s = exact_k(c, scaled);
  CHECK(rel(s.k_xi, 0.37 * a.k_xi) < 1e-8);
  CHECK(rel(s.k_zeta, 0.37 * a.k_zeta) < 1e-8);
}

TEST_CASE("mesh refinement 16 -> 32 changes each component by under 2%") {
  const JointConfig c{20, 4, 10, 0.5, 12};
  const auto fine = evaluate_stiffness(c, Material{}, 32);
  const auto mid = evaluate_stiffness(c, Material{}, 16);
  REQUIRE(fine.ok());
  REQUIRE(mid.ok());
  CHECK(rel(mid.stiffness->k_xi, fine.stiffness->k_xi) < 0.02);
  CHECK(rel(mid.stiffness->k_eta, fine.stiffness->k_eta) < 0.02);
  CHECK(rel(mid.stiffness->k_zeta, fine.stiffness->k_zeta) < 0.02);
}

TEST_CASE("k_xi increases with wall thickness") {
  for (const JointConfig base : {JointConfig{20, 4, 10, 0.5, 12}, JointConfig{28, 6, 13, 0.5, 0}}) {
    double prev = 0.0;
    for (double th : {0.50, 0.55, 0.60}) {
      JointConfig c = base;
      c.thickness_mm = th;
      const double k = exact_k(c).k_xi;
      CHECK(k > prev);
      prev = k;
    }
  }
}

TEST_CASE("evaluation is bitwise deterministic") {
  const JointConfig c{23.7, 5, 11.1, 0.53, 17};
  const auto a = evaluate_stiffness(c, Material{}, 32);
  const auto b = evaluate_stiffness(c, Material{}, 32);
  REQUIRE(a.ok());
  CHECK(*a.stiffness == *b.stiffness);
}

TEST_CASE("every in-bounds config yields positive finite stiffness or a failure") {
  std::mt19937_64 rng(5);
  const Bounds b = Bounds::joint_defaults();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int ok = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(5);
    for (std::size_t k = 0; k < 5; ++k) x[k] = b[k].lower + u(rng) * (b[k].upper - b[k].lower);
    const auto o = evaluate_stiffness(JointConfig::from_span(clamp_and_round(x, b)), Material{}, 32);
    if (o.ok()) {
      ++ok;
      for (double v : o.stiffness->to_array()) CHECK((std::isfinite(v) && v > 0.0));
    } else {
      CHECK(o.failure != FailureReason::kNone);
    }
  }
  CHECK(ok == 100);
}

TEST_CASE("invalid geometry is a failure, not an exception") {
  const auto o = evaluate_stiffness({20, 4, 1.0, 0.5, 0}, Material{}, 32);
  CHECK_FALSE(o.ok());
  CHECK(o.failure == FailureReason::kInvalidGeometry);
  CHECK_FALSE(evaluate_stiffness({20, 4, 10, 0.0, 0}, Material{}, 32).ok());
  CHECK_THROWS_AS(evaluate_stiffness({20, 4, 10, 0.5, 0}, Material{}, 1), Error);
  Material bad;
  bad.poisson_ratio = 0.5;
  CHECK_THROWS_AS(evaluate_stiffness({20, 4, 10, 0.5, 0}, bad, 32), Error);
}

TEST_CASE("outside-bounds configs are still evaluated") {
  // h_t = 5 lies below the optimization box but is a physical joint.
  CHECK(evaluate_stiffness({25, 4, 5, 0.5, 10}, Material{}, 32).ok());
}

TEST_CASE("noisy evaluation") {
  const JointConfig c{20, 4, 10, 0.5, 12};
  const auto coarse = evaluate_stiffness(c, Material{}, kNoisyMeshDensity);
  REQUIRE(coarse.ok());

  SUBCASE("zero cap equals the coarse mesh") {
    const auto z = noisy_evaluate(c, Material{}, Fidelity::noisy(0.0), 42);
    CHECK(*z.stiffness == *coarse.stiffness);
  }
  SUBCASE("factors stay within the cap") {
    const auto base = coarse.stiffness->to_array();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto o = noisy_evaluate(c, Material{}, Fidelity::noisy(0.30), seed);
      REQUIRE(o.ok());
      const auto k = o.stiffness->to_array();
      for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(k[i] / base[i] - 1.0) <= 0.30 + 1e-12);
    }
  }
  SUBCASE("seeded determinism") {
    const auto a = noisy_evaluate(c, Material{}, Fidelity::noisy(0.30), 9);
    const auto b = noisy_evaluate(c, Material{}, Fidelity::noisy(0.30), 9);
    const auto d = noisy_evaluate(c, Material{}, Fidelity::noisy(0.30), 10);
    CHECK(*a.stiffness == *b.stiffness);
    CHECK_FALSE(*a.stiffness == *d.stiffness);
  }
  SUBCASE("exact fidelity is rejected") {
    CHECK_THROWS_AS(noisy_evaluate(c, Material{}, Fidelity::exact(), 1), Error);
  }
  SUBCASE("evaluate_at dispatch") {
    CHECK(*evaluate_at(c, Material{}, Fidelity::exact(), 3).stiffness == exact_k(c));
    CHECK(*evaluate_at(c, Material{}, Fidelity::noisy(0.3), 3).stiffness ==
          *noisy_evaluate(c, Material{}, Fidelity::noisy(0.3), 3).stiffness);
  }
}

TEST_CASE("fidelity text") {
  CHECK(Fidelity::parse("exact") == Fidelity::exact());
  CHECK(Fidelity::parse("noisy") == Fidelity::noisy(0.30));
  CHECK(Fidelity::parse("noisy:0.1") == Fidelity::noisy(0.1));
  CHECK(Fidelity::noisy(0.3).to_string() == "noisy:0.3");
  CHECK(Fidelity::parse(Fidelity::noisy(0.125).to_string()) == Fidelity::noisy(0.125));
  CHECK_THROWS_AS(Fidelity::parse("noisy:abc"), Error);
  CHECK_THROWS_AS(Fidelity::noisy(1.0), Error);
  CHECK_THROWS_AS(Fidelity::noisy(-0.1), Error);
}

TEST_CASE("residual") {
  const StiffnessTriple t{990.2987435, 35.2796, 5.0932};
  CHECK(residual(t, t) == 0.0);

  // Hand expansion of the squared relative errors.
  const double r1 = residual({994.7744533, 35.1521, 5.1109}, t);
  const double by_hand = std::pow(4.4757098 / 990.2987435, 2) + std::pow(0.1275 / 35.2796, 2) +
                         std::pow(0.0177 / 5.0932, 2);
  CHECK(r1 == doctest::Approx(by_hand).epsilon(1e-6));
  CHECK(r1 == doctest::Approx(4.5564e-5).epsilon(1e-4));

  const double r3 = residual({744.9876164, 6.0016, 1.9776}, {741.2807955, 6.0003, 1.9733});
  CHECK(r3 == doctest::Approx(2.9801e-5).epsilon(1e-4));

  try {
    residual(t, {1, 0, 1});
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDomain);
  }
}

TEST_CASE("synthetic functions") {
  const double origin[] = {0, 0, 0, 0, 0};
  CHECK(synthetic_function("sphere", origin) == 0.0);
  const double ones[] = {1, 1};
  CHECK(synthetic_function("rosenbrock", ones) == 0.0);
  const auto c = synthetic_centers(5);
  CHECK(synthetic_function("mixed-integer-quadratic", c) == 0.0);
  for (double v : c) CHECK(v == std::round(v));
  const double x[] = {1, 2};
  CHECK(synthetic_function("sphere", x) == 5.0);
  CHECK(synthetic_info("rosenbrock").known_minimum == 0.0);
  try {
    synthetic_function("ackley", x);
    FAIL("expected UnknownFunction");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownFunction);
  }
}
