#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "wavejoint/errors.hpp"
#include "wavejoint/rbf_surrogate.hpp"

using namespace wavejoint;

namespace {

SurrogateSample exact(std::vector<double> x, double y) { return {std::move(x), y, Fidelity::exact()}; }

std::vector<SurrogateSample> random_samples(std::mt19937_64& rng, std::size_t n, std::size_t d, double noisy_share) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SurrogateSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = -2.0 + 4.0 * u(rng);
    double y = 0.0;
    for (double v : x) y += std::sin(2.0 * v) + 0.3 * v * v;
    const Fidelity f = u(rng) < noisy_share ? Fidelity::noisy(0.30) : Fidelity::exact();
    out.push_back({x, y + 3.0 * u(rng), f});
  }
  return out;
}

std::vector<Kernel> all_kernels() {
  return {Kernel::cubic(), Kernel::thin_plate(), Kernel::linear(), Kernel::gaussian(20.0), Kernel::multiquadric(20.0)};
}

}  // namespace

TEST_CASE("single gaussian node") {
  const std::vector<SurrogateSample> s{exact({0.3, 0.7}, 7.0)};
  FitOptions o;
  o.tail_degree = kNoTail;
  const Surrogate f = fit(s, Kernel::gaussian(2.0), Bounds::uniform(2, 0, 1), o);
  REQUIRE(f.coefficients().size() == 1);
  CHECK(f.coefficients()(0) == doctest::Approx(7.0).epsilon(1e-14));
  const double at[] = {0.3, 0.7};
  CHECK(f.eval(at) == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("two-node linear kernel by hand") {
  const std::vector<SurrogateSample> s{exact({0.0}, 0.0), exact({1.0}, 1.0)};
  FitOptions o;
  o.tail_degree = kNoTail;
  const Surrogate f = fit(s, Kernel::linear(), Bounds::uniform(1, 0, 1), o);
  // Xi = [[0,1],[1,0]] gives lambda = (1, 0), so s(x) = |x|.
  CHECK(f.coefficients()(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(f.coefficients()(1)) < 1e-14);
  const double half[] = {0.5}, quarter[] = {0.25};
  CHECK(f.eval(half) == 0.5);
  CHECK(f.eval(quarter) == 0.25);
}

TEST_CASE("exact nodes are reproduced for every kernel") {
  std::mt19937_64 rng(21);
  for (const Kernel& k : all_kernels()) {
    for (std::size_t d : {1, 2, 5}) {
      for (std::size_t n : {2, 7, 30}) {
        // Smooth kernels on 30 points of a line are numerically singular.
        const bool smooth = k.family == KernelFamily::kGaussian || k.family == KernelFamily::kMultiquadric;
        if (smooth && d == 1) continue;
        const auto s = random_samples(rng, n, d, 0.0);
        const Surrogate f = fit(s, k, Bounds::uniform(d, -2, 2));
        for (const auto& x : s) {
          INFO(k.name() << " d=" << d << " n=" << n);
          CHECK(std::abs(f.eval(x.point) - x.value) <= 1e-8 * std::max(1.0, std::abs(x.value)));
        }
      }
    }
  }
}

TEST_CASE("noisy nodes stay within their band") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_samples(rng, 25, 3, 0.6);
    const Surrogate f = fit(s, Kernel::cubic(), Bounds::uniform(3, -2, 2));
    for (const auto& x : s) {
      const double err = std::abs(f.eval(x.point) - x.value);
      if (x.fidelity.is_exact()) {
        CHECK(err <= 1e-8 * std::max(1.0, std::abs(x.value)));
      } else {
        CHECK(err <= 0.30 * std::abs(x.value) + 1e-8);
      }
    }
  }
}

TEST_CASE("explicit band overrides the relative cap") {
  std::vector<SurrogateSample> s{exact({0.0}, 0.0), exact({1.0}, 0.0), {{0.5}, 10.0, Fidelity::noisy(0.3), 0.01}};
  const Surrogate f = fit(s, Kernel::cubic(), Bounds::uniform(1, 0, 1));
  const double mid[] = {0.5};
  CHECK(std::abs(f.eval(mid) - 10.0) <= 0.01 + 1e-8);
}

TEST_CASE("fit does not depend on observation order") {
  std::mt19937_64 rng(4);
  auto s = random_samples(rng, 20, 3, 0.3);
  const Surrogate a = fit(s, Kernel::cubic(), Bounds::uniform(3, -2, 2));
  std::shuffle(s.begin(), s.end(), rng);
  const Surrogate b = fit(s, Kernel::cubic(), Bounds::uniform(3, -2, 2));
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const double x[] = {u(rng), u(rng), u(rng)};
    CHECK(std::abs(a.eval(x) - b.eval(x)) <= 1e-10 * std::max(1.0, std::abs(a.eval(x))));
  }
}

TEST_CASE("repeating an exact node changes nothing") {
  std::mt19937_64 rng(6);
  auto s = random_samples(rng, 12, 2, 0.0);
  const Surrogate a = fit(s, Kernel::thin_plate(), Bounds::uniform(2, -2, 2));
  s.push_back(s[3]);
  const Surrogate b = fit(s, Kernel::thin_plate(), Bounds::uniform(2, -2, 2));
  CHECK(b.size() == a.size());
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const double x[] = {u(rng), u(rng)};
    CHECK(std::abs(a.eval(x) - b.eval(x)) <= 1e-8 * std::max(1.0, std::abs(a.eval(x))));
  }
}

TEST_CASE("conflicting exact duplicates are rejected") {
  const std::vector<SurrogateSample> s{exact({0.2, 0.2}, 1.0), exact({0.2, 0.2}, 2.0), exact({0.9, 0.1}, 0.0)};
  try {
    fit(s, Kernel::cubic(), Bounds::uniform(2, 0, 1));
    FAIL("expected DuplicateExactNodeConflict");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDuplicateExactNodeConflict);
  }
}

TEST_CASE("hopeless systems are reported") {
  std::mt19937_64 rng(1);
  const auto s = random_samples(rng, 40, 1, 0.0);
  try {
    fit(s, Kernel::gaussian(1.0), Bounds::uniform(1, -2, 2));
    FAIL("expected SingularInterpolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingularInterpolation);
  }
}

TEST_CASE("observations outside the box are rejected") {
  const std::vector<SurrogateSample> s{exact({1.5}, 1.0)};
  try {
    fit(s, Kernel::cubic(), Bounds::uniform(1, 0, 1));
    FAIL("expected BoundViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBoundViolation);
  }
}

TEST_CASE("constant data gives a constant surrogate") {
  std::mt19937_64 rng(2);
  auto s = random_samples(rng, 15, 4, 0.0);
  for (auto& x : s) x.value = 3.25;
  for (const Kernel& k : {Kernel::gaussian(10.0), Kernel::multiquadric(1.0), Kernel::cubic()}) {
    const Surrogate f = fit(s, k, Bounds::uniform(4, -2, 2));
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 20; ++i) {
      const double x[] = {u(rng), u(rng), u(rng), u(rng)};
      CHECK(f.eval(x) == doctest::Approx(3.25).epsilon(1e-8));
    }
  }
}

TEST_CASE("tail degrees") {
  CHECK(Kernel::cubic().default_tail_degree() == 1);
  CHECK(Kernel::thin_plate().default_tail_degree() == 1);
  CHECK(Kernel::linear().default_tail_degree() == 1);
  CHECK(Kernel::gaussian(1).default_tail_degree() == 0);
  CHECK(Kernel::multiquadric(1).default_tail_degree() == 0);
  // Two points in 2-D cannot carry an affine tail.
  const std::vector<SurrogateSample> s{exact({0.0, 0.0}, 1.0), exact({1.0, 1.0}, 2.0)};
  CHECK(fit(s, Kernel::cubic(), Bounds::uniform(2, 0, 1)).tail_degree() == 0);
}

TEST_CASE("merit") {
  std::vector<SurrogateSample> s{exact({0.0}, 1.0), exact({1.0}, 1.0)};
  const Surrogate f = fit(s, Kernel::cubic(), Bounds::uniform(1, 0, 1));

  SUBCASE("zero weight is the surrogate") {
    for (double x : {0.1, 0.4, 0.77}) {
      const double p[] = {x};
      CHECK(merit(f, p, 0.0) == f.eval(p));
    }
  }
  SUBCASE("at a center the distance term vanishes") {
    const double p[] = {1.0};
    CHECK(merit(f, p, 5.0) == doctest::Approx(f.eval(p)));
  }
  SUBCASE("flat surrogate: minimum at the midpoint") {
    double best_x = -1.0, best = 1e300;
    for (int i = 0; i <= 1000; ++i) {
      const double p[] = {i / 1000.0};
      const double m = merit(f, p, 1.0);
      if (m < best) {
        best = m;
        best_x = p[0];
      }
    }
    CHECK(best_x == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("min_distance") {
  const std::vector<std::vector<double>> c{{0.0, 0.0}, {1.0, 1.0}};
  const double p[] = {0.0, 1.0};
  CHECK(min_distance(p, c) == doctest::Approx(1.0));
  CHECK(std::isinf(min_distance(p, {})));
}

TEST_CASE("weight schedule") {
  const WeightSchedule w;
  bool has_zero = false;
  for (double v : w.cycle()) {
    CHECK(v >= 0.0);
    has_zero = has_zero || v == 0.0;
  }
  CHECK(has_zero);
  CHECK(w.relative(0) == w.relative(w.cycle().size()));
  CHECK(w.weight(0, 4.0) == 4.0 * w.relative(0));
  CHECK_THROWS_AS(WeightSchedule({1.0, 0.5}), Error);
  CHECK_THROWS_AS(WeightSchedule({1.0, -1.0, 0.0}), Error);
  CHECK_THROWS_AS(WeightSchedule(std::vector<double>{}), Error);
}

TEST_CASE("kernel text") {
  CHECK(Kernel::parse("cubic").family == KernelFamily::kCubic);
  CHECK(Kernel::parse("thin-plate").family == KernelFamily::kThinPlate);
  CHECK(Kernel::parse("gaussian:2.5").gamma == 2.5);
  CHECK(Kernel::parse("multiquadric").family == KernelFamily::kMultiquadric);
  CHECK_THROWS_AS(Kernel::parse("gaussian:0"), Error);
  CHECK_THROWS_AS(Kernel::parse("cubic:3"), Error);
  CHECK_THROWS_AS(Kernel::parse("bessel"), Error);
  CHECK(Kernel::gaussian(2)(0.0) == 1.0);
  CHECK(Kernel::cubic()(2.0) == 8.0);
  CHECK(Kernel::thin_plate()(0.0) == 0.0);
}
