#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "wavejoint/errors.hpp"
#include "wavejoint/workbench.hpp"

using namespace wavejoint;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wavejoint_test_workbench_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

constexpr auto kNoError = static_cast<ErrorCode>(0);

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return kNoError;
}

}  // namespace

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::pow(10.0, u(rng)) * (i % 2 ? -1 : 1);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(12) == "12");
  CHECK(format_double(INFINITY) == "inf");
}

TEST_CASE("store rows") {
  const StoreRecord ok{{20, 4, 10, 0.5, 12}, StiffnessTriple{0.1 / 3, 1e-7, 1234.5}, Fidelity::exact(), "r1"};
  const StoreRecord bad{{21.25, 3, 9, 0.55, 0}, std::nullopt, Fidelity::noisy(0.3), "r2"};
  CHECK(parse_store_row(store_row(ok)) == ok);
  CHECK(parse_store_row(store_row(bad)) == bad);
  CHECK(store_row(bad).find(",,,") != std::string::npos);

  CHECK(code_of([] { parse_store_row("1,2,3"); }) == ErrorCode::kIo);
  CHECK(code_of([] { parse_store_row("20,4,10,0.5,12,x,1,1,exact,0,r"); }) == ErrorCode::kIo);
  CHECK(code_of([] { parse_store_row("20,4,10,0.5,12,1,1,1,exact,2,r"); }) == ErrorCode::kIo);
  CHECK(code_of([] { parse_store_row("20,4,10,0.5,12,1,1,1,exact,1,r"); }) == ErrorCode::kIo);
  CHECK(code_of([] { parse_store_row("20,4,10,0.5,12,1,1,1,bogus,0,r"); }) == ErrorCode::kIo);
  StoreRecord comma = ok;
  comma.run_id = "a,b";
  CHECK(code_of([&] { store_row(comma); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("store file round trip") {
  const fs::path dir = scratch("store");
  const fs::path path = dir / "obs.csv";
  StoreMeta meta;
  meta.seed = 77;
  meta.bounds = Bounds::joint_defaults().with(0, 16, 28);
  auto s = ObservationStore::create(path, meta);
  CHECK(fs::exists(path.string() + ".meta.json"));
  s.append({{20, 4, 10, 0.5, 12}, StiffnessTriple{1, 2, 3}, Fidelity::exact(), "a"});
  s.append({{22, 5, 11, 0.6, 3}, std::nullopt, Fidelity::noisy(0.3), "a"});
  s.append({{18, 3, 9, 0.52, 20}, StiffnessTriple{0.25, 0.5, 0.75}, Fidelity::noisy(0.3), "b"});

  const auto back = ObservationStore::open(path);
  CHECK(back.records() == s.records());
  CHECK(back.meta().seed == 77);
  CHECK(back.meta().bounds[0].lower == 16);
  CHECK(back.meta().bounds[0].upper == 28);
  CHECK(back.dataset().size() == 2);

  // Rewriting the rows gives the same bytes.
  const fs::path copy = dir / "copy.csv";
  auto c = ObservationStore::create(copy, back.meta());
  for (const auto& r : back.records()) c.append(r);
  CHECK(slurp(copy) == slurp(path));

  const StiffnessTriple t{1, 2, 3};
  const auto warm = back.warm_samples(t);
  REQUIRE(warm.size() == 3);
  CHECK(warm[0].value == 0.0);
  CHECK_FALSE(warm[1].value.has_value());
  CHECK(*warm[2].value == doctest::Approx(3 * 0.75 * 0.75));

  std::ofstream(dir / "broken.csv") << "nope\n";
  CHECK(code_of([&] { ObservationStore::open(dir / "broken.csv"); }) == ErrorCode::kIo);
  CHECK(code_of([&] { ObservationStore::open(dir / "missing.csv"); }) == ErrorCode::kIo);
  {
    std::ofstream os(dir / "short.csv");
    os << kStoreHeader << "\n1,2,3\n";
  }
  CHECK(code_of([&] { ObservationStore::open(dir / "short.csv"); }) == ErrorCode::kIo);
}

TEST_CASE("generate_dataset is reproducible") {
  const fs::path dir = scratch("gen");
  BenchContext ctx;
  const auto a = generate_dataset(dir / "a.csv", ctx, 10, 3);
  const auto b = generate_dataset(dir / "b.csv", ctx, 10, 3);
  CHECK(a.records().size() == 10);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  for (const auto& r : a.records()) {
    CHECK(validate_config(r.config, ctx.bounds).empty());
    REQUIRE_FALSE(r.failed());
    // Stored stiffness is what the oracle returns.
    CHECK(evaluate_stiffness(r.config, ctx.material, kExactMeshDensity).stiffness == r.stiffness);
  }
  const auto c = generate_dataset(dir / "c.csv", ctx, 10, 4);
  CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));

  BenchContext noisy = ctx;
  noisy.fidelity = Fidelity::noisy(0.3);
  const auto n = generate_dataset(dir / "n.csv", noisy, 5, 3);
  for (const auto& r : n.records()) CHECK(r.fidelity == Fidelity::noisy(0.3));
}

TEST_CASE("bounds from json") {
  const Bounds b = bounds_from_json(json::parse(R"({"l_t": [16, 25], "alpha": [0, 12]})"));
  CHECK(b[0].lower == 16);
  CHECK(b[0].upper == 25);
  CHECK(b[4].upper == 12);
  CHECK(b[4].integral);
  CHECK(b[1].lower == Bounds::joint_defaults()[1].lower);
  CHECK(bounds_from_json(json()).variables() == Bounds::joint_defaults().variables());
  CHECK(code_of([] { bounds_from_json(json::parse(R"({"width": [1, 2]})")); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { bounds_from_json(json::parse(R"({"l_t": [1]})")); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { bounds_from_json(json::parse(R"({"l_t": [30, 20]})")); }) != kNoError);
  CHECK(code_of([] { bounds_from_json(json::parse("[1, 2]")); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("reachability map") {
  std::vector<StiffnessTriple> stored;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 40; ++i) stored.push_back({0.01 + u(rng), 0.02 * (1 + u(rng)), 1 + 5 * u(rng)});
  const auto maps = export_reachability(stored, 7);
  REQUIRE(maps.size() == 3);
  CHECK(maps[0].name == "xi_eta");
  CHECK(maps[1].name == "xi_zeta");
  CHECK(maps[2].name == "eta_zeta");
  for (const auto& m : maps) {
    CHECK(m.cells.size() == 49);
    for (const auto& c : m.cells) {
      CHECK(c.d_closest >= 0.0);
      CHECK(c.inv_distance == doctest::Approx(1.0 / std::max(c.d_closest, kHeatmapEpsilon)));
    }
  }

  // A stored point that sits on a grid node gives the capped value.
  const std::vector<StiffnessTriple> corner{{1, 10, 100}, {4, 40, 400}};
  const auto cm = export_reachability(corner, 3);
  CHECK(cm[0].cells.front().d_closest < 1e-12);
  CHECK(cm[0].cells.front().inv_distance == 1.0 / kHeatmapEpsilon);
  CHECK(cm[0].cells[4].ka == doctest::Approx(2.0));  // geometric midpoint

  // Scaling every stiffness leaves relative distances unchanged.
  std::vector<StiffnessTriple> doubled;
  for (const auto& k : stored) doubled.push_back({2 * k.k_xi, 2 * k.k_eta, 2 * k.k_zeta});
  const auto dm = export_reachability(doubled, 7);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t i = 0; i < 49; ++i) {
      CHECK(dm[t].cells[i].ka == doctest::Approx(2 * maps[t].cells[i].ka));
      CHECK(dm[t].cells[i].d_closest == doctest::Approx(maps[t].cells[i].d_closest).epsilon(1e-9));
    }
  }

  CHECK(code_of([] { export_reachability({}, 5); }) == ErrorCode::kEmptyDataset);
  CHECK(code_of([&] { export_reachability(stored, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("residual curves") {
  const ResidualCurve c{"m", 10, 0, {3, 1, 2, 4}};
  CHECK(c.median() == 2.5);
  CHECK(c.sorted() == std::vector<double>{1, 2, 3, 4});
  CHECK(std::isnan(ResidualCurve{}.median()));
}

TEST_CASE("targets") {
  const auto t = reachable_targets(Bounds::joint_defaults(), Material{}, 6, 1);
  CHECK(t.size() == 6);
  for (const auto& x : t) {
    CHECK(validate_config(x.config, Bounds::joint_defaults()).empty());
    CHECK(evaluate_stiffness(x.config, Material{}, kExactMeshDensity).stiffness == x.stiffness);
  }
  const auto cfgs = random_configs(Bounds::joint_defaults(), 50, 2);
  CHECK(cfgs == random_configs(Bounds::joint_defaults(), 50, 2));
  for (const auto& c : cfgs) CHECK(validate_config(c, Bounds::joint_defaults()).empty());
}

TEST_CASE("zero-shot evaluation") {
  const BenchContext ctx = [] {
    BenchContext c;
    c.net.epochs = 200;
    return c;
  }();
  Dataset d;
  for (const auto& r : evaluate_design(ctx, 40, 8, "t")) {
    if (!r.failed()) d.add({r.config, *r.stiffness, r.fidelity});
  }
  const auto targets = reachable_targets(ctx.bounds, ctx.material, 5, 3);
  const auto e = run_zero_shot_eval({d}, targets, ctx);
  REQUIRE(e.curves.size() == 2);
  CHECK(e.curves[0].method == "nearest-neighbor");
  CHECK(e.curves[0].residuals == e.brute_force[0].residuals);
  for (double r : e.curves[1].residuals) CHECK(std::isfinite(r));
  CHECK(code_of([&] { run_zero_shot_eval({Dataset{}}, targets, ctx); }) == ErrorCode::kEmptyDataset);
}

TEST_CASE("experiment specs") {
  const fs::path a = scratch("spec_a"), b = scratch("spec_b");
  const json spec = json::parse(R"({"kind": "recover", "seed": 4, "n_targets": 2, "budget": 20})");
  const json sa = run_experiment(spec, a);
  const json sb = run_experiment(spec, b);
  CHECK(sa == sb);
  for (const char* f : {"recovery.csv", "traces.csv", "summary.json"}) {
    INFO(f);
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(fs::exists(a / "recovery_timing.csv"));
  CHECK(sa["result"]["runs"].size() == 2);

  // Recorded stiffness reproduces the recorded residual.
  std::ifstream is(a / "recovery.csv");
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    const StiffnessTriple t{std::stod(f[11]), std::stod(f[12]), std::stod(f[13])};
    const StiffnessTriple k{std::stod(f[14]), std::stod(f[15]), std::stod(f[16])};
    CHECK(residual(k, t) == std::stod(f[17]));
  }

  const fs::path h = scratch("spec_h");
  const json hm = run_experiment(json::parse(R"({"kind": "heatmap", "seed": 1, "n_samples": 30, "resolution": 4})"), h);
  CHECK(hm["result"]["stored_points"] == 30);
  CHECK(fs::exists(h / "heatmap_xi_eta.csv"));
  CHECK(fs::exists(h / "heatmap_meta.json"));

  CHECK(code_of([&] { run_experiment(json::parse(R"({"kind": "dance", "seed": 1})"), h); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { run_experiment(json::parse(R"({"kind": "recover"})"), h); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { run_experiment(json::parse(R"({"kind": "recover", "seed": 1, "fidelity": "fuzzy"})"), h); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([&] {
          run_experiment(json::parse(R"({"kind": "recover", "seed": 1, "store": "/nonexistent/x.csv"})"), h);
        }) == ErrorCode::kIo);
  CHECK(code_of([&] {
          run_experiment(json::parse(R"({"kind": "recover", "seed": 1, "targets": [[40, 4, 10, 0.5, 12]]})"), h);
        }) == ErrorCode::kBoundViolation);
}
