#include "wavejoint/workbench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "wavejoint/errors.hpp"

namespace wavejoint {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& text, const char* what) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kIo, std::string("malformed ") + what + " '" + text + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return os;
}

std::string join(std::span<const double> xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format_double(xs[i]);
  }
  return out;
}

std::string join_k(const std::optional<StiffnessTriple>& k) {
  if (!k) return ",,";
  const auto a = k->to_array();
  return join(a);
}

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Bounds bounds_from_json(const json& j, const Bounds& base) {
  if (j.is_null()) return base;
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "bounds must be a JSON object");
  Bounds b = base;
  for (const auto& [name, range] : j.items()) {
    std::optional<std::size_t> index;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b[i].name == name) index = i;
    }
    if (!index) throw Error(ErrorCode::kInvalidArgument, "unknown variable '" + name + "' in bounds");
    if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number()) {
      throw Error(ErrorCode::kInvalidArgument, "bounds for '" + name + "' must be [lower, upper]");
    }
    b = b.with(*index, range[0].get<double>(), range[1].get<double>());
  }
  return b;
}

json bounds_to_json(const Bounds& b) {
  json j = json::object();
  for (const auto& v : b.variables()) j[v.name] = {{"lower", v.lower}, {"upper", v.upper}, {"integral", v.integral}};
  return j;
}

// ---- store -------------------------------------------------------------------

std::string store_row(const StoreRecord& r) {
  if (r.run_id.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "run id must not contain commas or newlines");
  }
  const auto x = r.config.to_array();
  return join(x) + "," + join_k(r.stiffness) + "," + r.fidelity.to_string() + "," + (r.failed() ? "1" : "0") + "," +
         r.run_id;
}

StoreRecord parse_store_row(const std::string& line) {
  const auto f = split(line, ',');
  if (f.size() != 11) throw Error(ErrorCode::kIo, "store row needs 11 fields: '" + line + "'");
  StoreRecord r;
  std::array<double, kJointDims> x{};
  for (std::size_t i = 0; i < kJointDims; ++i) x[i] = parse_double(f[i], "config value");
  r.config = JointConfig::from_span(x);
  const bool failed = f[9] == "1";
  if (!failed && f[9] != "0") throw Error(ErrorCode::kIo, "failed flag must be 0 or 1: '" + line + "'");
  if (!failed) {
    r.stiffness = StiffnessTriple{parse_double(f[5], "stiffness"), parse_double(f[6], "stiffness"),
                                  parse_double(f[7], "stiffness")};
  } else if (!f[5].empty() || !f[6].empty() || !f[7].empty()) {
    throw Error(ErrorCode::kIo, "failed row carries stiffness: '" + line + "'");
  }
  try {
    r.fidelity = Fidelity::parse(f[8]);
  } catch (const Error& e) {
    throw Error(ErrorCode::kIo, e.what());
  }
  r.run_id = f[10];
  return r;
}

std::vector<StoreRecord> read_store_rows(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot read store " + path.string());
  std::string line;
  if (!std::getline(is, line) || split(line, ',') != split(kStoreHeader, ',')) {
    throw Error(ErrorCode::kIo, "store " + path.string() + " has a missing or unexpected header");
  }
  std::vector<StoreRecord> out;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    try {
      out.push_back(parse_store_row(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
    }
  }
  return out;
}

namespace {

fs::path sidecar_path(const fs::path& path) { return fs::path(path.string() + ".meta.json"); }

json meta_to_json(const StoreMeta& m) {
  return {{"bounds", bounds_to_json(m.bounds)},
          {"material",
           {{"young_modulus_gpa", m.material.young_modulus_gpa},
            {"density_g_cm3", m.material.density_g_cm3},
            {"poisson_ratio", m.material.poisson_ratio}}},
          {"mesh_density", {{"exact", m.exact_mesh_density}, {"noisy", m.noisy_mesh_density}}},
          {"seed", m.seed},
          {"noise_cap", m.noise_cap},
          {"created", m.created}};
}

Material material_from_json(const json& j, Material base = {}) {
  if (j.is_null()) return base;
  base.young_modulus_gpa = j.value("young_modulus_gpa", base.young_modulus_gpa);
  base.density_g_cm3 = j.value("density_g_cm3", base.density_g_cm3);
  base.poisson_ratio = j.value("poisson_ratio", base.poisson_ratio);
  base.check();
  return base;
}

StoreMeta meta_from_json(const json& j) {
  StoreMeta m;
  if (j.contains("bounds")) {
    std::vector<VariableBounds> vars;
    const json& jb = j.at("bounds");
    const Bounds defaults = Bounds::joint_defaults();
    for (const auto& v : defaults.variables()) {
      const auto it = jb.find(v.name);
      if (it == jb.end()) {
        vars.push_back(v);
        continue;
      }
      vars.push_back({v.name, it->value("lower", v.lower), it->value("upper", v.upper), it->value("integral", v.integral)});
    }
    m.bounds = Bounds(vars);
  }
  m.material = material_from_json(j.value("material", json()));
  if (j.contains("mesh_density")) {
    const json& md = j.at("mesh_density");
    m.exact_mesh_density = md.value("exact", kExactMeshDensity);
    m.noisy_mesh_density = md.value("noisy", kNoisyMeshDensity);
  }
  m.seed = j.value("seed", std::uint64_t{0});
  m.noise_cap = j.value("noise_cap", kDefaultNoiseCap);
  m.created = j.value("created", std::string());
  return m;
}

}  // namespace

ObservationStore ObservationStore::create(const fs::path& path, const StoreMeta& meta) {
  ObservationStore s;
  s.path_ = path;
  s.meta_ = meta;
  if (s.meta_.created.empty()) s.meta_.created = now_iso8601();
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  auto os = open_out(path);
  os << kStoreHeader << '\n';
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  auto side = open_out(sidecar_path(path));
  side << meta_to_json(s.meta_).dump(2) << '\n';
  return s;
}

ObservationStore ObservationStore::open(const fs::path& path) {
  ObservationStore s;
  s.path_ = path;
  s.records_ = read_store_rows(path);
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    std::ifstream is(side);
    try {
      s.meta_ = meta_from_json(json::parse(is));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kIo, "malformed sidecar " + side.string() + ": " + e.what());
    }
  }
  return s;
}

void ObservationStore::append(const StoreRecord& r) {
  const std::string line = store_row(r);
  std::ofstream os(path_, std::ios::binary | std::ios::app);
  os << line << '\n';
  if (!os) throw Error(ErrorCode::kIo, "cannot append to " + path_.string());
  records_.push_back(r);
}

Dataset ObservationStore::dataset() const {
  Dataset d;
  for (const auto& r : records_) {
    if (!r.failed()) d.add({r.config, *r.stiffness, r.fidelity});
  }
  return d;
}

std::vector<WarmSample> ObservationStore::warm_samples(const StiffnessTriple& target) const {
  std::vector<WarmSample> out;
  for (const auto& r : records_) {
    const auto x = r.config.to_array();
    WarmSample w{{x.begin(), x.end()}, std::nullopt, r.fidelity, r.stiffness};
    if (r.stiffness) w.value = residual(*r.stiffness, target);
    out.push_back(std::move(w));
  }
  return out;
}

// ---- experiments -----------------------------------------------------------

std::vector<StoreRecord> evaluate_design(const BenchContext& ctx, std::size_t n, std::uint64_t seed,
                                         const std::string& run_id) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "dataset size must be >= 1");
  std::vector<StoreRecord> out;
  const auto configs = initial_joint_design(ctx.bounds, n, seed);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const OracleOutcome o = evaluate_at(configs[i], ctx.material, ctx.fidelity, mix_seed(seed, i));
    out.push_back({configs[i], o.stiffness, ctx.fidelity, run_id});
  }
  return out;
}

ObservationStore generate_dataset(const fs::path& path, const BenchContext& ctx, std::size_t n,
                                  std::uint64_t seed) {
  StoreMeta meta;
  meta.bounds = ctx.bounds;
  meta.material = ctx.material;
  meta.seed = seed;
  meta.noise_cap = ctx.fidelity.is_exact() ? kDefaultNoiseCap : ctx.fidelity.noise_cap;
  const auto rows = evaluate_design(ctx, n, seed, "gen-" + std::to_string(seed));
  ObservationStore store = ObservationStore::create(path, meta);
  for (const auto& r : rows) store.append(r);
  return store;
}

std::vector<JointConfig> random_configs(const Bounds& b, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<JointConfig> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (b[k].integral) {
        std::uniform_int_distribution<long> pick(std::lround(std::ceil(b[k].lower)),
                                                 std::lround(std::floor(b[k].upper)));
        x[k] = static_cast<double>(pick(rng));
      } else {
        x[k] = b[k].lower + unif(rng) * (b[k].upper - b[k].lower);
      }
    }
    out.push_back(JointConfig::from_span(x));
  }
  return out;
}

std::vector<Target> make_targets(const std::vector<JointConfig>& configs, const Material& m) {
  std::vector<Target> out;
  for (const auto& c : configs) {
    const OracleOutcome o = evaluate_stiffness(c, m, kExactMeshDensity);
    if (o.ok()) out.push_back({c, *o.stiffness});
  }
  return out;
}

std::vector<Target> reachable_targets(const Bounds& b, const Material& m, std::size_t n, std::uint64_t seed) {
  std::vector<Target> out;
  for (std::uint64_t round = 0; out.size() < n; ++round) {
    if (round > 100) throw Error(ErrorCode::kInternal, "could not draw enough reachable targets");
    for (const auto& t : make_targets(random_configs(b, n - out.size(), mix_seed(seed, round)), m)) {
      out.push_back(t);
    }
  }
  return out;
}

std::vector<RecoveryRow> run_recovery_benchmark(const std::vector<Target>& targets, const ObservationStore* warm,
                                                const StopRule& stop, std::uint64_t seed, const BenchContext& ctx) {
  std::vector<RecoveryRow> rows;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Problem p = Problem::joint(targets[i].stiffness, ctx.material, ctx.bounds, ctx.fidelity);
    std::vector<WarmSample> samples;
    if (warm) samples = warm->warm_samples(targets[i].stiffness);
    rows.push_back({targets[i], minimize(p, stop, samples, mix_seed(seed, i), ctx.optimizer)});
  }
  return rows;
}

std::vector<double> ResidualCurve::sorted() const {
  std::vector<double> s = residuals;
  std::sort(s.begin(), s.end());
  return s;
}

double ResidualCurve::median() const {
  if (residuals.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto s = sorted();
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

namespace {

double exact_residual(const JointConfig& c, const Target& t, const Material& m) {
  const OracleOutcome o = evaluate_stiffness(c, m, kExactMeshDensity);
  return o.ok() ? residual(*o.stiffness, t.stiffness) : std::numeric_limits<double>::infinity();
}

}  // namespace

ZeroShotEval run_zero_shot_eval(const std::vector<Dataset>& datasets, const std::vector<Target>& targets,
                                const BenchContext& ctx) {
  ZeroShotEval out;
  out.targets = targets;
  for (const auto& d : datasets) {
    if (d.empty()) throw Error(ErrorCode::kEmptyDataset, "zero-shot evaluation on an empty dataset");
    ResidualCurve nn{"nearest-neighbor", d.size(), 0, {}};
    ResidualCurve net_curve{"inverse-net", d.size(), 0, {}};
    ResidualCurve brute{"dataset-minimum", d.size(), 0, {}};
    const InverseNet net = train_inverse_net(d, ctx.net);
    for (const auto& t : targets) {
      const NearestResult r = nearest_neighbor(d, t.stiffness);
      nn.residuals.push_back(r.residual);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& o : d) best = std::min(best, residual(o.stiffness, t.stiffness));
      brute.residuals.push_back(best);
      net_curve.residuals.push_back(exact_residual(zero_shot_net(net, t.stiffness, ctx.bounds).config, t, ctx.material));
    }
    out.curves.push_back(std::move(nn));
    out.curves.push_back(std::move(net_curve));
    out.brute_force.push_back(std::move(brute));
  }
  return out;
}

IncrementalEval run_incremental_eval(const std::vector<Dataset>& init_sets, const std::vector<Target>& targets,
                                     const std::vector<std::size_t>& budgets, std::uint64_t seed,
                                     const BenchContext& ctx) {
  if (budgets.empty()) throw Error(ErrorCode::kInvalidArgument, "need at least one budget");
  const std::size_t max_budget = *std::max_element(budgets.begin(), budgets.end());
  if (max_budget < 1) throw Error(ErrorCode::kInvalidArgument, "budgets must be >= 1");
  IncrementalEval out;
  out.targets = targets;
  const StiffnessOracle oracle = [&ctx](const JointConfig& c) {
    return evaluate_at(c, ctx.material, ctx.fidelity, 0);
  };
  auto at_budget = [](const std::vector<double>& running_min, std::size_t b) {
    if (running_min.empty()) return std::numeric_limits<double>::infinity();
    return running_min[std::min(b, running_min.size()) - 1];
  };

  for (std::size_t s = 0; s < init_sets.size(); ++s) {
    const Dataset& d = init_sets[s];
    if (d.empty()) throw Error(ErrorCode::kEmptyDataset, "incremental evaluation on an empty dataset");
    std::vector<ResidualCurve> opt, inc;
    for (std::size_t b : budgets) {
      opt.push_back({"optimizer", d.size(), b, {}});
      inc.push_back({"incremental-net", d.size(), b, {}});
    }
    ResidualCurve nn{"nearest-neighbor", d.size(), 0, {}};

    for (std::size_t i = 0; i < targets.size(); ++i) {
      const Target& t = targets[i];
      const std::uint64_t run_seed = mix_seed(seed, s * 1000 + i);
      nn.residuals.push_back(nearest_neighbor(d, t.stiffness).residual);

      std::vector<WarmSample> warm;
      for (const auto& o : d) {
        const auto x = o.config.to_array();
        warm.push_back({{x.begin(), x.end()}, residual(o.stiffness, t.stiffness), o.fidelity, o.stiffness});
      }
      const Problem p = Problem::joint(t.stiffness, ctx.material, ctx.bounds, ctx.fidelity);
      const RunReport r = minimize(p, StopRule{max_budget, 0.0, 0}, warm, run_seed, ctx.optimizer);
      out.max_evaluations = std::max(out.max_evaluations, r.evaluations());

      IncrementalOptions io;
      io.hyper = ctx.net;
      io.seed = run_seed;
      const IncrementalResult ir = incremental_net(d, t.stiffness, oracle, max_budget, 0.0, ctx.bounds, io);
      out.max_evaluations = std::max(out.max_evaluations, ir.evaluations);
      const auto ir_min = ir.best_trace();
      for (std::size_t k = 0; k < budgets.size(); ++k) {
        opt[k].residuals.push_back(std::min(r.initial_best, at_budget(r.trace, budgets[k])));
        inc[k].residuals.push_back(at_budget(ir_min, budgets[k]));
      }
    }
    for (auto& c : opt) out.curves.push_back(std::move(c));
    for (auto& c : inc) out.curves.push_back(std::move(c));
    out.curves.push_back(std::move(nn));
  }
  return out;
}

std::vector<HeatmapTable> export_reachability(const std::vector<StiffnessTriple>& stored, int resolution) {
  if (stored.empty()) throw Error(ErrorCode::kEmptyDataset, "reachability map needs stored stiffness values");
  if (resolution < 2) throw Error(ErrorCode::kInvalidArgument, "heatmap resolution must be >= 2");
  std::array<double, 3> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(0.0);
  for (const auto& k : stored) {
    const auto a = k.to_array();
    for (int i = 0; i < 3; ++i) {
      if (!(a[i] > 0.0)) throw Error(ErrorCode::kDomain, "stored stiffness must be positive");
      lo[i] = std::min(lo[i], a[i]);
      hi[i] = std::max(hi[i], a[i]);
    }
  }
  auto axis = [&](int c) {
    std::vector<double> g(resolution);
    const double l0 = std::log(lo[c]), l1 = std::log(hi[c]);
    for (int i = 0; i < resolution; ++i) g[i] = std::exp(l0 + (l1 - l0) * i / (resolution - 1));
    return g;
  };

  const std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
  const std::array<const char*, 3> names{"xi_eta", "xi_zeta", "eta_zeta"};
  std::vector<HeatmapTable> out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    HeatmapTable t;
    t.name = names[p];
    t.a = pairs[p].first;
    t.b = pairs[p].second;
    const auto ga = axis(t.a), gb = axis(t.b);
    for (double x : ga) {
      for (double y : gb) {
        double d2 = std::numeric_limits<double>::infinity();
        for (const auto& k : stored) {
          const auto a = k.to_array();
          const double u = (a[t.a] - x) / x, v = (a[t.b] - y) / y;
          d2 = std::min(d2, u * u + v * v);
        }
        const double d = std::sqrt(d2);
        t.cells.push_back({x, y, d, 1.0 / std::max(d, kHeatmapEpsilon)});
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---- spec driver -------------------------------------------------------------

namespace {

constexpr std::uint64_t kTargetStream = 0x7a7;
constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kRunStream = 0x2b;

template <typename T>
T require(const json& spec, const char* key) {
  if (!spec.contains(key)) throw Error(ErrorCode::kInvalidArgument, std::string("experiment spec needs '") + key + "'");
  try {
    return spec.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("experiment spec field '") + key + "' has the wrong type");
  }
}

template <typename T>
T optional_field(const json& spec, const char* key, T fallback) {
  if (!spec.contains(key)) return fallback;
  try {
    return spec.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("experiment spec field '") + key + "' has the wrong type");
  }
}

}  // namespace

BenchContext context_from_json(const json& spec) {
  BenchContext ctx;
  ctx.bounds = bounds_from_json(spec.value("bounds", json()));
  ctx.material = material_from_json(spec.value("material", json()));
  const double cap = optional_field<double>(spec, "noise_cap", kDefaultNoiseCap);
  const std::string fid = optional_field<std::string>(spec, "fidelity", "exact");
  if (fid == "exact") {
    ctx.fidelity = Fidelity::exact();
  } else if (fid == "noisy") {
    ctx.fidelity = Fidelity::noisy(cap);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "fidelity must be 'exact' or 'noisy'");
  }
  if (spec.contains("kernel")) ctx.optimizer.kernel = Kernel::parse(require<std::string>(spec, "kernel"));
  if (spec.contains("net_epochs")) ctx.net.epochs = require<int>(spec, "net_epochs");
  ctx.net.bounds = ctx.bounds;
  return ctx;
}

namespace {

fs::path existing_file(const std::string& p) {
  if (!fs::exists(p)) throw Error(ErrorCode::kIo, "referenced file does not exist: " + p);
  return p;
}

JointConfig config_from_json(const json& j) {
  if (!j.is_array() || j.size() != kJointDims) {
    throw Error(ErrorCode::kInvalidArgument, "a config is an array of 5 numbers");
  }
  std::array<double, kJointDims> x{};
  for (std::size_t i = 0; i < kJointDims; ++i) x[i] = j[i].get<double>();
  return JointConfig::from_span(x);
}

std::vector<Target> targets_from(const json& spec, const BenchContext& ctx, std::uint64_t seed,
                                 std::size_t default_n) {
  if (spec.contains("targets")) {
    std::vector<JointConfig> configs;
    for (const auto& t : spec["targets"]) {
      const JointConfig c = config_from_json(t);
      const auto v = validate_config(c, ctx.bounds);
      if (!v.empty()) throw Error(ErrorCode::kBoundViolation, "target config out of bounds: " + v.front().describe());
      configs.push_back(c);
    }
    auto out = make_targets(configs, ctx.material);
    if (out.size() != configs.size()) throw Error(ErrorCode::kSingularSystem, "a target config failed in the oracle");
    return out;
  }
  const auto n = optional_field<std::size_t>(spec, "n_targets", default_n);
  return reachable_targets(ctx.bounds, ctx.material, n, mix_seed(seed, kTargetStream));
}

/// Stores named by the spec, otherwise in-memory designs of the given sizes.
std::vector<Dataset> datasets_from(const json& spec, const char* size_key, const std::vector<std::size_t>& fallback,
                                   const BenchContext& ctx, std::uint64_t seed) {
  std::vector<Dataset> out;
  if (spec.contains("stores")) {
    for (const auto& p : spec["stores"]) out.push_back(ObservationStore::open(existing_file(p.get<std::string>())).dataset());
    return out;
  }
  BenchContext exact = ctx;
  exact.fidelity = Fidelity::exact();
  for (std::size_t n : optional_field<std::vector<std::size_t>>(spec, size_key, fallback)) {
    Dataset d;
    for (const auto& r : evaluate_design(exact, n, mix_seed(seed, kDataStream + n), "design")) {
      if (!r.failed()) d.add({r.config, *r.stiffness, r.fidelity});
    }
    out.push_back(std::move(d));
  }
  return out;
}

void write_curves(const fs::path& path, const std::vector<ResidualCurve>& curves, bool with_budget) {
  auto os = open_out(path);
  os << (with_budget ? "method,size,budget,rank,residual\n" : "method,size,rank,residual\n");
  for (const auto& c : curves) {
    const auto s = c.sorted();
    for (std::size_t i = 0; i < s.size(); ++i) {
      os << c.method << ',' << c.size << ',';
      if (with_budget) os << c.budget << ',';
      os << i + 1 << ',' << format_double(s[i]) << '\n';
    }
  }
}

json curve_summary(const std::vector<ResidualCurve>& curves) {
  json arr = json::array();
  for (const auto& c : curves) {
    arr.push_back({{"method", c.method}, {"size", c.size}, {"budget", c.budget}, {"median", c.median()}});
  }
  return arr;
}

std::string config_csv(const JointConfig& c) {
  const auto a = c.to_array();
  return join(a);
}

json run_recover(const json& spec, const fs::path& out, std::uint64_t seed, const BenchContext& ctx) {
  const auto targets = targets_from(spec, ctx, seed, 5);
  const StopRule stop{optional_field<std::size_t>(spec, "budget", 200),
                      optional_field<double>(spec, "threshold", 1e-5),
                      optional_field<std::size_t>(spec, "stagnation", 0)};
  std::optional<ObservationStore> warm;
  if (spec.contains("store")) warm = ObservationStore::open(existing_file(require<std::string>(spec, "store")));
  const auto rows = run_recovery_benchmark(targets, warm ? &*warm : nullptr, stop, mix_seed(seed, kRunStream), ctx);

  auto table = open_out(out / "recovery.csv");
  table << "target_id,t_l_t,t_n_r,t_h_t,t_t_h,t_alpha,f_l_t,f_n_r,f_h_t,f_t_h,f_alpha,"
           "t_k_xi,t_k_eta,t_k_zeta,f_k_xi,f_k_eta,f_k_zeta,residual,valid,evaluations,failed_evaluations,"
           "warm_used,warm_filtered,stop_reason\n";
  auto timing = open_out(out / "recovery_timing.csv");
  timing << "target_id,wall_seconds\n";
  auto traces = open_out(out / "traces.csv");
  traces << "target_id,evaluation,best_residual\n";
  json runs = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].report;
    const auto best = r.best_config();
    table << i << ',' << config_csv(rows[i].target.config) << ','
          << (best ? config_csv(*best) : std::string(",,,,")) << ',' << join_k(rows[i].target.stiffness) << ','
          << join_k(r.best_stiffness) << ',' << format_double(r.best_value) << ',' << (r.best_valid ? 1 : 0) << ','
          << r.evaluations() << ',' << r.failed_evaluations << ',' << r.warm_used << ',' << r.warm_filtered << ','
          << stop_reason_name(r.stop_reason) << '\n';
    timing << i << ',' << format_double(r.wall_seconds) << '\n';
    for (std::size_t e = 0; e < r.trace.size(); ++e) traces << i << ',' << e + 1 << ',' << format_double(r.trace[e]) << '\n';
    const auto reach = r.evaluations_to_reach(1e-2);
    runs.push_back({{"target_id", i},
                    {"residual", r.best_value},
                    {"evaluations", r.evaluations()},
                    {"evaluations_to_1e-2", reach ? json(*reach) : json(nullptr)},
                    {"stop_reason", stop_reason_name(r.stop_reason)}});
  }
  return {{"runs", runs}};
}

json run_zero_shot(const json& spec, const fs::path& out, std::uint64_t seed, const BenchContext& ctx) {
  const auto targets = targets_from(spec, ctx, seed, 25);
  const auto datasets = datasets_from(spec, "dataset_sizes", {1000, 2000}, ctx, seed);
  const auto eval = run_zero_shot_eval(datasets, targets, ctx);
  write_curves(out / "zero_shot_cdf.csv", eval.curves, false);
  auto detail = open_out(out / "zero_shot.csv");
  detail << "method,size,target_id,residual\n";
  for (const auto& c : eval.curves) {
    for (std::size_t i = 0; i < c.residuals.size(); ++i) {
      detail << c.method << ',' << c.size << ',' << i << ',' << format_double(c.residuals[i]) << '\n';
    }
  }
  return {{"curves", curve_summary(eval.curves)}};
}

json run_incremental(const json& spec, const fs::path& out, std::uint64_t seed, const BenchContext& ctx) {
  const auto targets = targets_from(spec, ctx, seed, optional_field<std::size_t>(spec, "n_instances", 15));
  const auto sets = datasets_from(spec, "init_sizes", {25, 50, 100, 200}, ctx, seed);
  const auto budgets = optional_field<std::vector<std::size_t>>(spec, "budgets", {5, 10, 20});
  const auto eval = run_incremental_eval(sets, targets, budgets, mix_seed(seed, kRunStream), ctx);
  write_curves(out / "incremental_cdf.csv", eval.curves, true);
  auto detail = open_out(out / "incremental.csv");
  detail << "method,size,budget,instance,residual\n";
  for (const auto& c : eval.curves) {
    for (std::size_t i = 0; i < c.residuals.size(); ++i) {
      detail << c.method << ',' << c.size << ',' << c.budget << ',' << i << ',' << format_double(c.residuals[i]) << '\n';
    }
  }
  return {{"curves", curve_summary(eval.curves)}, {"max_evaluations", eval.max_evaluations}};
}

json run_milestone_kind(const json& spec, const fs::path& out, std::uint64_t seed, const BenchContext& ctx) {
  json t = spec;
  if (spec.contains("target")) t["targets"] = json::array({spec["target"]});
  const auto targets = targets_from(t, ctx, seed, 1);
  const Target& target = targets.front();
  std::size_t sims = optional_field<std::size_t>(spec, "sims_per_real", 25);
  std::size_t reals = optional_field<std::size_t>(spec, "max_reals", 10);
  double accept = optional_field<double>(spec, "accept_threshold", 1e-3);
  if (spec.contains("single_shot")) {
    sims = require<std::size_t>(spec, "single_shot");
    reals = 1;
    accept = std::numeric_limits<double>::infinity();
  }
  Problem p = Problem::joint(target.stiffness, ctx.material, ctx.bounds);
  p.noisy_fidelity = Fidelity::noisy(optional_field<double>(spec, "noise_cap", kDefaultNoiseCap));
  std::vector<WarmSample> warm;
  if (spec.contains("store")) {
    warm = ObservationStore::open(existing_file(require<std::string>(spec, "store"))).warm_samples(target.stiffness);
  }
  const RunReport r = run_milestone(p, sims, reals, accept, mix_seed(seed, kRunStream), ctx.optimizer, warm);

  auto os = open_out(out / "milestone.csv");
  os << "milestone,simulations,reals,l_t,n_r,h_t,t_h,alpha,sim_k_xi,sim_k_eta,sim_k_zeta,sim_residual,"
        "real_k_xi,real_k_eta,real_k_zeta,real_residual\n";
  for (std::size_t i = 0; i < r.milestones.size(); ++i) {
    const auto& m = r.milestones[i];
    os << i + 1 << ',' << m.simulations << ',' << m.reals << ',' << join(m.x) << ',' << join_k(m.simulated) << ','
       << format_double(m.simulated_residual) << ',' << join_k(m.real) << ',' << format_double(m.real_residual)
       << '\n';
  }
  auto timing = open_out(out / "milestone_timing.csv");
  timing << "wall_seconds\n" << format_double(r.wall_seconds) << '\n';
  return {{"target", target.config.to_array()},
          {"milestones", r.milestones.size()},
          {"noisy_evaluations", r.noisy_evaluations},
          {"exact_evaluations", r.exact_evaluations},
          {"first_real_residual", r.milestones.empty() ? json(nullptr) : json(r.milestones.front().real_residual)},
          {"final_real_residual", r.milestones.empty() ? json(nullptr) : json(r.milestones.back().real_residual)},
          {"stop_reason", stop_reason_name(r.stop_reason)}};
}

json run_heatmap(const json& spec, const fs::path& out, std::uint64_t seed, const BenchContext& ctx) {
  std::vector<StiffnessTriple> stored;
  if (spec.contains("store")) {
    for (const auto& r : ObservationStore::open(existing_file(require<std::string>(spec, "store"))).records()) {
      if (r.stiffness) stored.push_back(*r.stiffness);
    }
  } else {
    for (const auto& r : evaluate_design(ctx, optional_field<std::size_t>(spec, "n_samples", 500),
                                         mix_seed(seed, kDataStream), "heatmap")) {
      if (r.stiffness) stored.push_back(*r.stiffness);
    }
  }
  const int resolution = optional_field<int>(spec, "resolution", 20);
  const auto tables = export_reachability(stored, resolution);
  const std::array<const char*, 3> comp{"k_xi", "k_eta", "k_zeta"};
  for (const auto& t : tables) {
    auto os = open_out(out / ("heatmap_" + t.name + ".csv"));
    os << comp[t.a] << ',' << comp[t.b] << ",d_closest,inv_distance\n";
    for (const auto& c : t.cells) {
      os << format_double(c.ka) << ',' << format_double(c.kb) << ',' << format_double(c.d_closest) << ','
         << format_double(c.inv_distance) << '\n';
    }
  }
  const json meta = {{"resolution", resolution},
                     {"epsilon", kHeatmapEpsilon},
                     {"grid", "log-spaced over the stored range of each component"},
                     {"distance", "euclidean in the pair plane, each axis relative to the grid value"},
                     {"stored_points", stored.size()}};
  auto os = open_out(out / "heatmap_meta.json");
  os << meta.dump(2) << '\n';
  return meta;
}

json run_gen_data(const json& spec, std::uint64_t seed, const BenchContext& ctx) {
  const auto path = require<std::string>(spec, "store");
  const auto n = require<std::size_t>(spec, "n");
  const auto store = generate_dataset(path, ctx, n, seed);
  std::size_t failed = 0;
  for (const auto& r : store.records()) failed += r.failed() ? 1 : 0;
  return {{"store", path}, {"rows", store.records().size()}, {"failed", failed}};
}

}  // namespace

json run_experiment(const json& spec, const fs::path& out_dir) {
  if (!spec.is_object()) throw Error(ErrorCode::kInvalidArgument, "experiment spec must be a JSON object");
  const auto kind = require<std::string>(spec, "kind");
  const auto seed = require<std::uint64_t>(spec, "seed");
  const BenchContext ctx = context_from_json(spec);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw Error(ErrorCode::kIo, "cannot create output directory " + out_dir.string());

  json result;
  if (kind == "recover") {
    result = run_recover(spec, out_dir, seed, ctx);
  } else if (kind == "zero-shot") {
    result = run_zero_shot(spec, out_dir, seed, ctx);
  } else if (kind == "incremental") {
    result = run_incremental(spec, out_dir, seed, ctx);
  } else if (kind == "milestone") {
    result = run_milestone_kind(spec, out_dir, seed, ctx);
  } else if (kind == "heatmap") {
    result = run_heatmap(spec, out_dir, seed, ctx);
  } else if (kind == "gen-data") {
    result = run_gen_data(spec, seed, ctx);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown experiment kind '" + kind + "'");
  }
  json summary = {{"kind", kind}, {"seed", seed}, {"result", result}};
  auto os = open_out(out_dir / "summary.json");
  os << summary.dump(2) << '\n';
  return summary;
}

}  // namespace wavejoint
