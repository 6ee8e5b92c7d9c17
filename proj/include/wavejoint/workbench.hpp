#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wavejoint/baselines.hpp"
#include "wavejoint/joint_model.hpp"
#include "wavejoint/optimizer.hpp"
#include "wavejoint/stiffness_oracle.hpp"

namespace wavejoint {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Overrides like {"l_t": [15, 25], "alpha": [0, 12]} applied on top of `base`.
/// Throws Error(kInvalidArgument) on unknown names or malformed ranges.
Bounds bounds_from_json(const nlohmann::json& j, const Bounds& base = Bounds::joint_defaults());
nlohmann::json bounds_to_json(const Bounds& b);

// ---- observation store ------------------------------------------------------

struct StoreRecord {
  JointConfig config;
  std::optional<StiffnessTriple> stiffness;  // empty when failed
  Fidelity fidelity;
  std::string run_id;

  bool failed() const { return !stiffness.has_value(); }
  friend bool operator==(const StoreRecord&, const StoreRecord&) = default;
};

struct StoreMeta {
  Bounds bounds = Bounds::joint_defaults();
  Material material;
  int exact_mesh_density = kExactMeshDensity;
  int noisy_mesh_density = kNoisyMeshDensity;
  std::uint64_t seed = 0;
  double noise_cap = kDefaultNoiseCap;
  std::string created;  // sidecar only; never part of the data file
};

inline constexpr const char* kStoreHeader = "l_t,n_r,h_t,t_h,alpha,k_xi,k_eta,k_zeta,fidelity,failed,run_id";

/// Append-only CSV table with a JSON sidecar at "<path>.meta.json".
class ObservationStore {
 public:
  /// Creates (or truncates) the table and writes the sidecar.
  static ObservationStore create(const std::filesystem::path& path, const StoreMeta& meta);
  /// Reads the table; a missing sidecar gives default metadata.
  static ObservationStore open(const std::filesystem::path& path);

  /// Appends one row to the file immediately.
  void append(const StoreRecord& r);

  const std::vector<StoreRecord>& records() const { return records_; }
  const StoreMeta& meta() const { return meta_; }
  const std::filesystem::path& path() const { return path_; }

  /// Successful rows only.
  Dataset dataset() const;
  /// Rows as optimizer warm-start samples with values residual(k, target).
  std::vector<WarmSample> warm_samples(const StiffnessTriple& target) const;

 private:
  std::filesystem::path path_;
  StoreMeta meta_;
  std::vector<StoreRecord> records_;
};

std::string store_row(const StoreRecord& r);
StoreRecord parse_store_row(const std::string& line);
/// Throws Error(kIo) naming the path.
std::vector<StoreRecord> read_store_rows(const std::filesystem::path& path);

// ---- experiments ------------------------------------------------------------

struct BenchContext {
  Bounds bounds = Bounds::joint_defaults();
  Material material;
  Fidelity fidelity = Fidelity::exact();
  OptimizerSettings optimizer;
  NetHyper net;
};

/// Latin hypercube configs evaluated through the oracle at `fidelity`.
std::vector<StoreRecord> evaluate_design(const BenchContext& ctx, std::size_t n, std::uint64_t seed,
                                         const std::string& run_id);
ObservationStore generate_dataset(const std::filesystem::path& path, const BenchContext& ctx, std::size_t n,
                                  std::uint64_t seed);

/// Uniformly drawn in-bounds configs (integrality respected).
std::vector<JointConfig> random_configs(const Bounds& b, std::size_t n, std::uint64_t seed);

struct Target {
  JointConfig config;
  StiffnessTriple stiffness;
};

/// Exact-oracle stiffness of each config; configs that fail are skipped.
std::vector<Target> make_targets(const std::vector<JointConfig>& configs, const Material& m);
/// n reachable targets from random in-bounds configs.
std::vector<Target> reachable_targets(const Bounds& b, const Material& m, std::size_t n, std::uint64_t seed);

struct RecoveryRow {
  Target target;
  RunReport report;
};

std::vector<RecoveryRow> run_recovery_benchmark(const std::vector<Target>& targets, const ObservationStore* warm,
                                                const StopRule& stop, std::uint64_t seed, const BenchContext& ctx);

struct ResidualCurve {
  std::string method;
  std::size_t size = 0;    // dataset / init size
  std::size_t budget = 0;  // 0 for zero-shot curves
  std::vector<double> residuals;  // per target, in target order

  std::vector<double> sorted() const;
  double median() const;
};

struct ZeroShotEval {
  std::vector<Target> targets;
  std::vector<ResidualCurve> curves;    // nearest-neighbor and net per size
  std::vector<ResidualCurve> brute_force;  // dataset minima per size
};

ZeroShotEval run_zero_shot_eval(const std::vector<Dataset>& datasets, const std::vector<Target>& targets,
                                const BenchContext& ctx);

struct IncrementalEval {
  std::vector<Target> targets;
  std::vector<ResidualCurve> curves;  // optimizer / incremental-net per (size, budget), nearest-neighbor per size
  std::size_t max_evaluations = 0;    // largest oracle count seen in any run
};

/// Runs each method once at the largest budget; smaller budgets read the
/// running minimum of the same run after that many evaluations.
IncrementalEval run_incremental_eval(const std::vector<Dataset>& init_sets, const std::vector<Target>& targets,
                                     const std::vector<std::size_t>& budgets, std::uint64_t seed,
                                     const BenchContext& ctx);

struct HeatmapTable {
  std::string name;     // "xi_eta", "xi_zeta", "eta_zeta"
  int a = 0, b = 1;     // stiffness component indices
  struct Cell {
    double ka, kb, d_closest, inv_distance;
  };
  std::vector<Cell> cells;  // resolution^2, row-major in (ka, kb)
};

inline constexpr double kHeatmapEpsilon = 1e-6;

/// Log-spaced grid spanning the stored range of each component. Distance is
/// Euclidean in the pair plane, each axis relative to the grid value.
/// Throws Error(kEmptyDataset).
std::vector<HeatmapTable> export_reachability(const std::vector<StiffnessTriple>& stored, int resolution);

// ---- experiment specs -------------------------------------------------------

/// Bounds, material, fidelity, kernel and net settings shared by every spec kind.
BenchContext context_from_json(const nlohmann::json& spec);

/// Runs an experiment described by JSON and writes its CSV files into
/// `out_dir`. Returns a summary; wall-clock numbers go to *_timing.csv only.
nlohmann::json run_experiment(const nlohmann::json& spec, const std::filesystem::path& out_dir);

}  // namespace wavejoint
