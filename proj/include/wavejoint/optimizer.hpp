#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wavejoint/joint_model.hpp"
#include "wavejoint/rbf_surrogate.hpp"
#include "wavejoint/stiffness_oracle.hpp"

namespace wavejoint {

/// What a black-box objective returns for one point. `ok == false` is a
/// failed evaluation; `value` is then ignored.
struct ObjectiveReply {
  bool ok = false;
  double value = 0.0;
  std::optional<StiffnessTriple> stiffness;

  static ObjectiveReply failure() { return {}; }
};

using ObjectiveFn =
    std::function<ObjectiveReply(std::span<const double> x, const Fidelity& fidelity, std::uint64_t seed)>;

/// Bounded mixed-integer black-box problem. For joint problems the objective
/// is residual(phi(x), target).
struct Problem {
  Bounds bounds;
  ObjectiveFn objective;
  Fidelity fidelity = Fidelity::exact();        // used by minimize
  Fidelity noisy_fidelity = Fidelity::noisy(kDefaultNoiseCap);  // simulator side of run_milestone
  std::optional<StiffnessTriple> target;

  static Problem joint(const StiffnessTriple& target, const Material& material = {},
                       const Bounds& bounds = Bounds::joint_defaults(),
                       const Fidelity& fidelity = Fidelity::exact());
  static Problem synthetic(const std::string& name, const Bounds& bounds);
};

struct StopRule {
  std::size_t max_evaluations = 500;
  double objective_threshold = 1e-5;  // stop once best < threshold
  std::size_t stagnation_window = 0;  // 0 disables
};

enum class StopReason { kBudget, kThreshold, kStagnation, kAccepted, kMaxReals };
const char* stop_reason_name(StopReason reason);

/// Archive entry. Failed entries carry the penalty as `value`.
struct ArchiveEntry {
  std::vector<double> x;
  double value = 0.0;
  Fidelity fidelity;
  bool failed = false;
  bool warm = false;
  std::optional<StiffnessTriple> stiffness;
};

/// Observation supplied from earlier runs. A missing value means failure.
struct WarmSample {
  std::vector<double> x;
  std::optional<double> value;
  Fidelity fidelity;
  std::optional<StiffnessTriple> stiffness;
};

enum class ValueTransform { kNone, kClipMedian, kLog };

struct OptimizerSettings {
  Kernel kernel = Kernel::cubic();
  /// 0 means 2 * (dims + 1).
  std::size_t initial_points = 0;
  WeightSchedule weights;
  std::size_t multistarts = 20;
  double initial_step = 0.25;
  int step_halvings = 8;
  std::size_t max_surrogate_nodes = 1500;
  /// Proposals closer than this (normalized) to an archive point count as revisits.
  double min_distance = 1e-4;
  ValueTransform transform = ValueTransform::kLog;
  /// Offset d in log10(y - min(0, y_min) + d) for kLog.
  double log_offset = 0.3;
  /// Integer neighbours of the incumbent count as explored when an archive
  /// point lies within this normalized distance. 0 disables the probe.
  double integer_probe_radius = 0.05;
};

inline constexpr double kFailurePenaltyFloor = 1e6;

struct OptimizerState {
  Bounds bounds;
  OptimizerSettings settings;
  std::vector<ArchiveEntry> archive;
  std::optional<Surrogate> surrogate;
  std::size_t proposals = 0;  // drives the weight cycle
  std::mt19937_64 rng;
  std::optional<std::size_t> best_index;

  OptimizerState(Bounds b, OptimizerSettings s, std::uint64_t seed);

  std::size_t iteration() const { return archive.size(); }
  std::optional<double> best_value() const;
  /// Worst successful value, if any.
  std::optional<double> worst_value() const;
  std::vector<std::vector<double>> unit_points() const;
};

/// Latin hypercube sample snapped to integrality. Points also avoid `existing`.
/// Throws Error(kCannotPlaceDistinctPoints) if the box has fewer distinct
/// integral combinations than requested and no continuous freedom.
std::vector<std::vector<double>> initial_design(const Bounds& bounds, std::size_t n_points, std::uint64_t seed,
                                                const std::vector<std::vector<double>>& existing = {});
std::vector<JointConfig> initial_joint_design(const Bounds& bounds, std::size_t n_points, std::uint64_t seed);

/// Fit the surrogate on (at most max_surrogate_nodes of) the archive.
void refresh_surrogate(OptimizerState& state);

/// Approximate minimizer of the merit function; feasible and not already in
/// the archive. Requires a fitted surrogate.
std::vector<double> propose_next(OptimizerState& state);

/// Append an evaluation. Failures are stored at 2 * worst successful value
/// (1e6 if none) and never become the best point.
void record(OptimizerState& state, std::span<const double> x, const ObjectiveReply& reply,
            const Fidelity& fidelity);

struct MilestoneRow {
  std::size_t simulations = 0;
  std::size_t reals = 0;
  std::vector<double> x;
  std::optional<StiffnessTriple> simulated;
  double simulated_residual = std::numeric_limits<double>::infinity();
  std::optional<StiffnessTriple> real;
  double real_residual = std::numeric_limits<double>::infinity();
};

struct RunReport {
  std::vector<double> best_point;
  bool best_valid = false;  // false when no evaluation succeeded
  std::optional<StiffnessTriple> best_stiffness;
  double best_value = std::numeric_limits<double>::infinity();
  double initial_best = std::numeric_limits<double>::infinity();  // from warm start
  /// Running minimum after each new evaluation.
  std::vector<double> trace;
  std::size_t exact_evaluations = 0;
  std::size_t noisy_evaluations = 0;
  std::size_t failed_evaluations = 0;
  std::size_t warm_used = 0;
  std::size_t warm_filtered = 0;
  StopReason stop_reason = StopReason::kBudget;
  double wall_seconds = 0.0;
  std::vector<ArchiveEntry> archive;
  std::vector<MilestoneRow> milestones;

  std::size_t evaluations() const { return trace.size(); }
  std::optional<JointConfig> best_config() const;
  /// New evaluations needed before the best value dropped below `threshold`;
  /// 0 if the warm start already did, nullopt if never.
  std::optional<std::size_t> evaluations_to_reach(double threshold) const;
};

RunReport minimize(const Problem& problem, const StopRule& stop, std::span<const WarmSample> warm_start,
                   std::uint64_t seed, const OptimizerSettings& settings = {});

/// Alternate blocks of `sims_per_real` noisy evaluations with one exact
/// evaluation of the best configuration according to the simulator. Stops
/// when an exact residual is <= accept_threshold or after max_reals checks.
RunReport run_milestone(const Problem& problem, std::size_t sims_per_real, std::size_t max_reals,
                        double accept_threshold, std::uint64_t seed, const OptimizerSettings& settings = {},
                        std::span<const WarmSample> warm_start = {});

/// Per-evaluation seed derivation (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace wavejoint
