#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wavejoint/joint_model.hpp"
#include "wavejoint/stiffness_oracle.hpp"

namespace wavejoint {

struct Observation {
  JointConfig config;
  StiffnessTriple stiffness;
  Fidelity fidelity;
};

/// Past observations. Configs may lie outside the current bounds.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Observation> observations);

  /// Throws Error(kInvalidArgument) unless all stiffness components are positive and finite.
  void add(const Observation& obs);

  std::size_t size() const { return obs_.size(); }
  bool empty() const { return obs_.empty(); }
  const Observation& operator[](std::size_t i) const { return obs_[i]; }
  const std::vector<Observation>& observations() const { return obs_; }
  auto begin() const { return obs_.begin(); }
  auto end() const { return obs_.end(); }

 private:
  std::vector<Observation> obs_;
};

struct NearestResult {
  JointConfig config;
  double residual = 0.0;
  std::size_t index = 0;
};

/// Observation with the smallest residual against `target`; first index wins
/// ties. Throws Error(kEmptyDataset).
NearestResult nearest_neighbor(const Dataset& d, const StiffnessTriple& target);

struct NetHyper {
  std::vector<int> hidden{32, 32};  // empty gives a linear map
  int epochs = 3000;
  int retrain_epochs = 400;         // warm restarts inside incremental_net
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
  /// Output normalization box.
  Bounds bounds = Bounds::joint_defaults();
};

/// Feed-forward map from log-stiffness (z-scored) to box-normalized config.
class InverseNet {
 public:
  /// Unprojected config in original units.
  std::vector<double> predict_raw(const StiffnessTriple& k) const;
  /// Mean squared error in normalized output units.
  double loss(const Dataset& d) const;
  double initial_loss() const { return initial_loss_; }
  double final_loss() const { return final_loss_; }
  const NetHyper& hyper() const { return hyper_; }

  /// Continue full-batch training from the current weights.
  void train_more(const Dataset& d, int epochs);

 private:
  friend InverseNet train_inverse_net(const Dataset& d, const NetHyper& hyper);

  Eigen::MatrixXd inputs(const Dataset& d) const;
  Eigen::MatrixXd targets(const Dataset& d) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  NetHyper hyper_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
  Eigen::Vector3d in_mean_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d in_scale_ = Eigen::Vector3d::Ones();
  // Adam moments, kept across train_more calls.
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
  long adam_step_ = 0;
  double initial_loss_ = 0.0;
  double final_loss_ = 0.0;
};

/// Deterministic for a fixed hyper.seed. Throws Error(kInsufficientData) below 10 observations.
InverseNet train_inverse_net(const Dataset& d, const NetHyper& hyper = {});

struct ZeroShotResult {
  JointConfig config;
  std::vector<double> raw;
  /// Variables whose raw prediction was outside its bounds or off-integer.
  std::vector<std::string> clamped;
};

ZeroShotResult zero_shot_net(const InverseNet& net, const StiffnessTriple& target, const Bounds& b);

using StiffnessOracle = std::function<OracleOutcome(const JointConfig&)>;

struct IncrementalOptions {
  NetHyper hyper;
  /// Augment with (target, x) instead of the measured (phi(x), x).
  bool literal_augmentation = false;
  std::uint64_t seed = 0;  // perturbation stream
};

struct IncrementalResult {
  JointConfig config;
  bool valid = false;  // false if every evaluation failed
  double residual = 0.0;
  std::optional<StiffnessTriple> stiffness;
  std::vector<double> trace;  // residual per evaluation, penalties for failures
  std::size_t evaluations = 0;
  std::size_t failures = 0;
  std::size_t dataset_size = 0;  // after augmentation

  /// Running minimum of trace.
  std::vector<double> best_trace() const;
};

/// Train, predict, project, evaluate; stop when the residual is <= tol or the
/// budget is spent. Throws Error(kInsufficientData) or Error(kInvalidArgument) on budget 0.
IncrementalResult incremental_net(Dataset d, const StiffnessTriple& target, const StiffnessOracle& oracle,
                                  std::size_t budget, double tol, const Bounds& b,
                                  const IncrementalOptions& options = {});

}  // namespace wavejoint
