#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wavejoint/joint_model.hpp"
#include "wavejoint/stiffness_oracle.hpp"

namespace wavejoint {

enum class KernelFamily { kGaussian, kLinear, kCubic, kThinPlate, kMultiquadric };

/// Radial basis function sigma(r). Shape parameter gamma is used by the
/// gaussian exp(-gamma r^2) and multiquadric sqrt(1 + gamma r^2) families.
struct Kernel {
  KernelFamily family = KernelFamily::kCubic;
  double gamma = 1.0;

  double operator()(double r) const;
  /// Throws Error(kInvalidArgument) when gamma <= 0 for a shaped family.
  void check() const;
  /// 1 (affine) for linear/cubic/thin-plate, 0 (constant) for gaussian/multiquadric.
  int default_tail_degree() const;
  /// Sign s such that s * Xi is positive on the tail-orthogonal subspace.
  double definiteness_sign() const;

  std::string name() const;
  /// "cubic", "thin-plate", "linear", "gaussian[:gamma]", "multiquadric[:gamma]".
  static Kernel parse(std::string_view text);

  static Kernel gaussian(double gamma) { return {KernelFamily::kGaussian, gamma}; }
  static Kernel linear() { return {KernelFamily::kLinear, 1.0}; }
  static Kernel cubic() { return {KernelFamily::kCubic, 1.0}; }
  static Kernel thin_plate() { return {KernelFamily::kThinPlate, 1.0}; }
  static Kernel multiquadric(double gamma) { return {KernelFamily::kMultiquadric, gamma}; }
};

inline constexpr int kNoTail = -1;

/// One observation as seen by the surrogate. Exact samples are interpolated;
/// noisy samples are fitted within +-tolerance() of `value`.
struct SurrogateSample {
  std::vector<double> point;  // original (un-normalized) coordinates
  double value = 0.0;
  Fidelity fidelity;
  /// Explicit half-width of the noisy band; negative means noise_cap * |value|.
  double band = -1.0;

  double tolerance() const;
};

struct FitOptions {
  /// Polynomial tail degree: kNoTail, 0 or 1. Unset means the kernel default.
  /// An affine tail that is not unisolvent on the nodes degrades to a constant.
  std::optional<int> tail_degree;
  /// Initial smoothing for noisy nodes, relative to the mean kernel magnitude.
  double smoothing = 0.5;
  int max_band_rounds = 30;
};

/// Fitted radial interpolant over the box-normalized [0,1]^d cube.
class Surrogate {
 public:
  double eval(std::span<const double> x) const;
  double eval_normalized(std::span<const double> unit_x) const;

  /// Map an original-coordinate point into the unit cube (no clamping).
  std::vector<double> normalize(std::span<const double> x) const;
  std::vector<double> denormalize(std::span<const double> unit_x) const;

  std::size_t size() const { return centers_.size(); }
  std::size_t dims() const { return box_.size(); }
  const Kernel& kernel() const { return kernel_; }
  int tail_degree() const { return tail_degree_; }
  const Bounds& box() const { return box_; }
  const std::vector<std::vector<double>>& centers() const { return centers_; }
  const Eigen::VectorXd& coefficients() const { return lambda_; }
  const Eigen::VectorXd& tail_coefficients() const { return tail_; }
  /// Samples after merging coincident points, in center order.
  const std::vector<SurrogateSample>& nodes() const { return nodes_; }
  /// Smallest and largest fitted node value.
  double value_spread() const;

 private:
  friend Surrogate fit(std::span<const SurrogateSample>, const Kernel&, const Bounds&, const FitOptions&);

  Kernel kernel_;
  Bounds box_;
  int tail_degree_ = kNoTail;
  std::vector<std::vector<double>> centers_;  // normalized
  std::vector<SurrogateSample> nodes_;
  Eigen::VectorXd lambda_;
  Eigen::VectorXd tail_;
  // Extended-precision copies used by eval; the double ones are for inspection.
  Eigen::Matrix<long double, Eigen::Dynamic, 1> lambda_ext_;
  Eigen::Matrix<long double, Eigen::Dynamic, 1> tail_ext_;
};

/// Solve the RBF system with polynomial tail. Exact nodes are reproduced;
/// noisy nodes land within their tolerance band.
///
/// Throws Error(kSingularInterpolation) when the system cannot be solved,
/// Error(kDuplicateExactNodeConflict) when two exact samples share a point but
/// disagree, Error(kBoundViolation) when a sample lies outside `box`.
Surrogate fit(std::span<const SurrogateSample> samples, const Kernel& kernel, const Bounds& box,
              const FitOptions& options = {});

/// Smallest Euclidean distance, in normalized coordinates, from `unit_x` to any
/// of `unit_centers`. +inf when there are no centers.
double min_distance(std::span<const double> unit_x, const std::vector<std::vector<double>>& unit_centers);

/// Acquisition value s(x) - weight * d_min(x); lower is more desirable.
double merit(const Surrogate& s, std::span<const double> x, double weight,
             const std::vector<std::vector<double>>& unit_centers);
double merit(const Surrogate& s, std::span<const double> x, double weight);

/// Cyclic exploration weights, relative to the spread of surrogate values.
class WeightSchedule {
 public:
  WeightSchedule();
  /// Throws Error(kInvalidArgument) unless all entries are finite, >= 0, and
  /// at least one is 0.
  explicit WeightSchedule(std::vector<double> cycle);

  double relative(std::size_t step) const { return cycle_[step % cycle_.size()]; }
  /// Absolute weight for a surrogate whose node values span `spread`.
  double weight(std::size_t step, double spread) const;
  const std::vector<double>& cycle() const { return cycle_; }

 private:
  std::vector<double> cycle_;
};

}  // namespace wavejoint
