#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace wavejoint {

inline constexpr std::size_t kJointDims = 5;

/// Geometric design variables of a wave joint.
///
/// Integer-valued variables (ridge count, twist angle) are stored as doubles so
/// that raw optimizer or network outputs can be represented and validated
/// before projection.
struct JointConfig {
  double length_mm = 20.0;     // l_t
  double ridges = 4.0;         // n_r
  double height_mm = 10.0;     // h_t
  double thickness_mm = 0.5;   // t_h
  double twist_deg = 0.0;      // alpha

  std::array<double, kJointDims> to_array() const {
    return {length_mm, ridges, height_mm, thickness_mm, twist_deg};
  }
  static JointConfig from_span(std::span<const double> x);

  /// Peak transverse offset of the centerline, h_t/2 - t_h.
  double amplitude_mm() const { return height_mm / 2.0 - thickness_mm; }

  friend bool operator==(const JointConfig&, const JointConfig&) = default;
};

struct VariableBounds {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  bool integral = false;

  friend bool operator==(const VariableBounds&, const VariableBounds&) = default;
};

/// Axis-aligned box with per-variable integrality. Not tied to the joint: the
/// optimizer uses the same type for synthetic test problems of any dimension.
class Bounds {
 public:
  Bounds() = default;
  /// Throws Error(kInvalidArgument) if lower > upper or an integral variable
  /// has a fractional bound.
  explicit Bounds(std::vector<VariableBounds> vars);

  /// l_t in [15, 30], n_r in {3..6}, h_t in [8, 14], t_h in [0.5, 0.6], alpha in {0..24}.
  static Bounds joint_defaults();
  static Bounds uniform(std::size_t dims, double lower, double upper);

  std::size_t size() const { return vars_.size(); }
  const VariableBounds& operator[](std::size_t i) const { return vars_[i]; }
  const std::vector<VariableBounds>& variables() const { return vars_; }
  bool has_integral() const;

  /// Lower/upper with an override for one variable; used by the bounds JSON loader.
  Bounds with(std::size_t index, double lower, double upper) const;

  bool contains(std::span<const double> x) const;

  /// Number of distinct integral combinations, saturating at SIZE_MAX; 1 if none.
  std::size_t integral_combinations() const;

  friend bool operator==(const Bounds&, const Bounds&) = default;

 private:
  std::vector<VariableBounds> vars_;
};

enum class ViolationKind { kBound, kIntegrality, kAmplitudeNonPositive };

struct Violation {
  ViolationKind kind;
  std::string variable;  // empty for kAmplitudeNonPositive

  std::string describe() const;
  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Every violated constraint, in variable order. Empty means valid.
std::vector<Violation> validate_config(const JointConfig& cfg, const Bounds& bounds);

/// Same check on a raw point of any dimension (no amplitude rule).
std::vector<Violation> validate_point(std::span<const double> x, const Bounds& bounds);

/// Centerline offset y(t) = -(h_t/2 - t_h) cos(2 pi n_r t / l_t).
/// Throws Error(kDomain) when t lies outside [0, l_t].
double wave_profile(const JointConfig& cfg, double t_mm);

/// Clamp each coordinate into its bounds, then round integral coordinates half
/// away from zero.
std::vector<double> clamp_and_round(std::span<const double> x, const Bounds& bounds);
JointConfig clamp_and_round(const JointConfig& cfg, const Bounds& bounds);

}  // namespace wavejoint
