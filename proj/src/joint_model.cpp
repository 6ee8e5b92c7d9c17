#include "wavejoint/joint_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wavejoint/errors.hpp"

namespace wavejoint {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kBoundViolation: return "BoundViolation";
    case ErrorCode::kDomain: return "DomainError";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kSingularInterpolation: return "SingularInterpolation";
    case ErrorCode::kDuplicateExactNodeConflict: return "DuplicateExactNodeConflict";
    case ErrorCode::kCannotPlaceDistinctPoints: return "CannotPlaceDistinctPoints";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kUnknownFunction: return "UnknownFunction";
    case ErrorCode::kInternal: return "InternalError";
  }
  return "Unknown";
}

JointConfig JointConfig::from_span(std::span<const double> x) {
  if (x.size() != kJointDims) {
    throw Error(ErrorCode::kInvalidArgument,
                "joint config needs 5 values, got " + std::to_string(x.size()));
  }
  return {x[0], x[1], x[2], x[3], x[4]};
}

namespace {

bool is_integer(double v) { return std::isfinite(v) && v == std::round(v); }

}  // namespace

Bounds::Bounds(std::vector<VariableBounds> vars) : vars_(std::move(vars)) {
  for (const auto& v : vars_) {
    if (!(v.lower <= v.upper)) {
      throw Error(ErrorCode::kInvalidArgument, "bounds for '" + v.name + "' have lower > upper");
    }
    if (v.integral && (!is_integer(v.lower) || !is_integer(v.upper))) {
      throw Error(ErrorCode::kInvalidArgument,
                  "integral variable '" + v.name + "' has fractional bounds");
    }
  }
}

Bounds Bounds::joint_defaults() {
  return Bounds({{"l_t", 15.0, 30.0, false},
                 {"n_r", 3.0, 6.0, true},
                 {"h_t", 8.0, 14.0, false},
                 {"t_h", 0.5, 0.6, false},
                 {"alpha", 0.0, 24.0, true}});
}

Bounds Bounds::uniform(std::size_t dims, double lower, double upper) {
  std::vector<VariableBounds> vars;
  for (std::size_t i = 0; i < dims; ++i) {
    vars.push_back({"x" + std::to_string(i), lower, upper, false});
  }
  return Bounds(std::move(vars));
}

bool Bounds::has_integral() const {
  return std::any_of(vars_.begin(), vars_.end(), [](const auto& v) { return v.integral; });
}

Bounds Bounds::with(std::size_t index, double lower, double upper) const {
  auto vars = vars_;
  vars.at(index).lower = lower;
  vars.at(index).upper = upper;
  return Bounds(std::move(vars));
}

bool Bounds::contains(std::span<const double> x) const { return validate_point(x, *this).empty(); }

std::size_t Bounds::integral_combinations() const {
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  std::size_t total = 1;
  for (const auto& v : vars_) {
    if (!v.integral) continue;
    const double span = v.upper - v.lower + 1.0;
    if (span >= static_cast<double>(kMax) / static_cast<double>(total)) return kMax;
    total *= static_cast<std::size_t>(span);
  }
  return total;
}

std::string Violation::describe() const {
  switch (kind) {
    case ViolationKind::kBound: return "BoundViolation(" + variable + ")";
    case ViolationKind::kIntegrality: return "IntegralityViolation(" + variable + ")";
    case ViolationKind::kAmplitudeNonPositive: return "AmplitudeNonPositive";
  }
  return "?";
}

std::vector<Violation> validate_point(std::span<const double> x, const Bounds& bounds) {
  if (x.size() != bounds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "point dimension does not match bounds");
  }
  std::vector<Violation> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& v = bounds[i];
    if (!(x[i] >= v.lower && x[i] <= v.upper)) out.push_back({ViolationKind::kBound, v.name});
    if (v.integral && !is_integer(x[i])) out.push_back({ViolationKind::kIntegrality, v.name});
  }
  return out;
}

std::vector<Violation> validate_config(const JointConfig& cfg, const Bounds& bounds) {
  const auto x = cfg.to_array();
  auto out = validate_point(x, bounds);
  if (!(cfg.amplitude_mm() > 0.0)) out.push_back({ViolationKind::kAmplitudeNonPositive, {}});
  return out;
}

double wave_profile(const JointConfig& cfg, double t_mm) {
  if (!(t_mm >= 0.0 && t_mm <= cfg.length_mm)) {
    throw Error(ErrorCode::kDomain, "axial coordinate outside [0, l_t]");
  }
  const double phase = 2.0 * std::numbers::pi * cfg.ridges / cfg.length_mm * t_mm;
  return -(cfg.amplitude_mm() * std::cos(phase));
}

std::vector<double> clamp_and_round(std::span<const double> x, const Bounds& bounds) {
  if (x.size() != bounds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "point dimension does not match bounds");
  }
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = bounds[i];
    double value = std::isnan(out[i]) ? v.lower : out[i];
    value = std::clamp(value, v.lower, v.upper);
    // std::round is half-away-from-zero.
    if (v.integral) value = std::round(value);
    out[i] = value;
  }
  return out;
}

JointConfig clamp_and_round(const JointConfig& cfg, const Bounds& bounds) {
  const auto x = cfg.to_array();
  return JointConfig::from_span(clamp_and_round(x, bounds));
}

}  // namespace wavejoint
