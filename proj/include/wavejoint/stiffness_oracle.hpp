#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wavejoint/joint_model.hpp"

namespace wavejoint {

/// Joint stiffness under the three unit load cases. Bending components are in
/// N/mm, torsion in N*mm/deg.
struct StiffnessTriple {
  double k_xi = 0.0;    // out-of-plane bending
  double k_eta = 0.0;   // in-plane (lateral) bending
  double k_zeta = 0.0;  // torsion

  std::array<double, 3> to_array() const { return {k_xi, k_eta, k_zeta}; }
  static StiffnessTriple from_span(std::span<const double> k);
  friend bool operator==(const StiffnessTriple&, const StiffnessTriple&) = default;
};

/// Defaults are ABS: E = 2.30 GPa, rho = 1.06 g/cm^3, nu = 0.35. Density does
/// not enter the static analysis; it is carried for dataset metadata.
struct Material {
  double young_modulus_gpa = 2.30;
  double density_g_cm3 = 1.06;
  double poisson_ratio = 0.35;

  /// Throws Error(kInvalidArgument) on E <= 0 or nu outside [0, 0.5).
  void check() const;
  double shear_modulus_mpa() const;
};

struct Fidelity {
  enum class Tag { kExact, kNoisy };
  Tag tag = Tag::kExact;
  double noise_cap = 0.0;  // relative; meaningful only for kNoisy

  static Fidelity exact() { return {}; }
  /// Throws Error(kInvalidArgument) unless 0 <= cap < 1.
  static Fidelity noisy(double cap);

  bool is_exact() const { return tag == Tag::kExact; }
  /// "exact" or "noisy:<cap>".
  std::string to_string() const;
  static Fidelity parse(std::string_view text);
  friend bool operator==(const Fidelity&, const Fidelity&) = default;
};

enum class FailureReason { kNone, kSingularSystem, kNonPositiveStiffness, kInvalidGeometry, kInjected };
const char* failure_reason_name(FailureReason reason);

/// Either a stiffness triple or an explicit failure; never NaN or infinity.
struct OracleOutcome {
  std::optional<StiffnessTriple> stiffness;
  FailureReason failure = FailureReason::kNone;

  bool ok() const { return stiffness.has_value(); }
  static OracleOutcome success(const StiffnessTriple& k) { return {k, FailureReason::kNone}; }
  static OracleOutcome failed(FailureReason why) { return {std::nullopt, why}; }
};

inline constexpr int kExactMeshDensity = 32;
inline constexpr int kNoisyMeshDensity = 8;
inline constexpr double kDefaultNoiseCap = 0.30;

/// Geometry of the rigid end blocks and the wall extrusion.
struct JointGeometry {
  double extrusion_depth_mm = 16.0;  // wall depth, equal to the block face
  double block_height_mm = 15.0;
  double lever_arm_mm = 11.0;        // load point distance beyond the last wave node
  double torque_n_mm = 1.0;
  double force_n = 1.0;
};

inline constexpr double kSingularConditionLimit = 1e15;

/// Frame-element stiffness of the wave wall. Elements per ridge must be >= 2.
/// Failures (ill-conditioned system, non-positive compliance, non-positive
/// amplitude) come back as OracleOutcome::failed, not as exceptions.
OracleOutcome evaluate_stiffness(const JointConfig& cfg, const Material& material, int mesh_density,
                                 const JointGeometry& geometry = {});

/// Coarse-mesh evaluation with each component scaled by an independent factor
/// drawn uniformly from [1 - cap, 1 + cap]. Deterministic in `seed`.
OracleOutcome noisy_evaluate(const JointConfig& cfg, const Material& material,
                             const Fidelity& fidelity, std::uint64_t seed,
                             int mesh_density = kNoisyMeshDensity);

/// Dispatches on fidelity: exact -> refined mesh, noisy -> noisy_evaluate.
OracleOutcome evaluate_at(const JointConfig& cfg, const Material& material,
                          const Fidelity& fidelity, std::uint64_t seed);

/// Sum of squared relative errors against `target`. Throws Error(kDomain) when
/// a target component is zero.
double residual(const StiffnessTriple& k, const StiffnessTriple& target);

struct SyntheticFunction {
  std::string name;
  double known_minimum = 0.0;
};

/// sphere, rosenbrock or mixed-integer-quadratic (sum (x_i - c_i)^2 with the
/// integer centers returned by synthetic_centers). Throws Error(kUnknownFunction).
double synthetic_function(std::string_view name, std::span<const double> x);
SyntheticFunction synthetic_info(std::string_view name);
/// Integer centers c_i used by mixed-integer-quadratic: 1, -2, 3, -1, 2, 0, ...
std::vector<double> synthetic_centers(std::size_t dims);

}  // namespace wavejoint
