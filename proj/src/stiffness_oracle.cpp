#include "wavejoint/stiffness_oracle.hpp"

#include <lapacke.h>

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>

#include "wavejoint/errors.hpp"

namespace wavejoint {

StiffnessTriple StiffnessTriple::from_span(std::span<const double> k) {
  if (k.size() != 3) throw Error(ErrorCode::kInvalidArgument, "stiffness triple needs 3 values");
  return {k[0], k[1], k[2]};
}

void Material::check() const {
  if (!(young_modulus_gpa > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "Young's modulus must be positive");
  }
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "Poisson ratio must lie in [0, 0.5)");
  }
}

double Material::shear_modulus_mpa() const {
  return young_modulus_gpa * 1000.0 / (2.0 * (1.0 + poisson_ratio));
}

Fidelity Fidelity::noisy(double cap) {
  if (!(cap >= 0.0 && cap < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise cap must lie in [0, 1)");
  }
  return {Tag::kNoisy, cap};
}

std::string Fidelity::to_string() const {
  if (is_exact()) return "exact";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, noise_cap);
  return "noisy:" + std::string(buf, res.ptr);
}

Fidelity Fidelity::parse(std::string_view text) {
  if (text == "exact") return exact();
  if (text == "noisy") return noisy(kDefaultNoiseCap);
  if (text.starts_with("noisy:")) {
    const std::string rest(text.substr(6));
    std::size_t used = 0;
    double cap = 0.0;
    try {
      cap = std::stod(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == rest.size() && used > 0) return noisy(cap);
  }
  throw Error(ErrorCode::kInvalidArgument, "unrecognized fidelity '" + std::string(text) + "'");
}

const char* failure_reason_name(FailureReason reason) {
  switch (reason) {
    case FailureReason::kNone: return "none";
    case FailureReason::kSingularSystem: return "SingularSystem";
    case FailureReason::kNonPositiveStiffness: return "NonPositiveStiffness";
    case FailureReason::kInvalidGeometry: return "InvalidGeometry";
    case FailureReason::kInjected: return "Injected";
  }
  return "?";
}

namespace {

using Real = long double;  // assembly and residual precision
using Mat12 = Eigen::Matrix<Real, 12, 12>;
using Vec3 = Eigen::Matrix<Real, 3, 1>;

constexpr int kDofPerNode = 6;
constexpr int kHalfBand = 11;  // one element couples two adjacent nodes
constexpr int kRefinementSteps = 4;

struct Section {
  Real area;
  Real i_weak;    // about local z (deflection along the thickness direction)
  Real i_strong;  // about local y (deflection along the extrusion depth)
  Real torsion_constant;
};

Section rectangular_section(Real thickness, Real depth) {
  const Real ratio = thickness / depth;
  // Saint-Venant constant for a thin rectangle.
  const Real beta = (1.0L / 3.0L) * (1.0L - 0.63L * ratio + 0.052L * std::pow(ratio, 5));
  return {thickness * depth, depth * thickness * thickness * thickness / 12.0L,
          thickness * depth * depth * depth / 12.0L, beta * depth * thickness * thickness * thickness};
}

Mat12 local_frame_stiffness(Real length, Real e, Real g, const Section& s) {
  Mat12 k = Mat12::Zero();
  const Real l = length, l2 = l * l, l3 = l2 * l;
  const Real ea = e * s.area / l;
  const Real gj = g * s.torsion_constant / l;
  const Real ez = e * s.i_weak, ey = e * s.i_strong;

  k(0, 0) = ea;  k(0, 6) = -ea;  k(6, 6) = ea;
  k(3, 3) = gj;  k(3, 9) = -gj;  k(9, 9) = gj;

  // v / theta_z
  k(1, 1) = 12 * ez / l3;  k(1, 5) = 6 * ez / l2;   k(1, 7) = -12 * ez / l3;  k(1, 11) = 6 * ez / l2;
  k(5, 5) = 4 * ez / l;    k(5, 7) = -6 * ez / l2;  k(5, 11) = 2 * ez / l;
  k(7, 7) = 12 * ez / l3;  k(7, 11) = -6 * ez / l2;
  k(11, 11) = 4 * ez / l;

  // w / theta_y
  k(2, 2) = 12 * ey / l3;  k(2, 4) = -6 * ey / l2;  k(2, 8) = -12 * ey / l3;  k(2, 10) = -6 * ey / l2;
  k(4, 4) = 4 * ey / l;    k(4, 8) = 6 * ey / l2;   k(4, 10) = 2 * ey / l;
  k(8, 8) = 12 * ey / l3;  k(8, 10) = 6 * ey / l2;
  k(10, 10) = 4 * ey / l;

  return k.selfadjointView<Eigen::Upper>();
}

/// Column-major band storage in the layout dgbtrf expects.
template <typename T>
class BandMatrix {
 public:
  explicit BandMatrix(int n) : n_(n), ab_(static_cast<std::size_t>(kLd) * n, T(0)) {}

  T& at(int i, int j) { return ab_[static_cast<std::size_t>(j) * kLd + (kRowOffset + i - j)]; }
  T at(int i, int j) const { return ab_[static_cast<std::size_t>(j) * kLd + (kRowOffset + i - j)]; }
  int n() const { return n_; }
  T* data() { return ab_.data(); }

  static constexpr int kLd = 3 * kHalfBand + 1;
  static constexpr int kRowOffset = 2 * kHalfBand;

 private:
  int n_;
  std::vector<T> ab_;
};

}  // namespace

OracleOutcome evaluate_stiffness(const JointConfig& cfg, const Material& material, int mesh_density,
                                 const JointGeometry& geometry) {
  material.check();
  if (mesh_density < 2) throw Error(ErrorCode::kInvalidArgument, "mesh density must be >= 2");
  const double amplitude = cfg.amplitude_mm();
  if (!(amplitude > 0.0) || !(cfg.length_mm > 0.0) || !(cfg.ridges > 0.0) ||
      !(cfg.thickness_mm > 0.0) || !std::isfinite(cfg.twist_deg)) {
    return OracleOutcome::failed(FailureReason::kInvalidGeometry);
  }

  const int elements = std::max(2, static_cast<int>(std::lround(cfg.ridges * mesh_density)));
  const int nodes = elements + 1;
  const Real e_mpa = static_cast<Real>(material.young_modulus_gpa) * 1000.0L;
  const Real g_mpa = e_mpa / (2.0L * (1.0L + static_cast<Real>(material.poisson_ratio)));
  const Section section = rectangular_section(cfg.thickness_mm, geometry.extrusion_depth_mm);
  const Real twist_total = static_cast<Real>(cfg.twist_deg) * std::numbers::pi_v<Real> / 180.0L;

  std::vector<Vec3> position(nodes);
  for (int i = 0; i < nodes; ++i) {
    const double t = std::min(cfg.length_mm, cfg.length_mm * static_cast<double>(i) / elements);
    position[i] = Vec3(t, wave_profile(cfg, t), 0.0L);
  }

  // Node 0 is clamped; free DOFs are renumbered from node 1.
  const int n = kDofPerNode * (nodes - 1);
  BandMatrix<Real> stiffness(n);
  Mat12 transform = Mat12::Zero();

  for (int el = 0; el < elements; ++el) {
    const Vec3 chord = position[el + 1] - position[el];
    const Real length = chord.norm();
    const Vec3 ex = chord / length;
    const Vec3 in_plane_normal(-ex.y(), ex.x(), 0.0L);
    const Vec3 depth_axis(0.0L, 0.0L, 1.0L);
    // Cross-section twist grows linearly from the clamped end to the free end.
    const Real phi = twist_total * (static_cast<Real>(el) + 0.5L) / elements;
    const Vec3 ey = std::cos(phi) * in_plane_normal + std::sin(phi) * depth_axis;
    const Vec3 ez = ex.cross(ey);

    Eigen::Matrix<Real, 3, 3> rot;
    rot.row(0) = ex.transpose();
    rot.row(1) = ey.transpose();
    rot.row(2) = ez.transpose();
    for (int b = 0; b < 4; ++b) transform.block<3, 3>(3 * b, 3 * b) = rot;

    const Mat12 k_global =
        transform.transpose() * local_frame_stiffness(length, e_mpa, g_mpa, section) * transform;

    for (int a = 0; a < 12; ++a) {
      const int ga = kDofPerNode * (el - 1) + a;  // node el maps to block el-1
      if (ga < 0) continue;
      for (int b = 0; b < 12; ++b) {
        const int gb = kDofPerNode * (el - 1) + b;
        if (gb < 0) continue;
        stiffness.at(ga, gb) += k_global(a, b);
      }
    }
  }

  // Symmetric Jacobi equilibration so the conditioning test does not depend on
  // the translation/rotation unit mix.
  std::vector<Real> scale(n);
  for (int i = 0; i < n; ++i) {
    const Real d = stiffness.at(i, i);
    if (!(d > 0.0L)) return OracleOutcome::failed(FailureReason::kSingularSystem);
    scale[i] = 1.0L / std::sqrt(d);
  }
  BandMatrix<double> factor(n);
  double norm1 = 0.0;
  for (int j = 0; j < n; ++j) {
    double col = 0.0;
    for (int i = std::max(0, j - kHalfBand); i <= std::min(n - 1, j + kHalfBand); ++i) {
      Real& v = stiffness.at(i, j);
      v *= scale[i] * scale[j];
      factor.at(i, j) = static_cast<double>(v);
      col += std::abs(factor.at(i, j));
    }
    norm1 = std::max(norm1, col);
  }

  // Load point sits on the free block's far face, centred on the joint axis.
  const Vec3 tip = position.back();
  const Vec3 lever(geometry.lever_arm_mm, -tip.y(), 0.0L);
  const Vec3 force_out_of_plane(0.0L, 0.0L, geometry.force_n);
  const Vec3 force_in_plane(0.0L, geometry.force_n, 0.0L);
  const Vec3 torque(geometry.torque_n_mm, 0.0L, 0.0L);

  const int tip_dof = n - kDofPerNode;
  constexpr int kCases = 3;
  const auto at = [n](int column, int row) { return static_cast<std::size_t>(column) * n + row; };
  std::vector<Real> load(static_cast<std::size_t>(n) * kCases, 0.0L);
  auto set_load = [&](int column, const Vec3& f, const Vec3& m) {
    const Vec3 moment = m + lever.cross(f);
    for (int a = 0; a < 3; ++a) {
      load[at(column, tip_dof + a)] = f(a) * scale[tip_dof + a];
      load[at(column, tip_dof + 3 + a)] = moment(a) * scale[tip_dof + 3 + a];
    }
  };
  set_load(0, force_out_of_plane, Vec3::Zero());
  set_load(1, force_in_plane, Vec3::Zero());
  set_load(2, Vec3::Zero(), torque);

  std::vector<lapack_int> pivots(n);
  lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kHalfBand, kHalfBand, factor.data(),
                                   BandMatrix<double>::kLd, pivots.data());
  if (info != 0) return OracleOutcome::failed(FailureReason::kSingularSystem);
  double rcond = 0.0;
  info = LAPACKE_dgbcon(LAPACK_COL_MAJOR, '1', n, kHalfBand, kHalfBand, factor.data(),
                        BandMatrix<double>::kLd, pivots.data(), norm1, &rcond);
  if (info != 0 || !(rcond * kSingularConditionLimit >= 1.0)) {
    return OracleOutcome::failed(FailureReason::kSingularSystem);
  }

  // Double-precision factors, extended-precision residuals: each refinement
  // step gains roughly -log10(cond * eps_double) digits.
  std::vector<Real> solution(load.size(), 0.0L);
  std::vector<double> correction(load.size());
  for (int step = 0; step <= kRefinementSteps; ++step) {
    for (int c = 0; c < kCases; ++c) {
      for (int i = 0; i < n; ++i) {
        Real r = load[at(c, i)];
        for (int j = std::max(0, i - kHalfBand); j <= std::min(n - 1, i + kHalfBand); ++j) {
          r -= stiffness.at(i, j) * solution[at(c, j)];
        }
        correction[at(c, i)] = static_cast<double>(r);
      }
    }
    info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kHalfBand, kHalfBand, kCases, factor.data(),
                          BandMatrix<double>::kLd, pivots.data(), correction.data(), n);
    if (info != 0) return OracleOutcome::failed(FailureReason::kSingularSystem);
    for (std::size_t i = 0; i < solution.size(); ++i) solution[i] += correction[i];
  }

  auto tip_state = [&](int column, Vec3& u, Vec3& theta) {
    for (int a = 0; a < 3; ++a) {
      u(a) = solution[at(column, tip_dof + a)] * scale[tip_dof + a];
      theta(a) = solution[at(column, tip_dof + 3 + a)] * scale[tip_dof + 3 + a];
    }
  };
  Vec3 u, theta;
  tip_state(0, u, theta);
  const Real delta_xi = (u + theta.cross(lever)).z();
  tip_state(1, u, theta);
  const Real delta_eta = (u + theta.cross(lever)).y();
  tip_state(2, u, theta);
  const Real twist_deg = theta.x() * 180.0L / std::numbers::pi_v<Real>;

  StiffnessTriple k{static_cast<double>(geometry.force_n / delta_xi), static_cast<double>(geometry.force_n / delta_eta),
                    static_cast<double>(geometry.torque_n_mm / twist_deg)};
  for (double v : k.to_array()) {
    if (!std::isfinite(v) || !(v > 0.0)) return OracleOutcome::failed(FailureReason::kNonPositiveStiffness);
  }
  return OracleOutcome::success(k);
}

OracleOutcome noisy_evaluate(const JointConfig& cfg, const Material& material,
                             const Fidelity& fidelity, std::uint64_t seed, int mesh_density) {
  if (fidelity.is_exact()) {
    throw Error(ErrorCode::kInvalidArgument, "noisy_evaluate requires a noisy fidelity");
  }
  OracleOutcome outcome = evaluate_stiffness(cfg, material, mesh_density);
  if (!outcome.ok() || fidelity.noise_cap == 0.0) return outcome;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor(1.0 - fidelity.noise_cap, 1.0 + fidelity.noise_cap);
  auto& k = *outcome.stiffness;
  k.k_xi *= factor(rng);
  k.k_eta *= factor(rng);
  k.k_zeta *= factor(rng);
  return outcome;
}

OracleOutcome evaluate_at(const JointConfig& cfg, const Material& material,
                          const Fidelity& fidelity, std::uint64_t seed) {
  if (fidelity.is_exact()) return evaluate_stiffness(cfg, material, kExactMeshDensity);
  return noisy_evaluate(cfg, material, fidelity, seed);
}

double residual(const StiffnessTriple& k, const StiffnessTriple& target) {
  const auto kv = k.to_array();
  const auto tv = target.to_array();
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (tv[i] == 0.0) throw Error(ErrorCode::kDomain, "target stiffness component is zero");
    const double rel = (kv[i] - tv[i]) / tv[i];
    sum += rel * rel;
  }
  return sum;
}

std::vector<double> synthetic_centers(std::size_t dims) {
  static constexpr double kPattern[] = {1.0, -2.0, 3.0, -1.0, 2.0, 0.0};
  std::vector<double> c(dims);
  for (std::size_t i = 0; i < dims; ++i) c[i] = kPattern[i % std::size(kPattern)];
  return c;
}

SyntheticFunction synthetic_info(std::string_view name) {
  if (name == "sphere" || name == "rosenbrock" || name == "mixed-integer-quadratic") {
    return {std::string(name), 0.0};
  }
  throw Error(ErrorCode::kUnknownFunction, "unknown synthetic function '" + std::string(name) + "'");
}

double synthetic_function(std::string_view name, std::span<const double> x) {
  if (name == "sphere") {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  }
  if (name == "rosenbrock") {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      s += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
    }
    return s;
  }
  if (name == "mixed-integer-quadratic") {
    const auto c = synthetic_centers(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    return s;
  }
  throw Error(ErrorCode::kUnknownFunction, "unknown synthetic function '" + std::string(name) + "'");
}

}  // namespace wavejoint
