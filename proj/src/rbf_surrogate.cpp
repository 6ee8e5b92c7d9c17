#include "wavejoint/rbf_surrogate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "wavejoint/errors.hpp"

namespace wavejoint {

double Kernel::operator()(double r) const {
  switch (family) {
    case KernelFamily::kGaussian: return std::exp(-gamma * r * r);
    case KernelFamily::kLinear: return r;
    case KernelFamily::kCubic: return r * r * r;
    case KernelFamily::kThinPlate: return r > 0.0 ? r * r * std::log(r) : 0.0;
    case KernelFamily::kMultiquadric: return std::sqrt(1.0 + gamma * r * r);
  }
  return 0.0;
}

void Kernel::check() const {
  const bool shaped = family == KernelFamily::kGaussian || family == KernelFamily::kMultiquadric;
  if (shaped && !(gamma > 0.0 && std::isfinite(gamma))) {
    throw Error(ErrorCode::kInvalidArgument, "kernel shape parameter must be positive");
  }
}

int Kernel::default_tail_degree() const {
  switch (family) {
    case KernelFamily::kLinear:
    case KernelFamily::kCubic:
    case KernelFamily::kThinPlate: return 1;
    case KernelFamily::kGaussian:
    case KernelFamily::kMultiquadric: return 0;
  }
  return 0;
}

double Kernel::definiteness_sign() const {
  return (family == KernelFamily::kLinear || family == KernelFamily::kMultiquadric) ? -1.0 : 1.0;
}

std::string Kernel::name() const {
  std::ostringstream os;
  switch (family) {
    case KernelFamily::kGaussian: os << "gaussian:" << gamma; break;
    case KernelFamily::kLinear: os << "linear"; break;
    case KernelFamily::kCubic: os << "cubic"; break;
    case KernelFamily::kThinPlate: os << "thin-plate"; break;
    case KernelFamily::kMultiquadric: os << "multiquadric:" << gamma; break;
  }
  return os.str();
}

Kernel Kernel::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  double gamma = 1.0;
  if (colon != std::string_view::npos) {
    try {
      gamma = std::stod(std::string(text.substr(colon + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad kernel shape in '" + std::string(text) + "'");
    }
  }
  Kernel k;
  if (head == "gaussian") k = gaussian(gamma);
  else if (head == "multiquadric") k = multiquadric(gamma);
  else if (head == "linear" && colon == std::string_view::npos) k = linear();
  else if (head == "cubic" && colon == std::string_view::npos) k = cubic();
  else if (head == "thin-plate" && colon == std::string_view::npos) k = thin_plate();
  else throw Error(ErrorCode::kInvalidArgument, "unknown kernel '" + std::string(text) + "'");
  k.check();
  return k;
}

double SurrogateSample::tolerance() const {
  if (fidelity.is_exact()) return 0.0;
  if (band >= 0.0) return band;
  return fidelity.noise_cap * std::abs(value);
}

namespace {

constexpr double kCoincidentTol = 1e-12;

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

bool coincident(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > kCoincidentTol) return false;
  }
  return true;
}

struct NormalizedSample {
  std::vector<double> unit;
  SurrogateSample sample;
};

// Canonical ordering makes the fit independent of input order.
bool canonical_less(const NormalizedSample& a, const NormalizedSample& b) {
  if (a.unit != b.unit) return a.unit < b.unit;
  if (a.sample.fidelity.is_exact() != b.sample.fidelity.is_exact()) return a.sample.fidelity.is_exact();
  return a.sample.value < b.sample.value;
}

std::vector<NormalizedSample> merge_coincident(std::vector<NormalizedSample> items) {
  std::sort(items.begin(), items.end(), canonical_less);
  std::vector<bool> used(items.size(), false);
  std::vector<NormalizedSample> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> group{i};
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      if (items[j].unit[0] - items[i].unit[0] > kCoincidentTol) break;
      if (!used[j] && coincident(items[i].unit, items[j].unit)) group.push_back(j);
    }
    for (std::size_t g : group) used[g] = true;

    NormalizedSample merged = items[i];
    std::optional<double> exact_value;
    double noisy_sum = 0.0, noisy_band = std::numeric_limits<double>::infinity();
    std::size_t noisy_count = 0;
    Fidelity noisy_fidelity = Fidelity::noisy(0.0);
    for (std::size_t g : group) {
      const auto& s = items[g].sample;
      if (s.fidelity.is_exact()) {
        if (exact_value && std::abs(*exact_value - s.value) > kCoincidentTol * std::max(1.0, std::abs(s.value))) {
          throw Error(ErrorCode::kDuplicateExactNodeConflict,
                      "two exact observations share a point but differ in value");
        }
        exact_value = s.value;
      } else {
        noisy_sum += s.value;
        ++noisy_count;
        if (s.tolerance() < noisy_band) {
          noisy_band = s.tolerance();
          noisy_fidelity = s.fidelity;
        }
      }
    }
    if (exact_value) {
      merged.sample.value = *exact_value;
      merged.sample.fidelity = Fidelity::exact();
      merged.sample.band = -1.0;
    } else if (noisy_count > 1) {
      merged.sample.value = noisy_sum / static_cast<double>(noisy_count);
      merged.sample.fidelity = noisy_fidelity;
      merged.sample.band = noisy_band;
    }
    out.push_back(std::move(merged));
  }
  return out;
}

Eigen::MatrixXd tail_basis(const std::vector<std::vector<double>>& centers, int degree) {
  const auto n = static_cast<Eigen::Index>(centers.size());
  if (degree < 0 || n == 0) return Eigen::MatrixXd(n, 0);
  const auto d = static_cast<Eigen::Index>(centers.front().size());
  const Eigen::Index m = degree == 0 ? 1 : 1 + d;
  Eigen::MatrixXd p(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i, 0) = 1.0;
    if (degree >= 1) {
      for (Eigen::Index k = 0; k < d; ++k) p(i, 1 + k) = centers[i][k];
    }
  }
  return p;
}

using ExtVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

ExtVector residual_ext(const Eigen::MatrixXd& a, const ExtVector& x, const Eigen::VectorXd& rhs) {
  ExtVector r(rhs.size());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    long double acc = rhs(i);
    for (Eigen::Index j = 0; j < a.cols(); ++j) acc -= static_cast<long double>(a(i, j)) * x(j);
    r(i) = acc;
  }
  return r;
}

// Double-precision factorization, extended-precision iterative refinement;
// nullopt if the system is numerically singular.
template <typename Lu>
std::optional<ExtVector> refine(const Lu& lu, const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs) {
  constexpr int kSteps = 3;
  ExtVector x = ExtVector::Zero(rhs.size());
  for (int step = 0; step <= kSteps; ++step) {
    const Eigen::VectorXd r = residual_ext(a, x, rhs).cast<double>();
    const Eigen::VectorXd dx = lu.solve(r);
    if (!dx.allFinite()) return std::nullopt;
    x += dx.cast<long double>();
  }
  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  if (!(static_cast<double>(residual_ext(a, x, rhs).cwiseAbs().maxCoeff()) <= 1e-9 * scale)) return std::nullopt;
  return x;
}

std::optional<ExtVector> solve_system(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  if (lu.rcond() > 1e-18) {
    if (auto x = refine(lu, a, rhs)) return x;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> full(a);
  if (!full.isInvertible()) return std::nullopt;
  return refine(full, a, rhs);
}

}  // namespace

Surrogate fit(std::span<const SurrogateSample> samples, const Kernel& kernel, const Bounds& box,
              const FitOptions& options) {
  kernel.check();
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "fit needs at least one observation");

  Surrogate s;
  s.kernel_ = kernel;
  s.box_ = box;

  std::vector<NormalizedSample> items;
  items.reserve(samples.size());
  for (const auto& sample : samples) {
    if (sample.point.size() != box.size()) {
      throw Error(ErrorCode::kInvalidArgument, "observation dimension does not match the box");
    }
    for (std::size_t k = 0; k < box.size(); ++k) {
      if (!(sample.point[k] >= box[k].lower && sample.point[k] <= box[k].upper)) {
        throw Error(ErrorCode::kBoundViolation, "observation outside the normalization box");
      }
    }
    if (!std::isfinite(sample.value)) {
      throw Error(ErrorCode::kInvalidArgument, "observation value must be finite");
    }
    items.push_back({s.normalize(sample.point), sample});
  }
  items = merge_coincident(std::move(items));

  const auto n = static_cast<Eigen::Index>(items.size());
  for (auto& item : items) {
    s.centers_.push_back(std::move(item.unit));
    s.nodes_.push_back(std::move(item.sample));
  }

  int degree = options.tail_degree.value_or(kernel.default_tail_degree());
  degree = std::clamp(degree, kNoTail, 1);
  Eigen::MatrixXd p = tail_basis(s.centers_, degree);
  if (degree == 1 && (p.rows() < p.cols() || Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(p).rank() < p.cols())) {
    degree = 0;
    p = tail_basis(s.centers_, degree);
  }
  s.tail_degree_ = degree;
  const Eigen::Index m = p.cols();

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + m, n + m);
  double off_diag_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = kernel(0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = kernel(distance(s.centers_[i], s.centers_[j]));
      a(i, j) = a(j, i) = v;
      off_diag_sum += std::abs(v);
    }
  }
  a.topRightCorner(n, m) = p;
  a.bottomLeftCorner(m, n) = p.transpose();

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
  Eigen::VectorXd band(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs(i) = s.nodes_[i].value;
    band(i) = s.nodes_[i].tolerance();
  }

  const double kernel_scale =
      n > 1 ? off_diag_sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1)) : 1.0;
  Eigen::VectorXd smoothing = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (band(i) > 0.0) smoothing(i) = options.smoothing * std::max(kernel_scale, 1e-12);
  }

  const double sign = kernel.definiteness_sign();
  ExtVector solution;
  for (int round = 0;; ++round) {
    const bool last = round >= options.max_band_rounds;
    if (last) smoothing.setZero();
    Eigen::MatrixXd system = a;
    system.topLeftCorner(n, n).diagonal() += sign * smoothing;
    auto solved = solve_system(system, rhs);
    if (!solved) {
      throw Error(ErrorCode::kSingularInterpolation, "RBF system is singular for kernel " + kernel.name());
    }
    solution = std::move(*solved);
    if (smoothing.isZero()) break;

    const Eigen::VectorXd fitted = a.topRows(n) * solution.cast<double>();
    bool violated = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (smoothing(i) > 0.0 && std::abs(fitted(i) - rhs(i)) > band(i)) {
        smoothing(i) *= 0.25;
        violated = true;
      }
    }
    if (!violated || last) break;
  }

  s.lambda_ext_ = solution.head(n);
  s.tail_ext_ = solution.tail(m);
  s.lambda_ = s.lambda_ext_.cast<double>();
  s.tail_ = s.tail_ext_.cast<double>();
  return s;
}

std::vector<double> Surrogate::normalize(std::span<const double> x) const {
  std::vector<double> u(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double width = box_[k].upper - box_[k].lower;
    u[k] = width > 0.0 ? (x[k] - box_[k].lower) / width : 0.0;
  }
  return u;
}

std::vector<double> Surrogate::denormalize(std::span<const double> unit_x) const {
  std::vector<double> x(unit_x.size());
  for (std::size_t k = 0; k < unit_x.size(); ++k) {
    x[k] = box_[k].lower + unit_x[k] * (box_[k].upper - box_[k].lower);
  }
  return x;
}

double Surrogate::eval_normalized(std::span<const double> unit_x) const {
  long double value = 0.0L;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    value += lambda_ext_(static_cast<Eigen::Index>(i)) * kernel_(distance(unit_x, centers_[i]));
  }
  if (tail_ext_.size() > 0) {
    value += tail_ext_(0);
    for (Eigen::Index k = 1; k < tail_ext_.size(); ++k) value += tail_ext_(k) * unit_x[k - 1];
  }
  return static_cast<double>(value);
}

double Surrogate::eval(std::span<const double> x) const { return eval_normalized(normalize(x)); }

double Surrogate::value_spread() const {
  if (nodes_.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(nodes_.begin(), nodes_.end(),
                                            [](const auto& a, const auto& b) { return a.value < b.value; });
  return hi->value - lo->value;
}

double min_distance(std::span<const double> unit_x, const std::vector<std::vector<double>>& unit_centers) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : unit_centers) {
    double s = 0.0;
    for (std::size_t k = 0; k < c.size() && s < best * best; ++k) s += (unit_x[k] - c[k]) * (unit_x[k] - c[k]);
    best = std::min(best, std::sqrt(s));
  }
  return best;
}

double merit(const Surrogate& s, std::span<const double> x, double weight,
             const std::vector<std::vector<double>>& unit_centers) {
  const auto u = s.normalize(x);
  const double value = s.eval_normalized(u);
  if (weight == 0.0) return value;
  return value - weight * min_distance(u, unit_centers);
}

double merit(const Surrogate& s, std::span<const double> x, double weight) {
  return merit(s, x, weight, s.centers());
}

WeightSchedule::WeightSchedule() : WeightSchedule({0.5, 0.2, 0.05, 0.01, 0.0}) {}

WeightSchedule::WeightSchedule(std::vector<double> cycle) : cycle_(std::move(cycle)) {
  if (cycle_.empty()) throw Error(ErrorCode::kInvalidArgument, "weight cycle is empty");
  bool has_zero = false;
  for (double w : cycle_) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "weight cycle entries must be finite and >= 0");
    }
    has_zero = has_zero || w == 0.0;
  }
  if (!has_zero) throw Error(ErrorCode::kInvalidArgument, "weight cycle needs a pure exploitation step");
}

double WeightSchedule::weight(std::size_t step, double spread) const {
  return relative(step) * (spread > 0.0 ? spread : 1.0);
}

}  // namespace wavejoint
