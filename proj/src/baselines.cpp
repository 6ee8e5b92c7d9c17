#include "wavejoint/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "wavejoint/errors.hpp"

namespace wavejoint {

Dataset::Dataset(std::vector<Observation> observations) {
  for (const auto& o : observations) add(o);
}

void Dataset::add(const Observation& obs) {
  for (double k : obs.stiffness.to_array()) {
    if (!(k > 0.0) || !std::isfinite(k)) {
      throw Error(ErrorCode::kInvalidArgument, "dataset stiffness components must be positive");
    }
  }
  obs_.push_back(obs);
}

NearestResult nearest_neighbor(const Dataset& d, const StiffnessTriple& target) {
  if (d.empty()) throw Error(ErrorCode::kEmptyDataset, "nearest neighbor on an empty dataset");
  NearestResult best{d[0].config, residual(d[0].stiffness, target), 0};
  for (std::size_t i = 1; i < d.size(); ++i) {
    const double r = residual(d[i].stiffness, target);
    if (r < best.residual) best = {d[i].config, r, i};
  }
  return best;
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double output_width(const VariableBounds& v) { return v.upper > v.lower ? v.upper - v.lower : 1.0; }

}  // namespace

Eigen::MatrixXd InverseNet::inputs(const Dataset& d) const {
  Eigen::MatrixXd x(3, d.size());
  for (std::size_t j = 0; j < d.size(); ++j) {
    const auto k = d[j].stiffness.to_array();
    for (int i = 0; i < 3; ++i) x(i, j) = (std::log10(k[i]) - in_mean_[i]) / in_scale_[i];
  }
  return x;
}

Eigen::MatrixXd InverseNet::targets(const Dataset& d) const {
  const Bounds& b = hyper_.bounds;
  Eigen::MatrixXd y(kJointDims, d.size());
  for (std::size_t j = 0; j < d.size(); ++j) {
    const auto c = d[j].config.to_array();
    for (std::size_t i = 0; i < kJointDims; ++i) y(i, j) = (c[i] - b[i].lower) / output_width(b[i]);
  }
  return y;
}

Eigen::MatrixXd InverseNet::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::MatrixXd z = (w_[l] * a).colwise() + b_[l];
    a = l + 1 < w_.size() ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return a;
}

double InverseNet::loss(const Dataset& d) const {
  if (d.empty()) return 0.0;
  return (forward(inputs(d)) - targets(d)).squaredNorm() / static_cast<double>(d.size() * kJointDims);
}

std::vector<double> InverseNet::predict_raw(const StiffnessTriple& k) const {
  const auto ka = k.to_array();
  Eigen::MatrixXd x(3, 1);
  for (int i = 0; i < 3; ++i) {
    if (!(ka[i] > 0.0)) throw Error(ErrorCode::kDomain, "inverse net needs positive stiffness");
    x(i, 0) = (std::log10(ka[i]) - in_mean_[i]) / in_scale_[i];
  }
  const Eigen::MatrixXd y = forward(x);
  const Bounds& b = hyper_.bounds;
  std::vector<double> out(kJointDims);
  for (std::size_t i = 0; i < kJointDims; ++i) out[i] = b[i].lower + y(i, 0) * output_width(b[i]);
  return out;
}

void InverseNet::train_more(const Dataset& d, int epochs) {
  const Eigen::MatrixXd x = inputs(d);
  const Eigen::MatrixXd t = targets(d);
  const std::size_t layers = w_.size();
  const double scale = 2.0 / static_cast<double>(d.size() * kJointDims);
  std::vector<Eigen::MatrixXd> acts(layers + 1);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    acts[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
      Eigen::MatrixXd z = (w_[l] * acts[l]).colwise() + b_[l];
      acts[l + 1] = l + 1 < layers ? Eigen::MatrixXd(z.array().tanh()) : z;
    }
    Eigen::MatrixXd delta = scale * (acts[layers] - t);
    ++adam_step_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_step_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_step_));
    for (std::size_t l = layers; l-- > 0;) {
      const Eigen::MatrixXd gw = delta * acts[l].transpose();
      const Eigen::VectorXd gb = delta.rowwise().sum();
      if (l > 0) delta = (w_[l].transpose() * delta).array() * (1.0 - acts[l].array().square());
      mw_[l] = kBeta1 * mw_[l] + (1.0 - kBeta1) * gw;
      vw_[l] = kBeta2 * vw_[l] + (1.0 - kBeta2) * gw.cwiseAbs2();
      mb_[l] = kBeta1 * mb_[l] + (1.0 - kBeta1) * gb;
      vb_[l] = kBeta2 * vb_[l] + (1.0 - kBeta2) * gb.cwiseAbs2();
      w_[l].array() -= hyper_.learning_rate * (mw_[l].array() / c1) / ((vw_[l].array() / c2).sqrt() + kAdamEps);
      b_[l].array() -= hyper_.learning_rate * (mb_[l].array() / c1) / ((vb_[l].array() / c2).sqrt() + kAdamEps);
    }
  }
  final_loss_ = loss(d);
}

InverseNet train_inverse_net(const Dataset& d, const NetHyper& hyper) {
  if (d.size() < 10) throw Error(ErrorCode::kInsufficientData, "inverse net needs at least 10 observations");
  if (hyper.bounds.size() != kJointDims) throw Error(ErrorCode::kInvalidArgument, "inverse net needs joint bounds");
  if (hyper.epochs < 0 || !(hyper.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 0 and learning rate > 0");
  }
  for (int h : hyper.hidden) {
    if (h < 1) throw Error(ErrorCode::kInvalidArgument, "hidden layer sizes must be >= 1");
  }

  InverseNet net;
  net.hyper_ = hyper;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
  for (const auto& o : d) {
    const auto k = o.stiffness.to_array();
    for (int i = 0; i < 3; ++i) {
      sum[i] += std::log10(k[i]);
      sq[i] += std::log10(k[i]) * std::log10(k[i]);
    }
  }
  const double n = static_cast<double>(d.size());
  net.in_mean_ = sum / n;
  for (int i = 0; i < 3; ++i) {
    const double var = std::max(0.0, sq[i] / n - net.in_mean_[i] * net.in_mean_[i]);
    net.in_scale_[i] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  std::vector<int> sizes{3};
  sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  sizes.push_back(static_cast<int>(kJointDims));
  std::mt19937_64 rng(hyper.seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double a = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
    std::uniform_real_distribution<double> unif(-a, a);
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unif(rng);
    net.w_.push_back(w);
    net.b_.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
    net.mw_.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    net.vw_.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    net.mb_.push_back(Eigen::VectorXd::Zero(w.rows()));
    net.vb_.push_back(Eigen::VectorXd::Zero(w.rows()));
  }
  net.initial_loss_ = net.loss(d);
  net.final_loss_ = net.initial_loss_;
  net.train_more(d, hyper.epochs);
  return net;
}

ZeroShotResult zero_shot_net(const InverseNet& net, const StiffnessTriple& target, const Bounds& b) {
  ZeroShotResult out;
  out.raw = net.predict_raw(target);
  const auto projected = clamp_and_round(out.raw, b);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (projected[i] != out.raw[i]) out.clamped.push_back(b[i].name);
  }
  out.config = JointConfig::from_span(projected);
  return out;
}

std::vector<double> IncrementalResult::best_trace() const {
  std::vector<double> out(trace.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.size(); ++i) out[i] = best = std::min(best, trace[i]);
  return out;
}

IncrementalResult incremental_net(Dataset d, const StiffnessTriple& target, const StiffnessOracle& oracle,
                                  std::size_t budget, double tol, const Bounds& b,
                                  const IncrementalOptions& options) {
  if (budget < 1) throw Error(ErrorCode::kInvalidArgument, "budget must be >= 1");
  if (b.size() != kJointDims) throw Error(ErrorCode::kInvalidArgument, "incremental net needs joint bounds");
  residual(target, target);  // rejects zero target components
  InverseNet net = train_inverse_net(d, options.hyper);
  std::mt19937_64 rng(options.seed);

  IncrementalResult result;
  std::vector<std::vector<double>> visited;
  std::optional<double> worst;
  bool perturb = false;

  auto resample_one = [&](std::vector<double> x) {
    std::uniform_int_distribution<std::size_t> pick(0, kJointDims - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t k = pick(rng);
    x[k] = b[k].lower + unif(rng) * (b[k].upper - b[k].lower);
    return clamp_and_round(x, b);
  };

  for (std::size_t it = 0; it < budget; ++it) {
    std::vector<double> x = clamp_and_round(net.predict_raw(target), b);
    const bool repeat = std::find(visited.begin(), visited.end(), x) != visited.end();
    if (perturb || repeat) {
      x = resample_one(x);
      for (int attempt = 0; attempt < 1000 && std::find(visited.begin(), visited.end(), x) != visited.end();
           ++attempt) {
        x = resample_one(x);
      }
    }
    visited.push_back(x);
    const JointConfig cfg = JointConfig::from_span(x);
    const OracleOutcome outcome = oracle(cfg);
    ++result.evaluations;

    double r;
    if (outcome.ok()) {
      r = residual(*outcome.stiffness, target);
      worst = std::max(worst.value_or(r), r);
      if (!result.valid || r < result.residual) {
        result.valid = true;
        result.residual = r;
        result.config = cfg;
        result.stiffness = outcome.stiffness;
      }
      perturb = false;
    } else {
      r = worst ? 2.0 * *worst : 1e6;
      ++result.failures;
      perturb = true;
      if (!result.valid && it == 0) {
        result.config = cfg;
        result.residual = r;
      }
    }
    result.trace.push_back(r);
    if (outcome.ok() && r <= tol) break;

    if (outcome.ok() || options.literal_augmentation) {
      d.add({cfg, options.literal_augmentation ? target : *outcome.stiffness, Fidelity::exact()});
      if (it + 1 < budget) net.train_more(d, options.hyper.retrain_epochs);
    }
  }
  result.dataset_size = d.size();
  return result;
}

}  // namespace wavejoint
