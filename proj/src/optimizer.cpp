#include "wavejoint/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "wavejoint/errors.hpp"

namespace wavejoint {

const char* stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::kBudget: return "budget";
    case StopReason::kThreshold: return "threshold";
    case StopReason::kStagnation: return "stagnation";
    case StopReason::kAccepted: return "accepted";
    case StopReason::kMaxReals: return "max-reals";
  }
  return "?";
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Problem Problem::joint(const StiffnessTriple& target, const Material& material, const Bounds& bounds,
                       const Fidelity& fidelity) {
  for (double v : target.to_array()) {
    if (v == 0.0) throw Error(ErrorCode::kInvalidArgument, "target stiffness components must be nonzero");
  }
  material.check();
  if (bounds.size() != kJointDims) throw Error(ErrorCode::kInvalidArgument, "joint bounds need 5 variables");
  Problem p;
  p.bounds = bounds;
  p.fidelity = fidelity;
  p.target = target;
  p.objective = [target, material](std::span<const double> x, const Fidelity& fid, std::uint64_t seed) {
    const OracleOutcome outcome = evaluate_at(JointConfig::from_span(x), material, fid, seed);
    if (!outcome.ok()) return ObjectiveReply::failure();
    return ObjectiveReply{true, residual(*outcome.stiffness, target), outcome.stiffness};
  };
  return p;
}

Problem Problem::synthetic(const std::string& name, const Bounds& bounds) {
  synthetic_info(name);  // validates the name
  Problem p;
  p.bounds = bounds;
  p.objective = [name](std::span<const double> x, const Fidelity&, std::uint64_t) {
    return ObjectiveReply{true, synthetic_function(name, x), std::nullopt};
  };
  return p;
}

std::optional<JointConfig> RunReport::best_config() const {
  if (best_point.size() != kJointDims) return std::nullopt;
  return JointConfig::from_span(best_point);
}

std::optional<std::size_t> RunReport::evaluations_to_reach(double threshold) const {
  if (initial_best < threshold) return 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i] < threshold) return i + 1;
  }
  return std::nullopt;
}

OptimizerState::OptimizerState(Bounds b, OptimizerSettings s, std::uint64_t seed)
    : bounds(std::move(b)), settings(std::move(s)), rng(seed) {}

std::optional<double> OptimizerState::best_value() const {
  if (!best_index) return std::nullopt;
  return archive[*best_index].value;
}

std::optional<double> OptimizerState::worst_value() const {
  std::optional<double> worst;
  for (const auto& e : archive) {
    if (!e.failed && (!worst || e.value > *worst)) worst = e.value;
  }
  return worst;
}

namespace {

std::vector<double> to_unit(const Bounds& b, std::span<const double> x) {
  std::vector<double> u(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double w = b[k].upper - b[k].lower;
    u[k] = w > 0.0 ? (x[k] - b[k].lower) / w : 0.0;
  }
  return u;
}

std::vector<double> from_unit(const Bounds& b, std::span<const double> u) {
  std::vector<double> x(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) x[k] = b[k].lower + u[k] * (b[k].upper - b[k].lower);
  return clamp_and_round(x, b);
}

// Unit-cube step of one integer unit; 0 for fixed or continuous variables.
std::vector<double> integer_steps(const Bounds& b) {
  std::vector<double> steps(b.size(), 0.0);
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double w = b[k].upper - b[k].lower;
    if (b[k].integral && w > 0.0) steps[k] = 1.0 / w;
  }
  return steps;
}

std::vector<double> random_unit_point(const Bounds& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(b.size());
  for (auto& v : u) v = unif(rng);
  return to_unit(b, from_unit(b, u));
}

bool near_any(const std::vector<double>& x, const std::vector<std::vector<double>>& pts, double tol) {
  return min_distance(x, pts) < tol;
}

double transform_value(ValueTransform t, double y, double shift, double offset) {
  switch (t) {
    case ValueTransform::kNone:
    case ValueTransform::kClipMedian: return y;
    case ValueTransform::kLog: return std::log10(y - shift + offset);
  }
  return y;
}

}  // namespace

std::vector<std::vector<double>> OptimizerState::unit_points() const {
  std::vector<std::vector<double>> pts;
  pts.reserve(archive.size());
  for (const auto& e : archive) pts.push_back(to_unit(bounds, e.x));
  return pts;
}

std::vector<std::vector<double>> initial_design(const Bounds& bounds, std::size_t n_points, std::uint64_t seed,
                                                const std::vector<std::vector<double>>& existing) {
  if (n_points == 0) throw Error(ErrorCode::kInvalidArgument, "initial design needs at least one point");
  const std::size_t dims = bounds.size();
  bool continuous_freedom = false;
  for (std::size_t k = 0; k < dims; ++k) {
    continuous_freedom = continuous_freedom || (!bounds[k].integral && bounds[k].upper > bounds[k].lower);
  }
  if (!continuous_freedom) {
    const std::size_t combos = bounds.integral_combinations();
    if (combos < n_points || combos - n_points < existing.size()) {
      throw Error(ErrorCode::kCannotPlaceDistinctPoints,
                  "box has too few distinct integral points for the requested design");
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<std::size_t>> strata(dims);
  for (auto& perm : strata) {
    perm.resize(n_points);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
  }

  std::vector<std::vector<double>> taken = existing;
  std::vector<std::vector<double>> design;
  design.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    std::vector<double> x(dims);
    for (std::size_t k = 0; k < dims; ++k) {
      const double u = (static_cast<double>(strata[k][i]) + unif(rng)) / static_cast<double>(n_points);
      x[k] = bounds[k].lower + u * (bounds[k].upper - bounds[k].lower);
    }
    x = clamp_and_round(x, bounds);
    // Integral snapping can collide; resample uniformly until distinct.
    for (int attempt = 0; std::find(taken.begin(), taken.end(), x) != taken.end(); ++attempt) {
      if (attempt > 100000) {
        throw Error(ErrorCode::kCannotPlaceDistinctPoints, "could not place a distinct design point");
      }
      for (std::size_t k = 0; k < dims; ++k) {
        x[k] = bounds[k].lower + unif(rng) * (bounds[k].upper - bounds[k].lower);
      }
      x = clamp_and_round(x, bounds);
    }
    taken.push_back(x);
    design.push_back(std::move(x));
  }
  return design;
}

std::vector<JointConfig> initial_joint_design(const Bounds& bounds, std::size_t n_points, std::uint64_t seed) {
  std::vector<JointConfig> out;
  for (const auto& x : initial_design(bounds, n_points, seed)) out.push_back(JointConfig::from_span(x));
  return out;
}

void refresh_surrogate(OptimizerState& state) {
  const auto& archive = state.archive;
  std::vector<std::size_t> chosen(archive.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  const std::size_t cap = std::max<std::size_t>(1, state.settings.max_surrogate_nodes);
  if (chosen.size() > cap) {
    // Keep the best half, then fill with the most recent entries.
    std::vector<std::size_t> by_value = chosen;
    std::stable_sort(by_value.begin(), by_value.end(),
                     [&](std::size_t a, std::size_t b) { return archive[a].value < archive[b].value; });
    std::vector<bool> keep(archive.size(), false);
    for (std::size_t i = 0; i < cap / 2; ++i) keep[by_value[i]] = true;
    std::size_t kept = cap / 2;
    for (std::size_t i = archive.size(); i-- > 0 && kept < cap;) {
      if (!keep[i]) {
        keep[i] = true;
        ++kept;
      }
    }
    chosen.clear();
    for (std::size_t i = 0; i < archive.size(); ++i) {
      if (keep[i]) chosen.push_back(i);
    }
  }

  std::vector<double> values;
  for (std::size_t i : chosen) values.push_back(archive[i].value);
  const double shift = std::min(0.0, *std::min_element(values.begin(), values.end()));
  double clip = std::numeric_limits<double>::infinity();
  if (state.settings.transform == ValueTransform::kClipMedian) {
    std::vector<double> sorted = values;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    clip = sorted[sorted.size() / 2];
  }
  const ValueTransform t = state.settings.transform;
  const double offset = state.settings.log_offset;

  std::vector<SurrogateSample> samples;
  samples.reserve(chosen.size());
  for (std::size_t i : chosen) {
    const auto& e = archive[i];
    SurrogateSample s;
    s.point = e.x;
    s.fidelity = e.fidelity;
    const double y = std::min(e.value, clip);
    s.value = transform_value(t, y, shift, offset);
    if (!e.fidelity.is_exact()) {
      const double cap_rel = e.fidelity.noise_cap;
      const double lo = transform_value(t, std::min(y * (1.0 - cap_rel), clip), shift, offset);
      const double hi = transform_value(t, std::min(y * (1.0 + cap_rel), clip), shift, offset);
      s.band = std::max(std::abs(hi - s.value), std::abs(s.value - lo));
    }
    samples.push_back(std::move(s));
  }

  std::vector<Kernel> kernels{state.settings.kernel};
  if (state.settings.kernel.family != KernelFamily::kCubic) kernels.push_back(Kernel::cubic());
  kernels.push_back(Kernel::gaussian(1.0));
  state.surrogate.reset();
  for (const auto& k : kernels) {
    try {
      state.surrogate = fit(samples, k, state.bounds);
      return;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularInterpolation) throw;
    }
  }
}

namespace {

struct MeritSearch {
  const Surrogate& surrogate;
  const std::vector<std::vector<double>>& visited;
  const std::vector<double>& int_steps;
  const Bounds& bounds;
  double weight;
  double min_dist;

  double operator()(const std::vector<double>& u) const {
    const double d = min_distance(u, visited);
    if (d < min_dist) return std::numeric_limits<double>::infinity();
    return surrogate.eval_normalized(u) - weight * (std::isfinite(d) ? d : 0.0);
  }

  std::pair<std::vector<double>, double> descend(std::vector<double> u, double initial_step, int halvings) const {
    double f = (*this)(u);
    double step = initial_step;
    const std::size_t dims = u.size();
    for (int level = 0; level <= halvings; ++level, step *= 0.5) {
      for (int iter = 0; iter < 200; ++iter) {
        std::vector<double> best_u;
        double best_f = f;
        for (std::size_t k = 0; k < dims; ++k) {
          const bool integral = bounds[k].integral;
          if (integral && int_steps[k] == 0.0) continue;
          if (!integral && bounds[k].upper == bounds[k].lower) continue;
          const double delta = integral ? int_steps[k] : step;
          for (double sgn : {-1.0, 1.0}) {
            std::vector<double> v = u;
            v[k] = u[k] + sgn * delta;
            if (integral) {
              if (v[k] < -1e-12 || v[k] > 1.0 + 1e-12) continue;
            } else {
              v[k] = std::clamp(v[k], 0.0, 1.0);
            }
            if (v[k] == u[k]) continue;
            const double fv = (*this)(v);
            if (fv < best_f) {
              best_f = fv;
              best_u = std::move(v);
            }
          }
        }
        if (best_u.empty()) break;
        u = std::move(best_u);
        f = best_f;
      }
    }
    return {std::move(u), f};
  }
};

}  // namespace

std::vector<double> propose_next(OptimizerState& state) {
  const Bounds& b = state.bounds;
  const auto visited = state.unit_points();
  const double min_dist = state.settings.min_distance;
  const std::size_t step_index = state.proposals++;

  auto random_unvisited = [&]() {
    std::vector<double> u = random_unit_point(b, state.rng);
    for (int attempt = 0; attempt < 1000 && near_any(u, visited, min_dist); ++attempt) {
      u = random_unit_point(b, state.rng);
    }
    return from_unit(b, u);
  };

  if (!state.surrogate) return random_unvisited();
  const Surrogate& s = *state.surrogate;
  const auto int_steps = integer_steps(b);
  const double weight = state.settings.weights.weight(step_index, s.value_spread());
  const MeritSearch search{s, visited, int_steps, b, weight, min_dist};

  // Once per weight cycle, try an unexplored integer neighbour of the incumbent.
  const double probe = state.settings.integer_probe_radius;
  if (probe > 0.0 && state.best_index && step_index % state.settings.weights.cycle().size() == 0) {
    const std::vector<double>& incumbent = visited[*state.best_index];
    std::vector<double> pick;
    double pick_value = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (int_steps[k] == 0.0) continue;
      for (double sgn : {-1.0, 1.0}) {
        std::vector<double> v = incumbent;
        v[k] += sgn * int_steps[k];
        if (v[k] < -1e-12 || v[k] > 1.0 + 1e-12 || near_any(v, visited, probe)) continue;
        const double sv = s.eval_normalized(v);
        if (sv < pick_value) {
          pick_value = sv;
          pick = std::move(v);
        }
      }
    }
    if (!pick.empty()) return from_unit(b, pick);
  }

  // Starts: the best archive points, then random points.
  std::vector<std::size_t> order(state.archive.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return state.archive[a].value < state.archive[c].value; });
  const std::size_t starts = std::max<std::size_t>(1, state.settings.multistarts);
  const std::size_t from_archive = std::min(order.size(), std::max<std::size_t>(1, starts / 4));

  std::vector<double> best_u;
  double best_f = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < starts; ++i) {
    std::vector<double> start =
        i < from_archive ? visited[order[i]] : random_unit_point(b, state.rng);
    auto [u, f] = search.descend(std::move(start), state.settings.initial_step, state.settings.step_halvings);
    if (f < best_f || best_u.empty()) {
      best_f = f;
      best_u = std::move(u);
    }
  }

  std::vector<double> x = from_unit(b, best_u);
  if (!near_any(to_unit(b, x), visited, min_dist)) return x;

  // Revisit: best unvisited integral neighbour, then a random point.
  std::vector<double> neighbour;
  double neighbour_f = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (int_steps[k] == 0.0) continue;
    for (double sgn : {-1.0, 1.0}) {
      std::vector<double> v = best_u;
      v[k] += sgn * int_steps[k];
      if (v[k] < -1e-12 || v[k] > 1.0 + 1e-12) continue;
      const double f = search(v);
      if (f < neighbour_f) {
        neighbour_f = f;
        neighbour = std::move(v);
      }
    }
  }
  if (!neighbour.empty()) return from_unit(b, neighbour);
  return random_unvisited();
}

void record(OptimizerState& state, std::span<const double> x, const ObjectiveReply& reply,
            const Fidelity& fidelity) {
  ArchiveEntry e;
  e.x.assign(x.begin(), x.end());
  e.fidelity = fidelity;
  if (reply.ok && std::isfinite(reply.value)) {
    e.value = reply.value;
    e.stiffness = reply.stiffness;
  } else {
    e.failed = true;
    const auto worst = state.worst_value();
    e.value = worst ? 2.0 * *worst : kFailurePenaltyFloor;
  }
  state.archive.push_back(std::move(e));
  const std::size_t idx = state.archive.size() - 1;
  if (!state.archive[idx].failed && (!state.best_index || state.archive[idx].value < state.archive[*state.best_index].value)) {
    state.best_index = idx;
  }
}

namespace {

std::size_t design_size(const Bounds& b, const OptimizerSettings& s) {
  return s.initial_points > 0 ? s.initial_points : 2 * (b.size() + 1);
}

void load_warm(OptimizerState& state, std::span<const WarmSample> warm, RunReport& report) {
  for (const auto& w : warm) {
    if (w.x.size() != state.bounds.size() || !state.bounds.contains(w.x)) {
      ++report.warm_filtered;
      continue;
    }
    const bool duplicate = std::any_of(state.archive.begin(), state.archive.end(), [&](const ArchiveEntry& e) {
      return e.x == w.x && e.fidelity.is_exact() && w.fidelity.is_exact();
    });
    if (duplicate) {
      ++report.warm_filtered;
      continue;
    }
    ObjectiveReply reply;
    if (w.value) reply = {true, *w.value, w.stiffness};
    record(state, w.x, reply, w.fidelity);
    state.archive.back().warm = true;
    ++report.warm_used;
  }
  if (auto best = state.best_value()) report.initial_best = *best;
}

void finish(const OptimizerState& state, RunReport& report, std::chrono::steady_clock::time_point t0) {
  report.archive = state.archive;
  if (report.best_point.empty()) {
    if (state.best_index) {
      const auto& e = state.archive[*state.best_index];
      report.best_point = e.x;
      report.best_valid = true;
      report.best_stiffness = e.stiffness;
      report.best_value = e.value;
    } else if (!state.archive.empty()) {
      report.best_point = state.archive.front().x;
      report.best_valid = false;
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RunReport minimize(const Problem& problem, const StopRule& stop, std::span<const WarmSample> warm_start,
                   std::uint64_t seed, const OptimizerSettings& settings) {
  if (stop.max_evaluations < 1) throw Error(ErrorCode::kInvalidArgument, "max_evaluations must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  OptimizerState state(problem.bounds, settings, mix_seed(seed, 0x5eed));
  RunReport report;
  load_warm(state, warm_start, report);

  std::size_t evaluations = 0;
  std::size_t last_improvement = 0;
  auto reached = [&] { return state.best_value() && *state.best_value() < stop.objective_threshold; };
  auto evaluate = [&](const std::vector<double>& x) {
    const double before = state.best_value().value_or(std::numeric_limits<double>::infinity());
    const ObjectiveReply reply = problem.objective(x, problem.fidelity, mix_seed(seed, evaluations));
    record(state, x, reply, problem.fidelity);
    ++evaluations;
    if (state.archive.back().failed) ++report.failed_evaluations;
    (problem.fidelity.is_exact() ? report.exact_evaluations : report.noisy_evaluations)++;
    const double after = state.best_value().value_or(std::numeric_limits<double>::infinity());
    if (after < before) last_improvement = evaluations;
    report.trace.push_back(after);
  };

  if (reached()) {
    report.stop_reason = StopReason::kThreshold;
    finish(state, report, t0);
    return report;
  }

  const std::size_t wanted = design_size(problem.bounds, settings);
  if (state.archive.size() < wanted) {
    const auto design =
        initial_design(problem.bounds, wanted - state.archive.size(), mix_seed(seed, 0x1d), state.unit_points().empty()
                                                                                                ? std::vector<std::vector<double>>{}
                                                                                                : [&] {
                                                                                                    std::vector<std::vector<double>> xs;
                                                                                                    for (const auto& e : state.archive) xs.push_back(e.x);
                                                                                                    return xs;
                                                                                                  }());
    for (const auto& x : design) {
      if (evaluations >= stop.max_evaluations || reached()) break;
      evaluate(x);
    }
  }

  report.stop_reason = StopReason::kBudget;
  while (true) {
    if (reached()) {
      report.stop_reason = StopReason::kThreshold;
      break;
    }
    if (evaluations >= stop.max_evaluations) {
      report.stop_reason = StopReason::kBudget;
      break;
    }
    if (stop.stagnation_window > 0 && evaluations - last_improvement >= stop.stagnation_window) {
      report.stop_reason = StopReason::kStagnation;
      break;
    }
    refresh_surrogate(state);
    evaluate(propose_next(state));
  }

  finish(state, report, t0);
  return report;
}

RunReport run_milestone(const Problem& problem, std::size_t sims_per_real, std::size_t max_reals,
                        double accept_threshold, std::uint64_t seed, const OptimizerSettings& settings,
                        std::span<const WarmSample> warm_start) {
  if (sims_per_real < 1 || max_reals < 1) {
    throw Error(ErrorCode::kInvalidArgument, "milestone protocol needs sims_per_real >= 1 and max_reals >= 1");
  }
  if (problem.noisy_fidelity.is_exact()) {
    throw Error(ErrorCode::kInvalidArgument, "milestone protocol needs a noisy simulator fidelity");
  }
  const auto t0 = std::chrono::steady_clock::now();
  OptimizerState state(problem.bounds, settings, mix_seed(seed, 0x5eed));
  RunReport report;
  load_warm(state, warm_start, report);
  const Fidelity noisy = problem.noisy_fidelity;
  const Fidelity exact = Fidelity::exact();

  std::vector<std::vector<double>> queue;
  const std::size_t wanted = design_size(problem.bounds, settings);
  if (state.archive.size() < wanted) {
    std::vector<std::vector<double>> existing;
    for (const auto& e : state.archive) existing.push_back(e.x);
    queue = initial_design(problem.bounds, wanted - state.archive.size(), mix_seed(seed, 0x1d), existing);
  }
  std::reverse(queue.begin(), queue.end());

  std::size_t evaluations = 0;
  double best_exact = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_exact_index;
  auto evaluate = [&](const std::vector<double>& x, const Fidelity& fid) {
    ObjectiveReply reply = problem.objective(x, fid, mix_seed(seed, evaluations));
    ++evaluations;
    (fid.is_exact() ? report.exact_evaluations : report.noisy_evaluations)++;
    if (!reply.ok || !std::isfinite(reply.value)) ++report.failed_evaluations;
    return reply;
  };

  report.stop_reason = StopReason::kMaxReals;
  for (std::size_t milestone = 1; milestone <= max_reals; ++milestone) {
    for (std::size_t j = 0; j < sims_per_real; ++j) {
      std::vector<double> x;
      if (!queue.empty()) {
        x = std::move(queue.back());
        queue.pop_back();
      } else {
        refresh_surrogate(state);
        x = propose_next(state);
      }
      record(state, x, evaluate(x, noisy), noisy);
      report.trace.push_back(best_exact);
    }

    // Best simulated configuration; an exact measurement of a point overrides
    // its simulated value.
    auto measured = [&](const std::vector<double>& x) -> std::optional<double> {
      for (const auto& e : state.archive) {
        if (e.fidelity.is_exact() && e.x == x) return e.value;
      }
      return std::nullopt;
    };
    std::optional<std::size_t> pick;
    double pick_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < state.archive.size(); ++i) {
      const auto& e = state.archive[i];
      if (e.failed || e.fidelity.is_exact()) continue;
      const double v = measured(e.x).value_or(e.value);
      if (!pick || v < pick_value) {
        pick = i;
        pick_value = v;
      }
    }
    if (!pick) pick = state.archive.size() - 1;
    const ArchiveEntry sim = state.archive[*pick];

    const ObjectiveReply real = evaluate(sim.x, exact);
    MilestoneRow row;
    row.simulations = report.noisy_evaluations;
    row.reals = report.exact_evaluations;
    row.x = sim.x;
    if (!sim.failed) {
      row.simulated = sim.stiffness;
      row.simulated_residual = sim.value;
    }
    if (real.ok && std::isfinite(real.value)) {
      row.real = real.stiffness;
      row.real_residual = real.value;
    }
    report.milestones.push_back(row);

    const bool already = std::any_of(state.archive.begin(), state.archive.end(), [&](const ArchiveEntry& e) {
      return e.fidelity.is_exact() && e.x == sim.x;
    });
    if (!already) record(state, sim.x, real, exact);
    if (real.ok && real.value < best_exact) {
      best_exact = real.value;
      for (std::size_t i = state.archive.size(); i-- > 0;) {
        if (state.archive[i].fidelity.is_exact() && state.archive[i].x == sim.x) {
          best_exact_index = i;
          break;
        }
      }
    }
    report.trace.push_back(best_exact);

    if (real.ok && real.value <= accept_threshold) {
      report.stop_reason = StopReason::kAccepted;
      break;
    }
  }

  if (best_exact_index) {
    const auto& e = state.archive[*best_exact_index];
    report.best_point = e.x;
    report.best_valid = true;
    report.best_stiffness = e.stiffness;
    report.best_value = e.value;
  }
  finish(state, report, t0);
  return report;
}

}  // namespace wavejoint
