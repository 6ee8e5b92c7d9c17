// Command-line front end over the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "wavejoint/wavejoint.h"

using nlohmann::json;

namespace {

struct CliError {
  wj_status status;
  std::string message;
};

int report_error(wj_status status, const std::string& message) {
  const json err = {{"error", {{"status", wj_status_name(status)}, {"code", static_cast<int>(status)},
                               {"message", message}}}};
  std::cerr << err.dump() << std::endl;
  return static_cast<int>(status);
}

json parse_json_arg(const std::string& text, const char* flag) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CliError{WJ_INVALID_ARGUMENT, std::string(flag) + " is not valid JSON: " + e.what()};
  }
}

/// Accepts inline JSON or a path to a JSON file.
json json_or_file(const std::string& text, const char* flag) {
  std::ifstream is(text);
  if (is) {
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_json_arg(content, flag);
  }
  return parse_json_arg(text, flag);
}

void check(wj_status s) {
  if (s != WJ_OK) throw CliError{s, wj_last_error()};
}

json run_spec(const json& spec, const std::string& out_dir) {
  char* summary = nullptr;
  check(wj_run_experiment(spec.dump().c_str(), out_dir.c_str(), &summary));
  json out = json::parse(summary);
  wj_string_free(summary);
  return out;
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string bounds;
  std::optional<std::size_t> budget;
  std::string store;
  std::string out = "out";
  std::string fidelity = "exact";
  double noise_cap = 0.30;
  std::string kernel;

  void attach(CLI::App* app, bool seed_required = true) {
    auto* s = app->add_option("--seed", seed, "Random seed");
    if (seed_required) s->required();
    app->add_option("--bounds", bounds, "Bounds overrides as JSON (inline or file), e.g. {\"l_t\":[15,25]}");
    app->add_option("--budget", budget, "Oracle evaluation budget");
    app->add_option("--store", store, "Observation store (CSV)");
    app->add_option("--out", out, "Output directory");
    app->add_option("--fidelity", fidelity, "Oracle fidelity")->check(CLI::IsMember({"exact", "noisy"}));
    app->add_option("--noise-cap", noise_cap, "Relative noise cap of the noisy oracle");
    app->add_option("--kernel", kernel, "Surrogate kernel (cubic, thin-plate, linear, gaussian:g, multiquadric:g)");
  }

  json spec(const char* kind) const {
    json j = {{"kind", kind}, {"fidelity", fidelity}, {"noise_cap", noise_cap}};
    if (seed) j["seed"] = *seed;
    if (!bounds.empty()) j["bounds"] = json_or_file(bounds, "--bounds");
    if (!kernel.empty()) j["kernel"] = kernel;
    if (!store.empty()) j["store"] = store;
    return j;
  }
};

wj_config config_from(const json& j) {
  if (!j.is_array() || j.size() != 5) throw CliError{WJ_INVALID_ARGUMENT, "a config is a JSON array of 5 numbers"};
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), j[4].get<double>()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wave-joint stiffness design workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(wj_version()));

  Common gen_c, rec_c, zs_c, inc_c, ms_c, hm_c, ev_c;

  auto* gen = app.add_subcommand("gen-data", "Evaluate a Latin hypercube design into a store");
  gen_c.attach(gen);
  std::size_t gen_n = 0;
  gen->add_option("-n,--count", gen_n, "Number of configurations")->required();

  auto* rec = app.add_subcommand("recover", "Recover configurations for self-consistent targets");
  rec_c.attach(rec);
  std::string rec_targets;
  std::optional<std::size_t> rec_n;
  std::optional<double> rec_threshold;
  rec->add_option("--targets", rec_targets, "Target configs as a JSON array of 5-arrays");
  rec->add_option("--n-targets", rec_n, "Number of random reachable targets");
  rec->add_option("--threshold", rec_threshold, "Stop once the residual is below this");

  auto* zs = app.add_subcommand("zero-shot", "Zero-shot baselines over dataset sizes");
  zs_c.attach(zs);
  std::vector<std::size_t> zs_sizes;
  std::vector<std::string> zs_stores;
  std::optional<std::size_t> zs_n;
  zs->add_option("--sizes", zs_sizes, "Dataset sizes generated in memory");
  zs->add_option("--stores", zs_stores, "Dataset stores instead of generated sizes");
  zs->add_option("--n-targets", zs_n, "Number of reachable targets");

  auto* inc = app.add_subcommand("incremental", "Optimizer vs incremental net under small budgets");
  inc_c.attach(inc);
  std::vector<std::size_t> inc_sizes, inc_budgets;
  std::optional<std::size_t> inc_n;
  inc->add_option("--init-sizes", inc_sizes, "Initial dataset sizes");
  inc->add_option("--budgets", inc_budgets, "Budgets reported (prefixes of one run)");
  inc->add_option("--n-instances", inc_n, "Instances per initial size");

  auto* ms = app.add_subcommand("milestone", "Noisy simulations with periodic exact checks");
  ms_c.attach(ms);
  std::string ms_target;
  std::optional<std::size_t> ms_sims, ms_reals, ms_single;
  std::optional<double> ms_accept;
  ms->add_option("--target", ms_target, "Target config as a JSON 5-array");
  ms->add_option("--sims-per-real", ms_sims, "Noisy evaluations per exact check");
  ms->add_option("--max-reals", ms_reals, "Maximum exact checks");
  ms->add_option("--accept", ms_accept, "Exact residual that ends the run");
  ms->add_option("--single-shot", ms_single, "N noisy evaluations, then one exact check");

  auto* hm = app.add_subcommand("heatmap", "Reachability maps over stiffness pairs");
  hm_c.attach(hm);
  std::optional<int> hm_res;
  std::optional<std::size_t> hm_samples;
  hm->add_option("--resolution", hm_res, "Grid cells per axis");
  hm->add_option("--n-samples", hm_samples, "Design size when no store is given");

  auto* ev = app.add_subcommand("oracle-eval", "Stiffness of one configuration");
  ev_c.attach(ev, false);
  std::string ev_config, ev_target;
  ev->add_option("--config", ev_config, "Config as a JSON 5-array [l_t, n_r, h_t, t_h, alpha]")->required();
  ev->add_option("--target", ev_target, "Optional target stiffness [k_xi, k_eta, k_zeta] for the residual");

  auto* run = app.add_subcommand("run", "Run an experiment spec file");
  std::string run_spec_path, run_out = "out";
  run->add_option("spec", run_spec_path, "Experiment spec (JSON file or inline)")->required();
  run->add_option("--out", run_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(WJ_INVALID_ARGUMENT, e.what());
  }

  try {
    json result;
    if (*gen) {
      if (gen_c.store.empty()) throw CliError{WJ_INVALID_ARGUMENT, "--store is required"};
      const json opts = gen_c.spec("gen-data");
      char* summary = nullptr;
      check(wj_generate_dataset(gen_c.store.c_str(), gen_n, *gen_c.seed, opts.dump().c_str(), &summary));
      result = json::parse(summary);
      wj_string_free(summary);
    } else if (*rec) {
      json spec = rec_c.spec("recover");
      if (!rec_targets.empty()) spec["targets"] = json_or_file(rec_targets, "--targets");
      if (rec_n) spec["n_targets"] = *rec_n;
      if (rec_c.budget) spec["budget"] = *rec_c.budget;
      if (rec_threshold) spec["threshold"] = *rec_threshold;
      result = run_spec(spec, rec_c.out);
    } else if (*zs) {
      json spec = zs_c.spec("zero-shot");
      if (!zs_sizes.empty()) spec["dataset_sizes"] = zs_sizes;
      if (!zs_stores.empty()) spec["stores"] = zs_stores;
      if (zs_n) spec["n_targets"] = *zs_n;
      result = run_spec(spec, zs_c.out);
    } else if (*inc) {
      json spec = inc_c.spec("incremental");
      if (!inc_sizes.empty()) spec["init_sizes"] = inc_sizes;
      if (!inc_budgets.empty()) spec["budgets"] = inc_budgets;
      if (inc_c.budget) spec["budgets"] = json::array({*inc_c.budget});
      if (inc_n) spec["n_instances"] = *inc_n;
      result = run_spec(spec, inc_c.out);
    } else if (*ms) {
      json spec = ms_c.spec("milestone");
      if (!ms_target.empty()) spec["target"] = json_or_file(ms_target, "--target");
      if (ms_sims) spec["sims_per_real"] = *ms_sims;
      if (ms_reals) spec["max_reals"] = *ms_reals;
      if (ms_accept) spec["accept_threshold"] = *ms_accept;
      if (ms_single) spec["single_shot"] = *ms_single;
      if (ms_c.budget && !ms_single) spec["single_shot"] = *ms_c.budget;
      result = run_spec(spec, ms_c.out);
    } else if (*hm) {
      json spec = hm_c.spec("heatmap");
      if (hm_res) spec["resolution"] = *hm_res;
      if (hm_samples) spec["n_samples"] = *hm_samples;
      if (hm_c.budget && !hm_samples) spec["n_samples"] = *hm_c.budget;
      result = run_spec(spec, hm_c.out);
    } else if (*ev) {
      const wj_config cfg = config_from(parse_json_arg(ev_config, "--config"));
      const std::string bounds = ev_c.bounds.empty() ? std::string() : json_or_file(ev_c.bounds, "--bounds").dump();
      char* violations = nullptr;
      check(wj_validate_config(&cfg, bounds.empty() ? nullptr : bounds.c_str(), &violations));
      const json v = json::parse(violations);
      wj_string_free(violations);
      if (!v.empty()) throw CliError{WJ_BOUND_VIOLATION, v.front().value("message", std::string("invalid config"))};
      std::string fid = ev_c.fidelity;
      if (fid == "noisy") fid = "noisy:" + json(ev_c.noise_cap).dump();
      wj_stiffness k{};
      int failure = 0;
      check(wj_evaluate_stiffness(&cfg, fid.c_str(), ev_c.seed.value_or(0), &k, &failure));
      result = {{"config", {cfg.length_mm, cfg.ridges, cfg.height_mm, cfg.thickness_mm, cfg.twist_deg}},
                {"fidelity", fid}};
      if (failure != 0) {
        result["failed"] = true;
        result["failure"] = wj_failure_name(failure);
      } else {
        result["failed"] = false;
        result["stiffness"] = {{"k_xi", k.k_xi}, {"k_eta", k.k_eta}, {"k_zeta", k.k_zeta}};
        if (!ev_target.empty()) {
          const json t = parse_json_arg(ev_target, "--target");
          if (!t.is_array() || t.size() != 3) throw CliError{WJ_INVALID_ARGUMENT, "--target needs 3 numbers"};
          const wj_stiffness target{t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
          double r = 0.0;
          check(wj_residual(&k, &target, &r));
          result["residual"] = r;
        }
      }
    } else if (*run) {
      result = run_spec(json_or_file(run_spec_path, "spec"), run_out);
    }
    std::cout << result.dump(2) << std::endl;
    return 0;
  } catch (const CliError& e) {
    return report_error(e.status, e.message);
  } catch (const json::exception& e) {
    return report_error(WJ_INVALID_ARGUMENT, e.what());
  }
}
