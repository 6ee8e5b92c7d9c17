#include "wavejoint/wavejoint.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "json.hpp"
#include "wavejoint/errors.hpp"
#include "wavejoint/rbf_surrogate.hpp"
#include "wavejoint/workbench.hpp"

using nlohmann::json;
namespace wj = wavejoint;

struct wj_surrogate {
  wj::Surrogate surrogate;
};

struct wj_store {
  wj::ObservationStore store;
};

namespace {

thread_local std::string g_last_error;

wj_status fail(wj_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
wj_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return WJ_OK;
  } catch (const wj::Error& e) {
    return fail(static_cast<wj_status>(static_cast<int>(e.code())), e.what());
  } catch (const json::exception& e) {
    return fail(WJ_INVALID_ARGUMENT, std::string("malformed JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(WJ_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(WJ_INTERNAL, e.what());
  } catch (...) {
    return fail(WJ_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  if (!p) throw wj::Error(wj::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

wj::JointConfig to_cfg(const wj_config* c) {
  return {c->length_mm, c->ridges, c->height_mm, c->thickness_mm, c->twist_deg};
}

wj_config from_cfg(const wj::JointConfig& c) {
  return {c.length_mm, c.ridges, c.height_mm, c.thickness_mm, c.twist_deg};
}

wj::StiffnessTriple to_k(const wj_stiffness* k) { return {k->k_xi, k->k_eta, k->k_zeta}; }

wj::Bounds parse_bounds(const char* bounds_json) {
  if (!bounds_json || !*bounds_json) return wj::Bounds::joint_defaults();
  return wj::bounds_from_json(json::parse(bounds_json));
}

const char* violation_kind_name(wj::ViolationKind k) {
  switch (k) {
    case wj::ViolationKind::kBound: return "BoundViolation";
    case wj::ViolationKind::kIntegrality: return "IntegralityViolation";
    case wj::ViolationKind::kAmplitudeNonPositive: return "AmplitudeNonPositive";
  }
  return "?";
}

}  // namespace

extern "C" {

const char* wj_version(void) { return "0.1.0"; }

const char* wj_last_error(void) { return g_last_error.c_str(); }

const char* wj_status_name(wj_status status) {
  if (status == WJ_OK) return "Ok";
  return wj::error_code_name(static_cast<wj::ErrorCode>(static_cast<int>(status)));
}

void wj_string_free(char* s) { std::free(s); }

wj_status wj_validate_config(const wj_config* cfg, const char* bounds_json, char** violations_json) {
  return guarded([&] {
    need(cfg, "cfg");
    need(violations_json, "violations_json");
    json arr = json::array();
    for (const auto& v : wj::validate_config(to_cfg(cfg), parse_bounds(bounds_json))) {
      arr.push_back({{"kind", violation_kind_name(v.kind)}, {"variable", v.variable}, {"message", v.describe()}});
    }
    *violations_json = dup_string(arr.dump());
  });
}

wj_status wj_clamp_and_round(const wj_config* cfg, const char* bounds_json, wj_config* out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = from_cfg(wj::clamp_and_round(to_cfg(cfg), parse_bounds(bounds_json)));
  });
}

wj_status wj_evaluate_stiffness(const wj_config* cfg, const char* fidelity, uint64_t seed, wj_stiffness* out,
                                int* failure) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    need(failure, "failure");
    const wj::Fidelity fid = fidelity ? wj::Fidelity::parse(fidelity) : wj::Fidelity::exact();
    const wj::OracleOutcome o = wj::evaluate_at(to_cfg(cfg), wj::Material{}, fid, seed);
    *failure = static_cast<int>(o.failure);
    if (o.ok()) *out = {o.stiffness->k_xi, o.stiffness->k_eta, o.stiffness->k_zeta};
  });
}

const char* wj_failure_name(int failure) {
  if (failure < 0 || failure > static_cast<int>(wj::FailureReason::kInjected)) return "?";
  return wj::failure_reason_name(static_cast<wj::FailureReason>(failure));
}

wj_status wj_residual(const wj_stiffness* k, const wj_stiffness* target, double* out) {
  return guarded([&] {
    need(k, "k");
    need(target, "target");
    need(out, "out");
    *out = wj::residual(to_k(k), to_k(target));
  });
}

wj_status wj_synthetic(const char* name, const double* x, size_t n, double* out) {
  return guarded([&] {
    need(name, "name");
    need(x, "x");
    need(out, "out");
    *out = wj::synthetic_function(name, std::span<const double>(x, n));
  });
}

wj_status wj_surrogate_fit(const double* points, const double* values, const double* noise_caps, size_t n,
                           size_t d, const double* lower, const double* upper, const char* kernel,
                           wj_surrogate** out) {
  return guarded([&] {
    need(points, "points");
    need(values, "values");
    need(lower, "lower");
    need(upper, "upper");
    need(out, "out");
    if (d == 0) throw wj::Error(wj::ErrorCode::kInvalidArgument, "dimension must be >= 1");
    std::vector<wj::VariableBounds> vars;
    for (size_t k = 0; k < d; ++k) vars.push_back({"x" + std::to_string(k), lower[k], upper[k], false});
    std::vector<wj::SurrogateSample> samples(n);
    for (size_t i = 0; i < n; ++i) {
      samples[i].point.assign(points + i * d, points + (i + 1) * d);
      samples[i].value = values[i];
      if (noise_caps && noise_caps[i] > 0.0) samples[i].fidelity = wj::Fidelity::noisy(noise_caps[i]);
    }
    const wj::Kernel kern = kernel ? wj::Kernel::parse(kernel) : wj::Kernel::cubic();
    *out = new wj_surrogate{wj::fit(samples, kern, wj::Bounds(vars))};
  });
}

wj_status wj_surrogate_eval(const wj_surrogate* s, const double* x, double* out) {
  return guarded([&] {
    need(s, "surrogate");
    need(x, "x");
    need(out, "out");
    *out = s->surrogate.eval(std::span<const double>(x, s->surrogate.dims()));
  });
}

wj_status wj_surrogate_merit(const wj_surrogate* s, const double* x, double weight, double* out) {
  return guarded([&] {
    need(s, "surrogate");
    need(x, "x");
    need(out, "out");
    *out = wj::merit(s->surrogate, std::span<const double>(x, s->surrogate.dims()), weight);
  });
}

size_t wj_surrogate_size(const wj_surrogate* s) { return s ? s->surrogate.size() : 0; }

void wj_surrogate_free(wj_surrogate* s) { delete s; }

wj_status wj_store_create(const char* path, const char* meta_json, wj_store** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    wj::StoreMeta meta;
    if (meta_json && *meta_json) {
      const json j = json::parse(meta_json);
      meta.bounds = wj::bounds_from_json(j.value("bounds", json()));
      meta.seed = j.value("seed", std::uint64_t{0});
      meta.noise_cap = j.value("noise_cap", wj::kDefaultNoiseCap);
    }
    *out = new wj_store{wj::ObservationStore::create(path, meta)};
  });
}

wj_status wj_store_open(const char* path, wj_store** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new wj_store{wj::ObservationStore::open(path)};
  });
}

wj_status wj_store_append(wj_store* store, const wj_config* cfg, const wj_stiffness* k, const char* fidelity,
                          const char* run_id) {
  return guarded([&] {
    need(store, "store");
    need(cfg, "cfg");
    wj::StoreRecord r;
    r.config = to_cfg(cfg);
    if (k) r.stiffness = to_k(k);
    r.fidelity = fidelity ? wj::Fidelity::parse(fidelity) : wj::Fidelity::exact();
    r.run_id = run_id ? run_id : "";
    store->store.append(r);
  });
}

size_t wj_store_size(const wj_store* store) { return store ? store->store.records().size() : 0; }

wj_status wj_store_get(const wj_store* store, size_t index, wj_config* cfg, wj_stiffness* k, int* failed) {
  return guarded([&] {
    need(store, "store");
    const auto& rows = store->store.records();
    if (index >= rows.size()) throw wj::Error(wj::ErrorCode::kInvalidArgument, "store index out of range");
    const auto& r = rows[index];
    if (cfg) *cfg = from_cfg(r.config);
    if (failed) *failed = r.failed() ? 1 : 0;
    if (k && r.stiffness) *k = {r.stiffness->k_xi, r.stiffness->k_eta, r.stiffness->k_zeta};
  });
}

void wj_store_free(wj_store* store) { delete store; }

wj_status wj_generate_dataset(const char* path, size_t n, uint64_t seed, const char* options_json,
                              char** summary_json) {
  return guarded([&] {
    need(path, "path");
    const json options = options_json && *options_json ? json::parse(options_json) : json::object();
    if (!options.is_object()) throw wj::Error(wj::ErrorCode::kInvalidArgument, "options must be a JSON object");
    const auto store = wj::generate_dataset(path, wj::context_from_json(options), n, seed);
    std::size_t failed = 0;
    for (const auto& r : store.records()) failed += r.failed() ? 1 : 0;
    const json summary = {{"store", path}, {"rows", store.records().size()}, {"failed", failed}};
    if (summary_json) *summary_json = dup_string(summary.dump());
  });
}

wj_status wj_run_experiment(const char* spec_json, const char* out_dir, char** summary_json) {
  return guarded([&] {
    need(spec_json, "spec_json");
    need(out_dir, "out_dir");
    const json summary = wj::run_experiment(json::parse(spec_json), out_dir);
    if (summary_json) *summary_json = dup_string(summary.dump());
  });
}

}  // extern "C"
