#include "jumpflow/jumpflow.h"

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "jumpflow/controllability.hpp"
#include "jumpflow/errors.hpp"
#include "jumpflow/experiment.hpp"

struct jf_experiment {
  jumpflow::ExperimentConfig cfg;
  std::string resolved;
  std::string summary;
};

struct jf_system {
  jumpflow::BuiltSystem sys;
};

namespace {

thread_local std::string g_last_error;

template <class F>
jf_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return JF_OK;
  } catch (const jumpflow::ValidationError& e) {
    g_last_error = e.what();
    return JF_ERR_VALIDATION;
  } catch (const jumpflow::NumericError& e) {
    g_last_error = e.what();
    return JF_ERR_NUMERIC;
  } catch (const jumpflow::DomainError& e) {
    g_last_error = e.what();
    return JF_ERR_DOMAIN;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return JF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return JF_ERR_INTERNAL;
  }
}

jf_status null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return JF_ERR_VALIDATION;
}

}  // namespace

extern "C" {

JF_API const char* jf_version(void) { return "0.3.0"; }

JF_API const char* jf_last_error(void) { return g_last_error.c_str(); }

JF_API jf_status jf_experiment_from_json(const char* json_text, jf_experiment** out) {
  if (!json_text || !out) return null_arg("json_text/out");
  *out = nullptr;
  return guarded([&] {
    auto e = std::make_unique<jf_experiment>();
    e->cfg = jumpflow::ExperimentConfig::parse(json_text);
    *out = e.release();
  });
}

JF_API jf_status jf_experiment_from_file(const char* path, jf_experiment** out) {
  if (!path || !out) return null_arg("path/out");
  *out = nullptr;
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    g_last_error = std::string("cannot read configuration '") + path + "'";
    return JF_ERR_VALIDATION;
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return jf_experiment_from_json(ss.str().c_str(), out);
}

JF_API void jf_experiment_free(jf_experiment* e) { delete e; }

JF_API jf_status jf_experiment_set_seed(jf_experiment* e, uint64_t seed) {
  if (!e) return null_arg("experiment");
  e->cfg.seed = seed;
  return JF_OK;
}

JF_API jf_status jf_experiment_set_replicas(jf_experiment* e, uint64_t replicas) {
  if (!e) return null_arg("experiment");
  if (replicas == 0) {
    g_last_error = "replicas must be at least 1";
    return JF_ERR_VALIDATION;
  }
  e->cfg.replicas = static_cast<std::size_t>(replicas);
  return JF_OK;
}

JF_API jf_status jf_experiment_set_output(jf_experiment* e, const char* dir) {
  if (!e || !dir) return null_arg("experiment/dir");
  e->cfg.out = dir;
  return JF_OK;
}

JF_API jf_status jf_experiment_set_threads(jf_experiment* e, unsigned threads) {
  if (!e) return null_arg("experiment");
  e->cfg.threads = threads;
  return JF_OK;
}

JF_API const char* jf_experiment_resolved_config(jf_experiment* e) {
  if (!e) return "";
  e->resolved = e->cfg.to_json();
  return e->resolved.c_str();
}

JF_API jf_status jf_experiment_run(jf_experiment* e, const char* subcommand) {
  if (!e || !subcommand) return null_arg("experiment/subcommand");
  return guarded([&] { e->summary = jumpflow::run_experiment(subcommand, e->cfg); });
}

JF_API const char* jf_experiment_summary(const jf_experiment* e) { return e ? e->summary.c_str() : ""; }

JF_API size_t jf_subcommand_count(void) { return jumpflow::subcommands().size(); }

JF_API const char* jf_subcommand_name(size_t i) {
  const auto& names = jumpflow::subcommands();
  return i < names.size() ? names[i].c_str() : nullptr;
}

JF_API jf_status jf_system_from_json(const char* json_text, jf_system** out) {
  if (!json_text || !out) return null_arg("json_text/out");
  *out = nullptr;
  return guarded([&] {
    const auto cfg = jumpflow::ExperimentConfig::parse(std::string("{\"system\":") + json_text + "}");
    auto s = std::make_unique<jf_system>();
    s->sys = jumpflow::build_system(cfg);
    *out = s.release();
  });
}

JF_API void jf_system_free(jf_system* s) { delete s; }

JF_API int jf_system_state_dim(const jf_system* s) { return s ? s->sys.spec.d() : 0; }

JF_API int jf_system_noise_dim(const jf_system* s) { return s ? s->sys.spec.n() : 0; }

JF_API jf_status jf_system_flow(const jf_system* s, const double* x, double t, double* out) {
  if (!s || !x || !out) return null_arg("system/x/out");
  return guarded([&] {
    const int d = s->sys.spec.d();
    const jumpflow::Vector y =
        jumpflow::flow(s->sys.spec.f, Eigen::Map<const jumpflow::Vector>(x, d), t, s->sys.spec.integrator);
    Eigen::Map<jumpflow::Vector>(out, d) = y;
  });
}

JF_API jf_status jf_system_embedded_chain(const jf_system* s, const double* x, int k, uint64_t seed,
                                          uint64_t replica, double* out) {
  if (!s || !x || !out) return null_arg("system/x/out");
  return guarded([&] {
    const int d = s->sys.spec.d();
    jumpflow::Rng rng(seed, replica, jumpflow::StreamTag::Plain);
    const auto chain = jumpflow::embedded_chain(s->sys.spec, Eigen::Map<const jumpflow::Vector>(x, d), k, rng);
    for (std::size_t i = 0; i < chain.size(); ++i) Eigen::Map<jumpflow::Vector>(out + i * d, d) = chain[i];
  });
}

JF_API jf_status jf_kalman_rank(const double* a, const double* b, int d, int n, int* rank) {
  if (!a || !b || !rank) return null_arg("a/b/rank");
  return guarded([&] {
    jumpflow::require(d >= 1 && n >= 1, "kalman rank needs d, n >= 1");
    const auto cert = jumpflow::kalman_rank(Eigen::Map<const jumpflow::Matrix>(a, d, d),
                                            Eigen::Map<const jumpflow::Matrix>(b, d, n));
    *rank = cert.dimension_reached;
  });
}

}  // extern "C"
