// Batch experiment driver. Links only the C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "jumpflow/jumpflow.h"

namespace {

int exit_code(jf_status s) {
  switch (s) {
    case JF_OK: return 0;
    case JF_ERR_VALIDATION: return 1;
    default: return 2;
  }
}

int fail(jf_status s, const char* context) {
  std::fprintf(stderr, "jumpflow: %s: %s\n", context, jf_last_error());
  return exit_code(s);
}

unsigned env_threads() {
  const char* v = std::getenv("JUMPFLOW_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0') {
    std::fprintf(stderr, "jumpflow: ignoring malformed JUMPFLOW_THREADS='%s'\n", v);
    return 0;
  }
  return static_cast<unsigned>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate, couple and certify jump-driven dissipative systems."};
  app.set_version_flag("--version", std::string(jf_version()));
  app.require_subcommand(1, 1);

  std::string config;
  std::optional<std::uint64_t> seed, replicas;
  std::optional<std::string> out;
  unsigned threads = env_threads();
  bool print_config = false;

  const std::map<std::string, std::string> about{
      {"simulate", "sample trajectories and second moments"},
      {"couple", "run the block coupling and record coalescence"},
      {"mixing", "coupling plus TV and exponential-rate fit"},
      {"check", "dissipativity and controllability certificates"},
      {"galerkin-steer", "steer a Galerkin truncation to targets"},
      {"network", "Kalman and potential conditions for oscillator chains"}};
  for (std::size_t i = 0; i < jf_subcommand_count(); ++i) {
    const std::string name = jf_subcommand_name(i);
    const auto it = about.find(name);
    auto* sub = app.add_subcommand(name, it == about.end() ? std::string() : it->second);
    sub->add_option("--config", config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--replicas", replicas, "number of replicas (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores (default: $JUMPFLOW_THREADS or 0)");
    sub->add_flag("--print-config", print_config, "print the resolved configuration before running");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string subcommand = app.get_subcommands().front()->get_name();
  jf_experiment* exp = nullptr;
  if (jf_status s = jf_experiment_from_file(config.c_str(), &exp); s != JF_OK) return fail(s, config.c_str());

  jf_status s = JF_OK;
  if (seed) s = jf_experiment_set_seed(exp, *seed);
  if (s == JF_OK && replicas) s = jf_experiment_set_replicas(exp, *replicas);
  if (s == JF_OK && out) s = jf_experiment_set_output(exp, out->c_str());
  if (s == JF_OK) s = jf_experiment_set_threads(exp, threads);
  if (s == JF_OK && print_config) std::fputs(jf_experiment_resolved_config(exp), stdout);
  if (s == JF_OK) s = jf_experiment_run(exp, subcommand.c_str());
  if (s != JF_OK) {
    const int rc = fail(s, subcommand.c_str());
    jf_experiment_free(exp);
    return rc;
  }
  std::puts(jf_experiment_summary(exp));
  jf_experiment_free(exp);
  return 0;
}
