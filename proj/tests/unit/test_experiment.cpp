#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jumpflow/errors.hpp"
#include "jumpflow/experiment.hpp"

using namespace jumpflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("jumpflow_unit_" + name);
  fs::remove_all(p);
  return p;
}

// Every output file, compared byte for byte. The resolved configuration names
// its own output directory, so it is the one file allowed to differ.
void check_same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "resolved_config.json") continue;
    ++files;
    const fs::path other = b / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK_MESSAGE(slurp(entry.path()) == slurp(other), entry.path().filename().string());
  }
  CHECK(files > 0);
}

const char* kSmall = R"({
  "system": {"preset": "cubic1d"},
  "seed": 5, "replicas": 200, "horizon": 4.0,
  "x0": [1.5], "x0_prime": [-1.5],
  "simulate": {"k_max": 4, "grid_points": 5, "trajectory_points": 11},
  "mixing": {"grid_points": 9, "bootstrap": 10}
})";

}  // namespace

TEST_CASE("config parsing rejects unknown keys and bad types") {
  CHECK_NOTHROW(ExperimentConfig::parse("{}"));
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"sead": 1})"), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"system": {"preset": "linear1d", "colour": 1}})"), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"coupling": {"shooting": {"tolerance": 1}}})"), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"seed": "seven"})"), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"replicas": -3})"), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"x0": [1, "a"]})"), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::parse("{not json"), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[]"), ValidationError);
}

TEST_CASE("resolved configuration round-trips") {
  const auto cfg = ExperimentConfig::parse(kSmall);
  const std::string once = cfg.to_json();
  CHECK(ExperimentConfig::parse(once).to_json() == once);
  auto with_threads = cfg;
  with_threads.threads = 7;
  CHECK(with_threads.to_json() == once);
}

TEST_CASE("presets") {
  struct Case {
    const char* preset;
    int d, n;
  };
  for (const auto& c : {Case{"linear1d", 1, 1}, Case{"cubic1d", 1, 1}, Case{"oscillator2d", 2, 1},
                        Case{"nonlinear2d", 2, 1}, Case{"galerkin", 5, 3}, Case{"chain-langevin", 6, 2},
                        Case{"chain-semimarkov", 8, 2}}) {
    auto cfg = ExperimentConfig::parse(std::string(R"({"system": {"preset": ")") + c.preset + "\"}}");
    const auto sys = build_system(cfg);
    CHECK_MESSAGE(sys.spec.d() == c.d, c.preset);
    CHECK_MESSAGE(sys.spec.n() == c.n, c.preset);
    CHECK(sys.x0.size() == c.d);
    CHECK(sys.x0_prime == -sys.x0);
  }
  CHECK_THROWS_AS(build_system(ExperimentConfig::parse(R"({"system": {"preset": "pendulum"}})")), ValidationError);
  CHECK(lyapunov_radius(0.5, 2.0, 1.0) == doctest::Approx(2.0 * std::sqrt(4.0 * 2.0)));
}

TEST_CASE("subcommand outputs do not depend on the worker count") {
  for (const std::string sub : {"simulate", "couple", "mixing"}) {
    auto cfg = ExperimentConfig::parse(kSmall);
    const auto a = scratch(sub + "_a"), b = scratch(sub + "_b");
    cfg.out = a.string();
    cfg.threads = 1;
    run_experiment(sub, cfg);
    cfg.out = b.string();
    cfg.threads = 3;
    run_experiment(sub, cfg);
    check_same_tree(a, b);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("the resolved configuration reproduces a run") {
  auto cfg = ExperimentConfig::parse(kSmall);
  const auto a = scratch("resolved_a"), b = scratch("resolved_b");
  cfg.out = a.string();
  run_experiment("simulate", cfg);
  auto again = ExperimentConfig::parse(slurp(a / "resolved_config.json"));
  again.out = b.string();
  run_experiment("simulate", again);
  for (const char* f : {"moments_embedded.csv", "moments_continuous.csv", "trajectory.csv", "jumps.csv"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("unknown subcommands are validation errors") {
  CHECK_THROWS_AS(run_experiment("explode", ExperimentConfig::parse(kSmall)), ValidationError);
}
