#pragma once

#include <cstdint>
#include <random>

namespace jumpflow {

/// Purpose tags keep streams used for different jobs of one replica apart.
enum class StreamTag : std::uint32_t {
  Path = 1,
  Coupling = 2,
  Moments = 3,
  Bootstrap = 4,
  Probe = 5,
  Plain = 6,
  Invariant = 7,
  Shooting = 8,
  Experiment = 9,
  Test = 99,
};

/// Random stream keyed by (master seed, replica, tag). Streams with distinct
/// keys are statistically independent, so results never depend on which
/// worker ran which replica.
class Rng {
 public:
  using Engine = std::mt19937_64;

  Rng(std::uint64_t seed, std::uint64_t replica, StreamTag tag);
  static Rng stream(std::uint64_t seed, std::uint64_t replica, StreamTag tag) {
    return Rng(seed, replica, tag);
  }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal() { return normal_(engine_); }
  double exponential(double rate);
  /// Laplace(0, scale).
  double laplace(double scale);
  std::size_t index(std::size_t n);

  Engine& engine() { return engine_; }

 private:
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace jumpflow
