#include "jumpflow/rng.hpp"

#include <cmath>

namespace jumpflow {

Rng::Rng(std::uint64_t seed, std::uint64_t replica, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replica),
                    static_cast<std::uint32_t>(replica >> 32),
                    static_cast<std::uint32_t>(tag), 0x6a756d70u};
  engine_.seed(seq);
}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::exponential(double rate) { return -std::log(uniform()) / rate; }

double Rng::laplace(double scale) {
  const double u = uniform() - 0.5;
  return -scale * std::copysign(std::log1p(-2.0 * std::abs(u)), u);
}

std::size_t Rng::index(std::size_t n) {
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

}  // namespace jumpflow
