#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "jumpflow/rng.hpp"
#include "jumpflow/types.hpp"

namespace testing {

using jumpflow::Matrix;
using jumpflow::Rng;
using jumpflow::StreamTag;
using jumpflow::Vector;

inline Rng rng(std::uint64_t replica = 0) { return Rng(20261016, replica, StreamTag::Test); }

inline Vector random_vector(int d, Rng& r, double scale = 1.0) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * r.normal();
  return v;
}

struct MeanSe {
  double mean, se;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  const double n = double(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / (n - 1.0) / n)};
}

inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace testing
