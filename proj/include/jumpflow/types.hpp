#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace jumpflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<double> as_span(Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline Vector to_vector(std::span<const double> s) {
  return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

inline Vector to_vector(const std::vector<double>& s) {
  return to_vector(std::span<const double>(s));
}

}  // namespace jumpflow
