#pragma once

// Numeric rank certificates: Kalman condition, Lie brackets, the weak
// Hormander tower at a point, and a sampled full-rank test for D_xi F_m.

#include <optional>
#include <string>
#include <vector>

#include "jumpflow/pdmp.hpp"

namespace jumpflow {

struct RankCertificate {
  std::string kind;  // "kalman", "hormander" or "solid"
  Vector point;
  int dimension_reached = 0;
  int target_dim = 0;
  int generations_used = 0;
  std::vector<int> dims_per_generation;
  std::vector<double> singular_values;
  double tolerance = 0.0;
  bool pass = false;
  /// False for a sampled search that found no full-rank point: the search may have missed one.
  bool conclusive = true;
  /// solid: stacked jumps of the best probe.
  Vector best_probe;
  int probes = 0;

  std::string verdict() const { return pass ? "pass" : (conclusive ? "fail" : "inconclusive"); }
};

/// Rank of [B, AB, ..., A^{d-1}B] with cutoff d * sigma_max * eps * 1e3.
RankCertificate kalman_rank(const Matrix& a, const Matrix& b);

/// [U, V](x) = DV(x) U(x) - DU(x) V(x).
Vector lie_bracket(const VectorField& u, const VectorField& v, const Vector& x);

/// [U, V] as a field. Jet-capable when both arguments are, so brackets nest
/// with exact derivatives.
VectorField lie_bracket_field(const VectorField& u, const VectorField& v);

struct TowerOptions {
  int max_generations = 8;
  /// Relative singular-value cutoff.
  double tol = 1e-8;
  /// Candidates shorter than this fraction of the largest norm seen are treated as zero.
  double zero_tol = 1e-10;
  /// Bound on the number of bracket words carried into the next generation.
  std::size_t max_words = 4096;
};

/// Span at x_hat of B's columns and iterated brackets [X_1, [X_2, ... [X_k, b]]]
/// with X_i in B u {f}, one bracket level per generation.
RankCertificate hormander_tower(const VectorField& f, const Matrix& b, const Vector& x_hat,
                                const TowerOptions& opts = {});

/// Samples `probes` jump blocks xi ~ law^m and tests rank D_xi F_m(x_hat, s_hat, xi) = d.
RankCertificate solid_cert(const SystemSpec& spec, const Vector& x_hat, std::span<const double> s_hat, int probes,
                           Rng& rng, double rel_tol = 1e-8);

}  // namespace jumpflow
