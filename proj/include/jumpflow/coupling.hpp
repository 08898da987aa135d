#pragma once

// Maximal couplings of two laws, the block coupling of two copies of the
// embedded chain, its continuous-time lift, and coalescence statistics.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jumpflow/pdmp.hpp"

namespace jumpflow {

/// A law given by a sampler and a density (not necessarily positive everywhere).
struct SampledLaw {
  int dim = 1;
  std::function<Vector(Rng&)> sample;
  std::function<double(const Vector&)> density;

  static SampledLaw from_jump_law(const JumpLaw& law);
  /// Law of shift + B eta with eta ~ law and B square invertible.
  static SampledLaw pushforward(const JumpLaw& law, const Matrix& b, const Vector& shift);
  static SampledLaw uniform_box(Vector lo, Vector hi);
};

struct MaximalDraw {
  Vector x, y;
  bool hit = false;
};

/// x ~ p; y = x with probability min(1, q(x)/p(x)); otherwise y is drawn from
/// the normalized (q - p)+ by rejection from q. Throws NumericError when the
/// rejection loop exceeds `budget` proposals.
MaximalDraw maximal_coupling_sample(const SampledLaw& p, const SampledLaw& q, Rng& rng, long budget = 1'000'000);

/// Tensor grid of midpoint cells on a box.
struct QuadratureGrid {
  Vector lo, hi;
  std::vector<int> cells;  // per dimension
};

/// (1/2) sum |p - q| * cell volume. Throws ValidationError when either density's
/// mass on the grid differs from 1 by more than 1e-3.
double tv_quadrature(const std::function<double(const Vector&)>& p, const std::function<double(const Vector&)>& q,
                     const QuadratureGrid& grid);

enum class HitMode { ExactDensity, Shooting, Independent };
std::string to_string(HitMode m);
HitMode hit_mode_from_string(const std::string& s);

struct ShootingConfig {
  int max_iterations = 20;
  double residual_tol = 1e-8;
  /// Numeric-rank cutoff relative to the largest singular value.
  double rank_tol = 1e-8;
};

struct CouplingPolicy {
  Vector x_hat;
  double r = 1.0;
  int m = 1;
  HitMode mode = HitMode::ExactDensity;
  ShootingConfig shooting;
  /// Radius of the compact B(0, R) defining I. The effective radius is
  /// max(R, |x_hat| + r) so that B(x_hat, r) lies inside it.
  double R = 0.0;
  /// Safety cap on the number of blocks per run.
  long max_blocks = 1'000'000;

  void validate(const SystemSpec& spec) const;
  double effective_R() const;
};

enum class Branch : char { Synchronous = 's', Maximal = 'm', Independent = 'i' };

struct BlockOutcome {
  std::vector<Vector> a, b;  // states after each of the m jumps
  Branch branch = Branch::Independent;
  bool hit = false;               // components equal at block end
  bool shoot_failed = false;      // shooting solve did not converge or Jacobian was singular
  bool shoot_rejected = false;    // converged but rejected by the density ratio
};

/// One block of m jumps with shared waiting times s. The branch depends only on (z, z').
BlockOutcome block_couple(const SystemSpec& spec, const CouplingPolicy& policy, const Vector& z, const Vector& zp,
                          std::span<const double> s, Rng& rng);

struct ShootResult {
  std::optional<std::vector<Vector>> xi;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  bool singular = false;
};

/// Gauss-Newton minimum-norm solve of F_m(z', s, xi') = F_m(z, s, xi) from xi' = xi.
/// Deterministic; the density-ratio acceptance is applied by block_couple.
ShootResult shoot_match(const SystemSpec& spec, const Vector& z, const Vector& zp, std::span<const double> s,
                        std::span<const Vector> xi, const ShootingConfig& cfg);

struct CouplingRecord {
  static constexpr long kNever = -1;

  long I = kNever, J = kNever, K = kNever;  // jump counts, multiples of m
  double tau_K = std::numeric_limits<double>::infinity();
  double T = std::numeric_limits<double>::infinity();
  std::string branches;  // one character per block
  long shoot_failures = 0;
  std::vector<Vector> observed_a, observed_b;  // (Z_t, Z'_t) at the requested times

  bool coalesced() const { return K != kNever; }
  bool ordered() const;
};

/// Runs the coupled pair from (x, x') until coalescence and past every observation
/// time, or until the horizon (then K, tau_K and T are censored).
CouplingRecord run_coupling(const SystemSpec& spec, const CouplingPolicy& policy, const Vector& x, const Vector& xp,
                            double horizon, Rng& rng, std::span<const double> observe = {});

/// Independent runs; run r uses stream (seed, r, Coupling).
std::vector<CouplingRecord> run_couplings(const SystemSpec& spec, const CouplingPolicy& policy, const Vector& x,
                                          const Vector& xp, double horizon, std::size_t replicas,
                                          std::uint64_t seed, unsigned threads = 0,
                                          std::span<const double> observe = {});

struct TailPoint {
  double t = 0.0;
  double survival = 0.0;
  double std_error = 0.0;
};

/// Empirical P{T > t}; censored runs count as survivors.
std::vector<TailPoint> tail_curve(std::span<const CouplingRecord> records, std::span<const double> times);

/// Empirical P{K > k} at block boundaries k = 0, m, 2m, ...
std::vector<TailPoint> block_tail_curve(std::span<const CouplingRecord> records, int m, long max_k);

}  // namespace jumpflow
