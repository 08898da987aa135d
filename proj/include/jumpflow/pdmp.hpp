#pragma once

// The jump-flow process dX = f(X) dt + B dY: trajectories, the embedded chain
// observed right after jumps, and the block maps F_k.

#include <cstdint>
#include <span>
#include <vector>

#include "jumpflow/dynamics.hpp"
#include "jumpflow/noise.hpp"
#include "jumpflow/rng.hpp"

namespace jumpflow {

struct SystemSpec {
  VectorField f;
  Matrix B;        // d x n
  double rate = 1.0;
  JumpLaw law;
  IntegratorConfig integrator;

  int d() const { return f.dim(); }
  int n() const { return static_cast<int>(B.cols()); }
  void validate() const;
};

/// Jump skeleton of one sample path; states between jumps are re-integrated on demand.
struct Trajectory {
  Vector x0;
  CompoundPoissonPath path;
  std::vector<Vector> post_jump;  // X_{tau_k}, k = 1..N

  std::size_t jumps_until(double t) const { return path.count_until(t); }
  /// X_t for t in [0, horizon]; right-continuous at jump times.
  Vector at(const SystemSpec& spec, double t) const;
  /// X_{tau_k}, with k = 0 giving x0.
  const Vector& skeleton(std::size_t k) const { return k == 0 ? x0 : post_jump[k - 1]; }
};

/// S_t(z) + B eta: one step of the embedded chain.
Vector embedded_step(const SystemSpec& spec, const Vector& z, double t, const Vector& eta);

Trajectory simulate(const SystemSpec& spec, const Vector& x0, double horizon, Rng& rng);

/// States X_{tau_1..tau_k} of the embedded chain (waiting time drawn before each jump).
std::vector<Vector> embedded_chain(const SystemSpec& spec, const Vector& x0, int k, Rng& rng);

/// F_k(x, s, xi).
Vector f_block(const SystemSpec& spec, const Vector& x, std::span<const double> s,
               std::span<const Vector> xi);

/// D_xi F_k(x, s, xi): d x (k n); column block j is Phi_k ... Phi_{j+1} B with
/// Phi_i the derivative of the flow over s_i.
Matrix block_jacobian(const SystemSpec& spec, const Vector& x, std::span<const double> s,
                      std::span<const Vector> xi);

struct MomentRow {
  double at = 0.0;  // k or t
  double estimate = 0.0;
  double std_error = 0.0;
};

struct MomentReport {
  std::vector<MomentRow> embedded;    // E|X_{tau_k}|^2, k = 0..k_max
  std::vector<MomentRow> continuous;  // E|X_t|^2 on the time grid
  std::size_t replicas = 0;
};

/// Monte Carlo second moments. Replica r uses stream (seed, r, Moments).
MomentReport empirical_moment(const SystemSpec& spec, const Vector& x0, int k_max,
                              const std::vector<double>& t_grid, std::size_t replicas,
                              std::uint64_t seed, unsigned threads = 0);

/// Recursion M_k = rho M_{k-1} + Lambda for f(x) = -alpha x, rho = rate / (rate + 2 alpha).
std::vector<double> linear_moment_recursion(double alpha, double rate, double Lambda, double m0, int k_max);

struct PathwiseBoundCheck {
  double c_eps = 0.0;
  std::vector<double> lhs;  // |X_{tau_k}|^2
  std::vector<double> rhs;  // bound, k = 1..N
  bool holds() const;
};

/// Checks |X_{tau_k}|^2 <= (1+eps)^k e^{-2 alpha tau_k}|x0|^2
///   + C_eps sum_j e^{-2 alpha (tau_k - tau_j)} (1+eps)^{k-j} (1 + |eta_j|^2)
/// with C_eps = (1 + 1/eps) max(beta / alpha, |B|^2), along one trajectory.
PathwiseBoundCheck pathwise_moment_bound(const SystemSpec& spec, const Trajectory& traj, double alpha,
                                         double beta, double eps = 0.1);

}  // namespace jumpflow
