#pragma once

// Galerkin truncation of u_t - nu Lap u + F(u) = h + zeta on the D-torus,
// F(u) = a u^p + g(u), in the trigonometric basis {c_0} u {c_k, s_k : 0 < |k|_1 <= N}.
//
// States are coefficient vectors with respect to the unnormalized functions
// c_k = cos<k,x>, s_k = sin<k,x>; the Euclidean norm of a coefficient vector
// therefore differs from the L2 norm by fixed per-mode weights (see l2_norm).

#include <optional>
#include <vector>

#include "jumpflow/dynamics.hpp"

namespace jumpflow {

enum class GalerkinPerturbation {
  Zero,    // g = 0
  Sine,    // g(u) = sin u
  Cutoff,  // g(u) = -a u^p chi(u / w): F vanishes for |u| <= w
};

struct GalerkinSystem {
  int D = 1;
  int N = 2;
  double nu = 1.0;
  double a = 1.0;
  int p = 3;
  GalerkinPerturbation g = GalerkinPerturbation::Zero;
  double cutoff_width = 1.0;
  Vector h;       // empty = 0
  int grid = 0;   // points per dimension; 0 = (p + 1) N + 1
  IntegratorConfig integrator;

  void validate() const;
  int grid_points() const { return grid > 0 ? grid : (p + 1) * N + 1; }
};

/// Precomputed basis, quadrature and projection for a GalerkinSystem.
class GalerkinModel {
 public:
  explicit GalerkinModel(GalerkinSystem sys);

  const GalerkinSystem& system() const { return sys_; }
  int dim() const { return static_cast<int>(modes_.size()); }
  /// dim H_1 = 2D + 1.
  int control_dim() const { return 2 * sys_.D + 1; }

  struct Mode {
    std::vector<int> k;
    bool sine = false;
  };
  const std::vector<Mode>& modes() const { return modes_; }
  /// Coefficient vector of c_k (sine = false) or s_k; uses c_{-k} = c_k, s_{-k} = -s_k.
  /// Returns zero when |k|_1 > N.
  Vector trig(const std::vector<int>& k, bool sine) const;
  /// Embedding of H_1 into H_N (d x (2D + 1)).
  const Matrix& embedding() const { return embed_; }
  /// Diagonal of the Laplacian: -|k|_2^2.
  const Vector& laplacian() const { return lap_; }

  /// Values of u on the quadrature grid.
  Vector to_grid(const Vector& u) const { return eval_ * u; }
  /// P_N of a grid function (exact for trigonometric polynomials of degree < grid - N).
  Vector project(const Vector& values) const { return proj_ * values; }
  /// P_N(phi_1 ... phi_k), pointwise product on the grid.
  Vector product(const std::vector<Vector>& factors) const;
  /// P_N(phi^p).
  Vector power(const Vector& phi) const;
  /// L2(T^D) norm of the function with coefficients u.
  double l2_norm(const Vector& u) const;

  /// F(u) = a u^p + g(u).
  template <class S>
  S nonlinearity(const S& u) const;
  double nonlinearity_derivative(double u) const;

  /// f_N(u) = nu Lap u - P_N F(u) + h, jet-capable, with exact Jacobian.
  VectorField field() const;
  /// u -> f_N(u + xi) + zeta: the two-control system with constant controls.
  VectorField shifted_field(const Vector& xi, const Vector& zeta) const;

 private:
  template <class S>
  void eval_field(std::span<const S> u, std::span<S> out, const Vector* xi) const;

  GalerkinSystem sys_;
  std::vector<Mode> modes_;
  Vector lap_, h_;
  Matrix eval_, proj_, embed_;
};

/// Nested spaces H_1 = cal H_1 ⊂ cal H_2 ⊂ ..., cal H_{i+1} = span P_N(phi_1 ... phi_p), phi_j in cal H_i.
struct SubspaceTower {
  std::vector<Matrix> generations;  // orthonormal bases (coefficient coordinates)
  std::optional<int> full_at;       // 1-based generation where cal H_i = H_N
  std::vector<int> dims() const;
};

SubspaceTower subspace_tower(const GalerkinModel& model, int max_generations = 16, double tol = 1e-10);

/// Endpoint at time delta of u' = f_N(u + delta^{-1/p} phi) + delta^{-1} psi.
/// Retries once with 100x tighter tolerances on numeric failure.
Vector scaling_control_endpoint(const GalerkinModel& model, const Vector& u0, const Vector& phi, const Vector& psi,
                                double delta);

/// Limit of the above as delta -> 0: u0 + psi - a P_N phi^p.
Vector scaling_control_limit(const GalerkinModel& model, const Vector& u0, const Vector& phi, const Vector& psi);

struct SteeringOptions {
  double delta_start = 1e-2;
  double delta_min = 1e-6;
  /// Burst duration as a fraction of the free-flight time delta.
  double burst_fraction = 1e-3;
  int max_rounds = 200;
};

struct SteeringResult {
  ControlSignal control;  // values in H_1, piecewise constant
  Vector endpoint;        // S_T(u0, zeta), re-integrated from scratch
  double error = 0.0;     // |endpoint - target|
  bool converged = false;
  int rounds = 0;
  double final_delta = 0.0;
};

/// Builds a control zeta on [0, T], T <= time_budget, steering u0 to within eps of target.
/// Each round expresses the current residual through the subspace tower and
/// realizes it with burst / free-flight / burst moves; rounds repeat from the
/// measured state with delta halved whenever progress stalls.
SteeringResult synthesize_steering(const GalerkinModel& model, const Vector& u0, const Vector& target, double eps,
                                   double time_budget, const SteeringOptions& opts = {});

// ---------------------------------------------------------------------------

namespace detail {
template <class S>
S smooth_cutoff(const S& s) {
  using std::abs;
  using std::exp;
  const double m = std::abs(value_of(s));
  if (m <= 1.0) return S(1.0);
  if (m >= 2.0) return S(0.0);
  const S t = abs(s) - 1.0;
  const S e0 = exp(-1.0 / (1.0 - t));
  const S e1 = exp(-1.0 / t);
  return e0 / (e0 + e1);
}
}  // namespace detail

template <class S>
S GalerkinModel::nonlinearity(const S& u) const {
  using std::sin;
  S up = u;
  for (int i = 1; i < sys_.p; ++i) up = up * u;
  switch (sys_.g) {
    case GalerkinPerturbation::Zero:
      return up * sys_.a;
    case GalerkinPerturbation::Sine:
      return up * sys_.a + sin(u);
    case GalerkinPerturbation::Cutoff:
      return up * sys_.a * (1.0 - detail::smooth_cutoff(u * (1.0 / sys_.cutoff_width)));
  }
  return up;
}

}  // namespace jumpflow
