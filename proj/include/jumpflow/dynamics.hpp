#pragma once

// Deterministic part of the model: vector fields, their flows S_t(x),
// controlled flows S_T(x, zeta), derivatives and dissipativity probes.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jumpflow/jet.hpp"
#include "jumpflow/types.hpp"

namespace jumpflow {

/// A smooth vector field on R^d. Immutable; cheap to copy.
///
/// Besides plain evaluation a field may carry a generic evaluation over
/// `Jet` scalars (giving exact derivatives of any order), an exact Jacobian,
/// and a polynomial degree bound used to prune Lie-bracket searches.
class VectorField {
 public:
  using Eval = std::function<void(std::span<const double>, std::span<double>)>;
  using JetEval = std::function<void(std::span<const Jet>, std::span<Jet>)>;
  using JacobianFn = std::function<Matrix(const Vector&)>;

  VectorField() = default;
  VectorField(int dim, Eval eval, JetEval jet = {}, JacobianFn jac = {},
              std::optional<int> degree = std::nullopt);

  /// Wrap a callable generic over its scalar type: f(std::span<const S>, std::span<S>).
  template <class F>
  static VectorField generic(int dim, F f, JacobianFn jac = {},
                             std::optional<int> degree = std::nullopt) {
    return VectorField(
        dim, [f](std::span<const double> x, std::span<double> out) { f(x, out); },
        [f](std::span<const Jet> x, std::span<Jet> out) { f(x, out); }, std::move(jac), degree);
  }

  static VectorField zero(int dim);
  static VectorField constant(Vector value);
  static VectorField linear(Matrix a);
  /// A x + b.
  static VectorField affine(Matrix a, Vector b);

  int dim() const { return dim_; }
  void eval(std::span<const double> x, std::span<double> out) const { eval_(x, out); }
  Vector operator()(const Vector& x) const;

  bool has_jet() const { return static_cast<bool>(jet_); }
  void eval_jet(std::span<const Jet> x, std::span<Jet> out) const;

  bool has_exact_jacobian() const { return static_cast<bool>(jac_); }
  Matrix exact_jacobian(const Vector& x) const { return jac_(x); }

  /// Upper bound on the polynomial degree of the components, if known.
  std::optional<int> degree() const { return degree_; }
  bool is_constant() const { return degree_ && *degree_ <= 0; }

  VectorField with_jacobian(JacobianFn jac) const;
  VectorField without_jacobian() const;
  VectorField without_jet() const;

 private:
  int dim_ = 0;
  Eval eval_;
  JetEval jet_;
  JacobianFn jac_;
  std::optional<int> degree_;
};

/// f + g.
VectorField operator+(const VectorField& f, const VectorField& g);
/// s * f.
VectorField scaled(const VectorField& f, double s);

struct IntegratorConfig {
  enum class Method { DormandPrince45, RungeKutta4 };
  Method method = Method::DormandPrince45;
  double rtol = 1e-8;
  double atol = 1e-10;
  /// Step length for RungeKutta4; initial step hint for the adaptive pair (0 = automatic).
  double step = 1e-2;
  long max_steps = 2'000'000;
  /// A segment is aborted when the state norm exceeds this level.
  double blowup_norm = 1e8;

  void validate() const;
  /// Same configuration with tolerances scaled by `factor`.
  IntegratorConfig tightened(double factor) const;
};

std::string to_string(IntegratorConfig::Method m);
IntegratorConfig::Method integrator_method_from_string(const std::string& s);

/// zeta: [0, T] -> R^n stored as a breakpoint table.
class ControlSignal {
 public:
  enum class Interpolation { PiecewiseConstant, PiecewiseLinear };

  ControlSignal() = default;
  /// Piecewise-constant: values[i] holds on [t_i, t_{i+1}); size = breakpoints - 1.
  static ControlSignal piecewise_constant(std::vector<double> breakpoints, std::vector<Vector> values);
  /// Piecewise-linear: nodes[i] is the value at t_i; size = breakpoints.
  static ControlSignal piecewise_linear(std::vector<double> breakpoints, std::vector<Vector> nodes);
  static ControlSignal constant(Vector value, double horizon);
  static ControlSignal zero(int dim, double horizon);
  /// Horizon 0 control (does nothing).
  static ControlSignal empty(int dim);

  int dim() const { return dim_; }
  double horizon() const { return breakpoints_.empty() ? 0.0 : breakpoints_.back(); }
  bool is_empty() const { return breakpoints_.size() < 2; }
  Interpolation interpolation() const { return interp_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Vector>& values() const { return values_; }

  Vector operator()(double t) const;
  /// This control followed by `next` (shifted by horizon()). Both piecewise constant.
  ControlSignal then(const ControlSignal& next) const;

 private:
  void validate() const;
  int dim_ = 0;
  Interpolation interp_ = Interpolation::PiecewiseConstant;
  std::vector<double> breakpoints_;
  std::vector<Vector> values_;
};

/// S_t(x): solution of x' = f(x) at time t.
Vector flow(const VectorField& f, const Vector& x, double t, const IntegratorConfig& cfg = {});

struct FlowJacobian {
  Vector state;
  Matrix jacobian;  // d S_t / d x
};
/// S_t(x) together with its derivative in x (variational equation).
FlowJacobian flow_with_jacobian(const VectorField& f, const Vector& x, double t,
                                const IntegratorConfig& cfg = {});

/// S_T(x, zeta): solution of x' = f(x) + B zeta(t) at the control's horizon.
Vector controlled_flow(const VectorField& f, const Matrix& b, const Vector& x,
                       const ControlSignal& zeta, const IntegratorConfig& cfg = {});
/// As above but stops at `until` <= horizon.
Vector controlled_flow(const VectorField& f, const Matrix& b, const Vector& x,
                       const ControlSignal& zeta, double until, const IntegratorConfig& cfg);

/// Df(x): exact Jacobian when supplied, else forward-mode jets, else central differences.
Matrix jacobian(const VectorField& f, const Vector& x);
/// Central-difference Jacobian, step cbrt(eps) * max(1, |x_j|).
Matrix jacobian_fd(const VectorField& f, const Vector& x);
/// D^k f(x)[v_1, ..., v_k] evaluated exactly with jets. Requires has_jet().
Vector directional_derivative(const VectorField& f, const Vector& x, std::span<const Vector> dirs);

struct DissipativityReport {
  std::vector<std::size_t> violations;  // sample indices with <f(y),y> > -alpha|y|^2 + beta
  double worst_margin = 0.0;            // max over samples of <f(y),y> + alpha|y|^2 - beta
  std::size_t samples = 0;
  bool passed() const { return violations.empty(); }
};

DissipativityReport check_dissipativity(const VectorField& f, double alpha, double beta,
                                        std::span<const Vector> samples);
/// Smallest beta >= 0 making every sample satisfy the inequality for this alpha.
double fit_dissipativity_beta(const VectorField& f, double alpha, std::span<const Vector> samples);

}  // namespace jumpflow
