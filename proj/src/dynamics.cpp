#include "jumpflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jumpflow/errors.hpp"
#include "ode.hpp"

namespace jumpflow {

VectorField::VectorField(int dim, Eval eval, JetEval jet, JacobianFn jac, std::optional<int> degree)
    : dim_(dim), eval_(std::move(eval)), jet_(std::move(jet)), jac_(std::move(jac)), degree_(degree) {
  require(dim > 0, "vector field dimension must be positive");
  require(static_cast<bool>(eval_), "vector field needs an evaluator");
}

VectorField VectorField::zero(int dim) {
  return VectorField(
      dim, [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); },
      [](std::span<const Jet>, std::span<Jet> out) { std::fill(out.begin(), out.end(), Jet(0.0)); },
      [dim](const Vector&) { return Matrix::Zero(dim, dim); }, 0);
}

VectorField VectorField::constant(Vector value) {
  const int d = static_cast<int>(value.size());
  return VectorField(
      d,
      [value](std::span<const double>, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = value[Eigen::Index(i)];
      },
      [value](std::span<const Jet>, std::span<Jet> out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = Jet(value[Eigen::Index(i)]);
      },
      [d](const Vector&) { return Matrix::Zero(d, d); }, 0);
}

VectorField VectorField::linear(Matrix a) { return affine(a, Vector::Zero(a.rows())); }

VectorField VectorField::affine(Matrix a, Vector b) {
  require(a.rows() == a.cols() && a.rows() == b.size(), "affine field: shape mismatch");
  const int d = static_cast<int>(a.rows());
  const bool is_const = a.isZero(0.0);
  return VectorField(
      d,
      [a, b](std::span<const double> x, std::span<double> out) {
        Eigen::Map<Vector>(out.data(), Eigen::Index(out.size())) =
            a * Eigen::Map<const Vector>(x.data(), Eigen::Index(x.size())) + b;
      },
      [a, b](std::span<const Jet> x, std::span<Jet> out) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          Jet acc(b[i]);
          for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0.0) acc += x[std::size_t(j)] * a(i, j);
          out[std::size_t(i)] = acc;
        }
      },
      [a](const Vector&) { return a; }, is_const ? 0 : 1);
}

Vector VectorField::operator()(const Vector& x) const {
  Vector out(dim_);
  eval_(as_span(x), as_span(out));
  return out;
}

void VectorField::eval_jet(std::span<const Jet> x, std::span<Jet> out) const {
  if (!jet_) throw ValidationError("vector field has no jet evaluator");
  jet_(x, out);
}

VectorField VectorField::with_jacobian(JacobianFn jac) const {
  VectorField r = *this;
  r.jac_ = std::move(jac);
  return r;
}

VectorField VectorField::without_jacobian() const {
  VectorField r = *this;
  r.jac_ = nullptr;
  return r;
}

VectorField VectorField::without_jet() const {
  VectorField r = *this;
  r.jet_ = nullptr;
  return r;
}

VectorField operator+(const VectorField& f, const VectorField& g) {
  require(f.dim() == g.dim(), "field sum: dimension mismatch");
  VectorField::JetEval jet;
  if (f.has_jet() && g.has_jet()) {
    jet = [f, g](std::span<const Jet> x, std::span<Jet> out) {
      std::vector<Jet> tmp(out.size());
      f.eval_jet(x, out);
      g.eval_jet(x, tmp);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += tmp[i];
    };
  }
  VectorField::JacobianFn jac;
  if (f.has_exact_jacobian() && g.has_exact_jacobian())
    jac = [f, g](const Vector& x) -> Matrix { return f.exact_jacobian(x) + g.exact_jacobian(x); };
  std::optional<int> deg;
  if (f.degree() && g.degree()) deg = std::max(*f.degree(), *g.degree());
  return VectorField(
      f.dim(),
      [f, g](std::span<const double> x, std::span<double> out) {
        std::vector<double> tmp(out.size());
        f.eval(x, out);
        g.eval(x, tmp);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += tmp[i];
      },
      jet, jac, deg);
}

VectorField scaled(const VectorField& f, double s) {
  VectorField::JetEval jet;
  if (f.has_jet())
    jet = [f, s](std::span<const Jet> x, std::span<Jet> out) {
      f.eval_jet(x, out);
      for (auto& v : out) v *= s;
    };
  VectorField::JacobianFn jac;
  if (f.has_exact_jacobian()) jac = [f, s](const Vector& x) -> Matrix { return s * f.exact_jacobian(x); };
  return VectorField(
      f.dim(),
      [f, s](std::span<const double> x, std::span<double> out) {
        f.eval(x, out);
        for (auto& v : out) v *= s;
      },
      jet, jac, f.degree());
}

// ---------------------------------------------------------------------------

void IntegratorConfig::validate() const {
  require(rtol > 0.0 && atol > 0.0, "integrator tolerances must be positive");
  require(max_steps > 0, "integrator max_steps must be positive");
  require(blowup_norm > 0.0, "integrator blow-up norm must be positive");
  if (method == Method::RungeKutta4) require(step > 0.0, "RK4 step must be positive");
}

IntegratorConfig IntegratorConfig::tightened(double factor) const {
  IntegratorConfig c = *this;
  c.rtol *= factor;
  c.atol *= factor;
  if (method == Method::RungeKutta4) c.step *= std::pow(factor, 0.25);
  return c;
}

std::string to_string(IntegratorConfig::Method m) {
  return m == IntegratorConfig::Method::RungeKutta4 ? "rk4" : "dopri45";
}

IntegratorConfig::Method integrator_method_from_string(const std::string& s) {
  if (s == "rk4") return IntegratorConfig::Method::RungeKutta4;
  if (s == "dopri45") return IntegratorConfig::Method::DormandPrince45;
  throw ValidationError("unknown integrator method '" + s + "' (expected dopri45 or rk4)");
}

// ---------------------------------------------------------------------------

ControlSignal ControlSignal::piecewise_constant(std::vector<double> breakpoints, std::vector<Vector> values) {
  ControlSignal c;
  c.interp_ = Interpolation::PiecewiseConstant;
  c.breakpoints_ = std::move(breakpoints);
  c.values_ = std::move(values);
  c.dim_ = c.values_.empty() ? 0 : static_cast<int>(c.values_.front().size());
  c.validate();
  return c;
}

ControlSignal ControlSignal::piecewise_linear(std::vector<double> breakpoints, std::vector<Vector> nodes) {
  ControlSignal c;
  c.interp_ = Interpolation::PiecewiseLinear;
  c.breakpoints_ = std::move(breakpoints);
  c.values_ = std::move(nodes);
  c.dim_ = c.values_.empty() ? 0 : static_cast<int>(c.values_.front().size());
  c.validate();
  return c;
}

ControlSignal ControlSignal::constant(Vector value, double horizon) {
  return piecewise_constant({0.0, horizon}, {std::move(value)});
}

ControlSignal ControlSignal::zero(int dim, double horizon) { return constant(Vector::Zero(dim), horizon); }

ControlSignal ControlSignal::empty(int dim) {
  ControlSignal c;
  c.dim_ = dim;
  c.breakpoints_ = {0.0};
  return c;
}

void ControlSignal::validate() const {
  require(breakpoints_.size() >= 2, "control needs at least two breakpoints");
  require(breakpoints_.front() == 0.0, "control breakpoints must start at 0");
  for (std::size_t i = 1; i < breakpoints_.size(); ++i)
    require(breakpoints_[i] > breakpoints_[i - 1], "control breakpoints must be strictly increasing");
  const std::size_t want =
      interp_ == Interpolation::PiecewiseConstant ? breakpoints_.size() - 1 : breakpoints_.size();
  require(values_.size() == want, "control value count does not match breakpoints");
  for (const auto& v : values_) require(v.size() == dim_, "control values have inconsistent dimension");
}

Vector ControlSignal::operator()(double t) const {
  if (is_empty()) return Vector::Zero(dim_);
  require(t >= 0.0 && t <= horizon() * (1 + 1e-12), "control evaluated outside [0, T]");
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  std::size_t i = it == breakpoints_.begin() ? 0 : std::size_t(it - breakpoints_.begin()) - 1;
  i = std::min(i, breakpoints_.size() - 2);
  if (interp_ == Interpolation::PiecewiseConstant) return values_[i];
  const double w = (t - breakpoints_[i]) / (breakpoints_[i + 1] - breakpoints_[i]);
  return (1.0 - w) * values_[i] + w * values_[i + 1];
}

ControlSignal ControlSignal::then(const ControlSignal& next) const {
  if (next.is_empty()) return *this;
  if (is_empty()) return next;
  require(interp_ == Interpolation::PiecewiseConstant && next.interp_ == Interpolation::PiecewiseConstant,
          "only piecewise-constant controls can be concatenated");
  require(dim_ == next.dim_, "control dimension mismatch");
  ControlSignal c = *this;
  const double shift = horizon();
  for (std::size_t i = 1; i < next.breakpoints_.size(); ++i) c.breakpoints_.push_back(shift + next.breakpoints_[i]);
  c.values_.insert(c.values_.end(), next.values_.begin(), next.values_.end());
  return c;
}

// ---------------------------------------------------------------------------

Vector flow(const VectorField& f, const Vector& x, double t, const IntegratorConfig& cfg) {
  require(t >= 0.0, "flow time must be nonnegative");
  require(x.size() == f.dim(), "flow: state dimension mismatch");
  if (t == 0.0) return x;
  std::vector<double> y(x.data(), x.data() + x.size());
  detail::integrate([&f](double, std::span<const double> s, std::span<double> ds) { f.eval(s, ds); }, y, 0.0,
                    t, cfg, y.size());
  return to_vector(y);
}

FlowJacobian flow_with_jacobian(const VectorField& f, const Vector& x, double t, const IntegratorConfig& cfg) {
  require(t >= 0.0, "flow time must be nonnegative");
  const auto d = static_cast<std::size_t>(f.dim());
  if (t == 0.0) return {x, Matrix::Identity(f.dim(), f.dim())};
  std::vector<double> y(d + d * d, 0.0);
  std::copy(x.data(), x.data() + x.size(), y.begin());
  for (std::size_t i = 0; i < d; ++i) y[d + i * d + i] = 1.0;  // column-major identity
  Vector state(f.dim());
  detail::integrate(
      [&](double, std::span<const double> s, std::span<double> ds) {
        f.eval(s.first(d), ds.first(d));
        state = to_vector(s.first(d));
        const Matrix jac = jacobian(f, state);
        Eigen::Map<const Matrix> phi(s.data() + d, Eigen::Index(d), Eigen::Index(d));
        Eigen::Map<Matrix>(ds.data() + d, Eigen::Index(d), Eigen::Index(d)) = jac * phi;
      },
      y, 0.0, t, cfg, d);
  FlowJacobian r;
  r.state = to_vector(std::span<const double>(y).first(d));
  r.jacobian = Eigen::Map<const Matrix>(y.data() + d, Eigen::Index(d), Eigen::Index(d));
  return r;
}

Vector controlled_flow(const VectorField& f, const Matrix& b, const Vector& x, const ControlSignal& zeta,
                       const IntegratorConfig& cfg) {
  return controlled_flow(f, b, x, zeta, zeta.horizon(), cfg);
}

Vector controlled_flow(const VectorField& f, const Matrix& b, const Vector& x, const ControlSignal& zeta,
                       double until, const IntegratorConfig& cfg) {
  require(b.rows() == f.dim(), "controlled flow: B must have d rows");
  require(x.size() == f.dim(), "controlled flow: state dimension mismatch");
  if (zeta.is_empty() || until <= 0.0) return x;
  require(b.cols() == zeta.dim(), "controlled flow: B columns must match control dimension");
  require(until <= zeta.horizon() * (1 + 1e-12), "controlled flow: time beyond control horizon");
  std::vector<double> y(x.data(), x.data() + x.size());
  const auto& bp = zeta.breakpoints();
  const auto d = static_cast<std::size_t>(f.dim());
  Vector forcing(f.dim());
  for (std::size_t i = 0; i + 1 < bp.size() && bp[i] < until; ++i) {
    const double t0 = bp[i];
    const double t1 = std::min(bp[i + 1], until);
    if (zeta.interpolation() == ControlSignal::Interpolation::PiecewiseConstant) {
      forcing = b * zeta.values()[i];
      detail::integrate(
          [&](double, std::span<const double> s, std::span<double> ds) {
            f.eval(s, ds);
            for (std::size_t k = 0; k < d; ++k) ds[k] += forcing[Eigen::Index(k)];
          },
          y, t0, t1, cfg, d);
    } else {
      const Vector v0 = b * zeta.values()[i];
      const Vector v1 = b * zeta.values()[i + 1];
      const double len = bp[i + 1] - bp[i];
      detail::integrate(
          [&](double t, std::span<const double> s, std::span<double> ds) {
            f.eval(s, ds);
            const double w = (t - t0) / len;
            for (std::size_t k = 0; k < d; ++k)
              ds[k] += (1.0 - w) * v0[Eigen::Index(k)] + w * v1[Eigen::Index(k)];
          },
          y, t0, t1, cfg, d);
    }
  }
  return to_vector(y);
}

// ---------------------------------------------------------------------------

Matrix jacobian_fd(const VectorField& f, const Vector& x) {
  const int d = f.dim();
  Matrix jac(d, d);
  const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  Vector xp = x, xm = x;
  for (int j = 0; j < d; ++j) {
    const double h = base * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    jac.col(j) = (f(xp) - f(xm)) / (xp[j] - xm[j]);
    xp[j] = xm[j] = x[j];
  }
  return jac;
}

Matrix jacobian(const VectorField& f, const Vector& x) {
  require(x.size() == f.dim(), "jacobian: state dimension mismatch");
  if (f.has_exact_jacobian()) return f.exact_jacobian(x);
  if (!f.has_jet()) return jacobian_fd(f, x);
  const auto d = static_cast<std::size_t>(f.dim());
  Matrix jac(f.dim(), f.dim());
  std::vector<Jet> in(d), out(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) in[i] = Jet(x[Eigen::Index(i)]);
    in[j] = Jet::seed(x[Eigen::Index(j)], 0);
    f.eval_jet(in, out);
    for (std::size_t i = 0; i < d; ++i) jac(Eigen::Index(i), Eigen::Index(j)) = out[i].coeff(1);
  }
  return jac;
}

Vector directional_derivative(const VectorField& f, const Vector& x, std::span<const Vector> dirs) {
  require(f.has_jet(), "directional_derivative needs a jet-capable field");
  const auto d = static_cast<std::size_t>(f.dim());
  const auto k = static_cast<unsigned>(dirs.size());
  std::vector<Jet> in(d), out(d);
  for (std::size_t i = 0; i < d; ++i) {
    Jet v(x[Eigen::Index(i)]);
    for (unsigned s = 0; s < k; ++s) {
      const double c = dirs[s][Eigen::Index(i)];
      if (c != 0.0) v.set_coeff(std::size_t{1} << s, c);
    }
    in[i] = v;
  }
  f.eval_jet(in, out);
  const std::size_t full = (std::size_t{1} << k) - 1;
  Vector r(f.dim());
  for (std::size_t i = 0; i < d; ++i) r[Eigen::Index(i)] = out[i].coeff(full);
  return r;
}

// ---------------------------------------------------------------------------

DissipativityReport check_dissipativity(const VectorField& f, double alpha, double beta,
                                        std::span<const Vector> samples) {
  require(!samples.empty(), "dissipativity check needs at least one sample");
  require(alpha > 0.0 && beta >= 0.0, "dissipativity check needs alpha > 0, beta >= 0");
  DissipativityReport rep;
  rep.samples = samples.size();
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vector& y = samples[i];
    const double margin = f(y).dot(y) + alpha * y.squaredNorm() - beta;
    rep.worst_margin = std::max(rep.worst_margin, margin);
    if (margin > 0.0) rep.violations.push_back(i);
  }
  return rep;
}

double fit_dissipativity_beta(const VectorField& f, double alpha, std::span<const Vector> samples) {
  double beta = 0.0;
  for (const Vector& y : samples) beta = std::max(beta, f(y).dot(y) + alpha * y.squaredNorm());
  return beta;
}

}  // namespace jumpflow
