#include "jumpflow/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>

#include "jumpflow/errors.hpp"

namespace jumpflow {

void GalerkinSystem::validate() const {
  require(D >= 1 && D <= 3, "galerkin: D must be 1, 2 or 3");
  require(N >= 1, "galerkin: N must be at least 1");
  require(nu > 0.0, "galerkin: nu must be positive");
  require(a >= 0.0, "galerkin: a must be nonnegative");  // a = 0 is the linear reference case
  require(p >= 3 && p % 2 == 1, "galerkin: p must be an odd integer >= 3");
  require(cutoff_width > 0.0, "galerkin: cutoff width must be positive");
  require(grid == 0 || grid >= (p + 1) * N + 1, "galerkin: grid must have at least (p + 1) N + 1 points");
  integrator.validate();
}

namespace {

int l1(const std::vector<int>& k) {
  int s = 0;
  for (int v : k) s += std::abs(v);
  return s;
}

bool canonical(const std::vector<int>& k) {
  for (int v : k)
    if (v != 0) return v > 0;
  return false;
}

}  // namespace

GalerkinModel::GalerkinModel(GalerkinSystem sys) : sys_(std::move(sys)) {
  sys_.validate();
  const int D = sys_.D, N = sys_.N;
  std::vector<std::vector<int>> ks;
  std::vector<int> k(std::size_t(D), -N);
  for (;;) {
    if (l1(k) <= N && canonical(k)) ks.push_back(k);
    std::size_t i = 0;
    while (i < k.size() && ++k[i] > N) k[i++] = -N;
    if (i == k.size()) break;
  }
  std::stable_sort(ks.begin(), ks.end(), [](const auto& x, const auto& y) {
    return l1(x) != l1(y) ? l1(x) < l1(y) : std::lexicographical_compare(y.begin(), y.end(), x.begin(), x.end());
  });
  modes_.push_back({std::vector<int>(std::size_t(D), 0), false});
  for (const auto& kk : ks) {
    modes_.push_back({kk, false});
    modes_.push_back({kk, true});
  }
  const int d = dim();
  lap_.resize(d);
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int v : modes_[std::size_t(i)].k) s += double(v) * v;
    lap_[i] = -s;
  }
  h_ = sys_.h.size() ? sys_.h : Vector::Zero(d);
  require(h_.size() == d, "galerkin: h has wrong length");

  const int M = sys_.grid_points();
  int G = 1;
  for (int i = 0; i < D; ++i) G *= M;
  eval_.resize(G, d);
  proj_.resize(d, G);
  std::vector<int> idx(std::size_t(D), 0);
  for (int g = 0; g < G; ++g) {
    int rem = g;
    for (int i = 0; i < D; ++i) {
      idx[std::size_t(i)] = rem % M;
      rem /= M;
    }
    for (int j = 0; j < d; ++j) {
      double phase = 0.0;
      for (int i = 0; i < D; ++i)
        phase += modes_[std::size_t(j)].k[std::size_t(i)] * 2.0 * std::numbers::pi * idx[std::size_t(i)] / M;
      const double v = j == 0 ? 1.0 : (modes_[std::size_t(j)].sine ? std::sin(phase) : std::cos(phase));
      eval_(g, j) = v;
      proj_(j, g) = (j == 0 ? 1.0 : 2.0) * v / G;
    }
  }
  embed_ = Matrix::Identity(d, control_dim());
}

Vector GalerkinModel::trig(const std::vector<int>& k, bool sine) const {
  require(k.size() == std::size_t(sys_.D), "galerkin: multi-index has wrong length");
  Vector out = Vector::Zero(dim());
  if (l1(k) > sys_.N) return out;
  bool zero = true;
  for (int v : k) zero = zero && v == 0;
  if (zero) {
    if (!sine) out[0] = 1.0;
    return out;
  }
  std::vector<int> key = k;
  double sign = 1.0;
  if (!canonical(k)) {
    for (auto& v : key) v = -v;
    if (sine) sign = -1.0;
  }
  for (int j = 1; j < dim(); ++j)
    if (modes_[std::size_t(j)].sine == sine && modes_[std::size_t(j)].k == key) out[j] = sign;
  return out;
}

Vector GalerkinModel::product(const std::vector<Vector>& factors) const {
  require(!factors.empty(), "galerkin: empty product");
  Vector vals = to_grid(factors.front());
  for (std::size_t i = 1; i < factors.size(); ++i) vals.array() *= to_grid(factors[i]).array();
  return project(vals);
}

Vector GalerkinModel::power(const Vector& phi) const {
  return product(std::vector<Vector>(std::size_t(sys_.p), phi));
}

double GalerkinModel::l2_norm(const Vector& u) const {
  require(u.size() == dim(), "galerkin: state has wrong length");
  double s = u[0] * u[0];
  for (Eigen::Index i = 1; i < u.size(); ++i) s += 0.5 * u[i] * u[i];
  return std::sqrt(std::pow(2.0 * std::numbers::pi, sys_.D) * s);
}

double GalerkinModel::nonlinearity_derivative(double u) const {
  return nonlinearity(Jet::seed(u, 0)).coeff(1);
}

template <class S>
void GalerkinModel::eval_field(std::span<const S> u, std::span<S> out, const Vector* xi) const {
  const Eigen::Index d = dim(), G = eval_.rows();
  std::vector<S> w(u.begin(), u.end());
  if (xi)
    for (Eigen::Index j = 0; j < d; ++j) w[std::size_t(j)] = w[std::size_t(j)] + (*xi)[j];
  std::vector<S> fg(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) {
    S v(0.0);
    for (Eigen::Index j = 0; j < d; ++j)
      if (eval_(g, j) != 0.0) v += w[std::size_t(j)] * eval_(g, j);
    fg[std::size_t(g)] = nonlinearity(v);
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    S acc = w[std::size_t(j)] * (sys_.nu * lap_[j]) + h_[j];
    for (Eigen::Index g = 0; g < G; ++g)
      if (proj_(j, g) != 0.0) acc -= fg[std::size_t(g)] * proj_(j, g);
    out[std::size_t(j)] = acc;
  }
}

VectorField GalerkinModel::field() const { return shifted_field(Vector::Zero(dim()), Vector::Zero(dim())); }

VectorField GalerkinModel::shifted_field(const Vector& xi, const Vector& zeta) const {
  require(xi.size() == dim() && zeta.size() == dim(), "galerkin: control has wrong length");
  auto self = std::make_shared<const GalerkinModel>(*this);
  const bool shifted = !xi.isZero(0.0);
  const Vector forcing = zeta + h_;
  auto eval = [self, xi, forcing](std::span<const double> u, std::span<double> out) {
    const Eigen::Map<const Vector> uu(u.data(), Eigen::Index(u.size()));
    const Vector w = uu + xi;
    Vector vals = self->eval_ * w;
    for (Eigen::Index g = 0; g < vals.size(); ++g) vals[g] = self->nonlinearity(vals[g]);
    Eigen::Map<Vector>(out.data(), Eigen::Index(out.size())) =
        self->sys_.nu * self->lap_.cwiseProduct(w) - self->proj_ * vals + forcing;
  };
  auto jet = [self, xi, zeta, shifted](std::span<const Jet> u, std::span<Jet> out) {
    self->eval_field<Jet>(u, out, shifted ? &xi : nullptr);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += zeta[Eigen::Index(j)];
  };
  auto jac = [self, xi](const Vector& u) -> Matrix {
    const Vector vals = self->eval_ * (u + xi);
    Vector dF(vals.size());
    for (Eigen::Index g = 0; g < vals.size(); ++g) dF[g] = self->nonlinearity_derivative(vals[g]);
    Matrix j = -self->proj_ * dF.asDiagonal() * self->eval_;
    j.diagonal() += self->sys_.nu * self->lap_;
    return j;
  };
  std::optional<int> degree;
  if (sys_.g == GalerkinPerturbation::Zero) degree = sys_.p;
  return VectorField(dim(), eval, jet, jac, degree);
}

// ---------------------------------------------------------------------------

std::vector<int> SubspaceTower::dims() const {
  std::vector<int> out;
  for (const auto& g : generations) out.push_back(static_cast<int>(g.cols()));
  return out;
}

namespace {

Matrix orthonormal_span(const Matrix& m, double tol) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  const Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[0] > 0.0 && sv[rank] > tol * sv[0]) ++rank;
  return svd.matrixU().leftCols(rank);
}

// Calls fn on every nondecreasing index tuple of length p drawn from [0, n).
void for_each_multiset(int n, int p, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(std::size_t(p), 0);
  for (;;) {
    fn(idx);
    int i = p - 1;
    while (i >= 0 && idx[std::size_t(i)] == n - 1) --i;
    if (i < 0) return;
    ++idx[std::size_t(i)];
    for (int j = i + 1; j < p; ++j) idx[std::size_t(j)] = idx[std::size_t(i)];
  }
}

}  // namespace

SubspaceTower subspace_tower(const GalerkinModel& model, int max_generations, double tol) {
  require(max_generations >= 1, "subspace_tower needs max_generations >= 1");
  const int d = model.dim(), p = model.system().p;
  SubspaceTower tower;
  tower.generations.push_back(orthonormal_span(model.embedding(), tol));
  if (tower.generations.back().cols() == d) tower.full_at = 1;
  while (!tower.full_at && int(tower.generations.size()) < max_generations) {
    const Matrix& q = tower.generations.back();
    std::vector<Vector> cols;
    for_each_multiset(static_cast<int>(q.cols()), p, [&](const std::vector<int>& idx) {
      std::vector<Vector> f;
      for (int i : idx) f.push_back(q.col(i));
      cols.push_back(model.product(f));
    });
    Matrix m(d, Eigen::Index(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) m.col(Eigen::Index(i)) = cols[i];
    Matrix next = orthonormal_span(m, tol);
    if (next.cols() <= q.cols()) break;  // stalled
    tower.generations.push_back(std::move(next));
    if (tower.generations.back().cols() == d) tower.full_at = static_cast<int>(tower.generations.size());
  }
  return tower;
}

Vector scaling_control_endpoint(const GalerkinModel& model, const Vector& u0, const Vector& phi, const Vector& psi,
                                double delta) {
  require(delta > 0.0, "scaling control needs delta > 0");
  const double p = model.system().p;
  const VectorField g = model.shifted_field(std::pow(delta, -1.0 / p) * phi, psi / delta);
  try {
    return flow(g, u0, delta, model.system().integrator);
  } catch (const NumericError&) {
    return flow(g, u0, delta, model.system().integrator.tightened(1e-2));
  }
}

Vector scaling_control_limit(const GalerkinModel& model, const Vector& u0, const Vector& phi, const Vector& psi) {
  return u0 + psi - model.system().a * model.power(phi);
}

// ---------------------------------------------------------------------------

namespace {

struct Level {
  Matrix lower;                // basis of the previous space
  std::vector<Vector> phis;    // phi_j in the previous space
  Matrix system;               // [lower | P_N phi_j^p]
};

class Steerer {
 public:
  Steerer(const GalerkinModel& model, const SteeringOptions& opts) : model_(model), opts_(opts) {
    const SubspaceTower tower = subspace_tower(model);
    if (!tower.full_at) throw NumericError("galerkin steering: the subspace tower never reaches H_N");
    // Level 1 uses the H_1 unit vectors so candidate sums stay simple trig polynomials.
    Matrix prev = model.embedding();
    for (std::size_t i = 1; i < tower.generations.size(); ++i) {
      const Matrix& target = tower.generations[i];
      Level lv;
      lv.lower = prev;
      Matrix span = orthonormal_span(prev, 1e-12);
      for (const Vector& phi : candidates(prev)) {
        if (span.cols() >= target.cols()) break;
        const Vector v = model.power(phi);
        Vector r = v - span * (span.transpose() * v);
        if (r.norm() <= 1e-6 * std::max(1.0, v.norm())) continue;
        lv.phis.push_back(phi);
        span.conservativeResize(Eigen::NoChange, span.cols() + 1);
        span.col(span.cols() - 1) = r.normalized();
      }
      if (span.cols() < target.cols()) throw NumericError("galerkin steering: could not realize a tower generation");
      lv.system.resize(model.dim(), prev.cols() + Eigen::Index(lv.phis.size()));
      lv.system.leftCols(prev.cols()) = prev;
      for (std::size_t j = 0; j < lv.phis.size(); ++j)
        lv.system.col(prev.cols() + Eigen::Index(j)) = model.power(lv.phis[j]);
      levels_.push_back(std::move(lv));
      prev = target;
    }
  }

  int top() const { return static_cast<int>(levels_.size()) + 1; }

  ControlSignal realize(const Vector& psi, int level, double delta) const {
    const int n = model_.control_dim();
    if (psi.norm() == 0.0) return ControlSignal::empty(n);
    if (level == 1) {
      const double len = opts_.burst_fraction * delta;
      return ControlSignal::constant(model_.embedding().transpose() * psi / len, len);
    }
    const Level& lv = levels_[std::size_t(level - 2)];
    const Vector coef = lv.system.colPivHouseholderQr().solve(psi);
    const Eigen::Index nl = lv.lower.cols();
    const double p = model_.system().p, a = model_.system().a;
    ControlSignal out = ControlSignal::empty(n);
    for (std::size_t j = 0; j < lv.phis.size(); ++j) {
      const double c = coef[nl + Eigen::Index(j)];
      if (std::abs(c) <= 1e-14 * psi.norm()) continue;
      const double s = std::copysign(std::pow(std::abs(c) / a, 1.0 / p), c);
      const Vector big = -s * std::pow(delta, -1.0 / p) * lv.phis[j];
      out = out.then(realize(big, level - 1, delta))
                .then(ControlSignal::zero(n, delta))
                .then(realize(-big, level - 1, delta));
    }
    return out.then(realize(lv.lower * coef.head(nl), level - 1, delta));
  }

 private:
  std::vector<Vector> candidates(const Matrix& basis) const {
    std::vector<Vector> out;
    const Eigen::Index m = basis.cols();
    for (Eigen::Index i = 0; i < m; ++i) out.push_back(basis.col(i));
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j) {
        out.push_back(basis.col(i) + basis.col(j));
        out.push_back(basis.col(i) - basis.col(j));
      }
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j)
        for (Eigen::Index k = j + 1; k < m; ++k)
          for (int sj : {1, -1})
            for (int sk : {1, -1}) out.push_back(basis.col(i) + sj * basis.col(j) + sk * basis.col(k));
    return out;
  }

  const GalerkinModel& model_;
  SteeringOptions opts_;
  std::vector<Level> levels_;
};

}  // namespace

SteeringResult synthesize_steering(const GalerkinModel& model, const Vector& u0, const Vector& target, double eps,
                                   double time_budget, const SteeringOptions& opts) {
  require(eps > 0.0, "steering tolerance must be positive");
  require(time_budget > 0.0, "steering time budget must be positive");
  require(u0.size() == model.dim() && target.size() == model.dim(), "steering: state has wrong length");
  require(opts.delta_start > 0.0 && opts.delta_min > 0.0 && opts.burst_fraction > 0.0, "invalid steering options");
  const int n = model.control_dim();
  const VectorField f = model.field();
  const Matrix& b = model.embedding();
  const IntegratorConfig& cfg = model.system().integrator;
  SteeringResult res;
  res.control = ControlSignal::empty(n);
  double delta = opts.delta_start;
  Vector u = u0;
  double err = (target - u).norm();
  if (err >= eps) {
    const Steerer steer(model, opts);
    for (; res.rounds < opts.max_rounds && err >= eps; ++res.rounds) {
      const ControlSignal piece = steer.realize(target - u, steer.top(), delta);
      bool accepted = false;
      if (res.control.horizon() + piece.horizon() <= time_budget) {
        try {
          const Vector next = controlled_flow(f, b, u, piece, cfg);
          const double next_err = (target - next).norm();
          if (next_err < err) {
            accepted = true;
            res.control = res.control.then(piece);
            u = next;
            if (next_err > 0.5 * err) delta *= 0.5;
            err = next_err;
          }
        } catch (const NumericError&) {
        }
      }
      if (!accepted) delta *= 0.5;
      if (delta < opts.delta_min) break;
    }
  }
  res.final_delta = delta;
  res.endpoint = res.control.is_empty() ? u0 : controlled_flow(f, b, u0, res.control, cfg);
  res.error = (res.endpoint - target).norm();
  res.converged = res.error < eps;
  return res;
}

}  // namespace jumpflow
