#include "jumpflow/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "jumpflow/errors.hpp"

namespace jumpflow {

std::string to_string(Potential::Kind k) {
  switch (k) {
    case Potential::Kind::Zero: return "zero";
    case Potential::Kind::CosSum: return "cos_sum";
    case Potential::Kind::Bump: return "bump";
  }
  return "unknown";
}

double Potential::derivative_norm(const Vector& q, int k, int directions) const {
  require(k >= 0, "derivative order must be nonnegative");
  const auto dim = q.size();
  std::vector<Vector> dirs;
  for (Eigen::Index i = 0; i < dim; ++i) dirs.push_back(Vector::Unit(dim, i));
  Rng rng(0x5eed, std::uint64_t(k), StreamTag::Probe);
  for (int j = 0; j < directions; ++j) {
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
    dirs.push_back(v.normalized());
  }
  double factorial = 1.0;
  for (int i = 2; i <= k; ++i) factorial *= i;
  double best = 0.0;
  std::vector<Taylor> x(static_cast<std::size_t>(dim));
  for (const auto& v : dirs) {
    for (Eigen::Index i = 0; i < dim; ++i) x[std::size_t(i)] = Taylor::variable(q[i], v[i], k);
    const Taylor u = value<Taylor>(std::span<const Taylor>(x));
    best = std::max(best, std::abs(u.coeff(k)) * factorial);
  }
  return best;
}

void NetworkSpec::validate() const {
  require(size >= 1, "network needs at least one mass");
  require(!driven.empty(), "network needs a nonempty driven set");
  std::set<int> seen;
  for (int j : driven) {
    require(j >= 0 && j < size, "driven index out of range");
    require(seen.insert(j).second, "driven indices must be distinct");
  }
  require(omega.rows() == size && omega.cols() == size, "omega must be |I| x |I|");
  require(gamma.size() == Eigen::Index(driven.size()), "gamma needs one entry per driven mass");
  for (Eigen::Index i = 0; i < gamma.size(); ++i) require(gamma[i] > 0.0, "gamma must be positive");
  require(lambda.size() == 0 || lambda.size() == Eigen::Index(driven.size()),
          "lambda needs one entry per driven mass");
  for (Eigen::Index i = 0; i < lambda.size(); ++i) require(lambda[i] > 0.0, "lambda must be positive");
  require(Eigen::FullPivLU<Matrix>(omega).isInvertible(), "omega must be nonsingular");
}

Matrix NetworkSpec::injection() const {
  Matrix b = Matrix::Zero(size, Eigen::Index(driven.size()));
  for (std::size_t j = 0; j < driven.size(); ++j) b(driven[j], Eigen::Index(j)) = 1.0;
  return b;
}

double NetworkSpec::omega_condition() const {
  const Eigen::JacobiSVD<Matrix> svd(omega);
  const Vector sv = svd.singularValues();
  return sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
}

Matrix sym_sqrt(const Matrix& k) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(k);
  require(es.info() == Eigen::Success, "sym_sqrt: eigen decomposition failed");
  require(es.eigenvalues().minCoeff() > 0.0, "sym_sqrt: matrix is not positive definite");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

NetworkSpec chain_network(int L, std::vector<int> driven, double gamma, double lambda) {
  require(L >= 1, "chain needs L >= 1");
  Matrix k = Matrix::Identity(L, L);
  for (int i = 0; i + 1 < L; ++i) {
    k(i, i) += 1.0;
    k(i + 1, i + 1) += 1.0;
    k(i, i + 1) -= 1.0;
    k(i + 1, i) -= 1.0;
  }
  NetworkSpec nw;
  nw.size = L;
  nw.driven = std::move(driven);
  nw.omega = sym_sqrt(k);
  nw.gamma = Vector::Constant(Eigen::Index(nw.driven.size()), gamma);
  nw.lambda = Vector::Constant(Eigen::Index(nw.driven.size()), lambda);
  nw.validate();
  return nw;
}

Matrix langevin_matrix(const NetworkSpec& nw) {
  nw.validate();
  const int I = nw.size;
  const Matrix inj = nw.injection();
  Matrix a = Matrix::Zero(2 * I, 2 * I);
  a.topLeftCorner(I, I) = -inj * nw.gamma.asDiagonal() * inj.transpose();
  a.topRightCorner(I, I) = -nw.omega.transpose();
  a.bottomLeftCorner(I, I) = nw.omega;
  return a;
}

Matrix omega_tilde(const NetworkSpec& nw) {
  nw.validate();
  require(nw.lambda.size() == Eigen::Index(nw.driven.size()), "semi-Markov form needs lambda per driven mass");
  const Matrix inj = nw.injection();
  const Matrix k = nw.omega.transpose() * nw.omega - inj * nw.lambda.cwiseAbs2().asDiagonal() * inj.transpose();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(k);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError("omega^* omega - lambda^2 iota iota^* is not positive definite; lambda is too large");
  return sym_sqrt(k);
}

Matrix semimarkov_matrix(const NetworkSpec& nw) {
  const Matrix wt = omega_tilde(nw);
  const int I = nw.size, J = static_cast<int>(nw.driven.size());
  const Matrix inj = nw.injection();  // I x J
  Matrix a = Matrix::Zero(J + 2 * I, J + 2 * I);
  a.block(0, 0, J, J) = -Matrix(nw.gamma.asDiagonal());
  a.block(0, J, J, I) = nw.lambda.asDiagonal() * inj.transpose();
  a.block(J, 0, I, J) = -inj * nw.lambda.asDiagonal();
  a.block(J, J + I, I, I) = -wt.transpose();
  a.block(J + I, J, I, I) = wt;
  return a;
}

namespace {

// A x - (grad U(q) placed at `offset`), q = w_inv * x.segment(q_at, I).
VectorField network_field(const Matrix& a, const Matrix& w_inv, const Potential& pot, Eigen::Index offset,
                          Eigen::Index q_at) {
  const auto dim = static_cast<int>(a.rows());
  const auto I = w_inv.rows();
  if (pot.kind == Potential::Kind::Zero) return VectorField::linear(a);
  auto body = [a, w_inv, pot, offset, q_at, I](auto x, auto out) {
    using S = std::remove_cv_t<typename decltype(x)::element_type>;
    const auto n = static_cast<Eigen::Index>(x.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      S acc(0.0);
      for (Eigen::Index j = 0; j < n; ++j)
        if (a(i, j) != 0.0) acc += x[std::size_t(j)] * a(i, j);
      out[std::size_t(i)] = acc;
    }
    std::vector<S> q(static_cast<std::size_t>(I), S(0.0));
    std::vector<S> g(static_cast<std::size_t>(I), S(0.0));
    for (Eigen::Index i = 0; i < I; ++i)
      for (Eigen::Index j = 0; j < I; ++j)
        if (w_inv(i, j) != 0.0) q[std::size_t(i)] += x[std::size_t(q_at + j)] * w_inv(i, j);
    pot.gradient<S>(std::span<const S>(q), std::span<S>(g));
    for (Eigen::Index i = 0; i < I; ++i) out[std::size_t(offset + i)] -= g[std::size_t(i)];
  };
  return VectorField::generic(dim, body);
}

}  // namespace

SystemSpec build_langevin(const NetworkSpec& nw, double rate, const JumpLaw& law, IntegratorConfig integrator) {
  const Matrix a = langevin_matrix(nw);
  const int I = nw.size;
  SystemSpec spec;
  spec.f = network_field(a, nw.omega.inverse(), nw.potential, 0, I);
  spec.B = Matrix::Zero(2 * I, Eigen::Index(nw.driven.size()));
  spec.B.topRows(I) = nw.injection();
  spec.rate = rate;
  spec.law = law;
  spec.integrator = integrator;
  spec.validate();
  return spec;
}

SystemSpec build_semimarkov(const NetworkSpec& nw, double rate, const JumpLaw& law, IntegratorConfig integrator) {
  const Matrix a = semimarkov_matrix(nw);
  const int I = nw.size, J = static_cast<int>(nw.driven.size());
  SystemSpec spec;
  spec.f = network_field(a, omega_tilde(nw).inverse(), nw.potential, J, J + I);
  spec.B = Matrix::Zero(J + 2 * I, J);
  spec.B.topRows(J) = Matrix::Identity(J, J);
  spec.rate = rate;
  spec.law = law;
  spec.integrator = integrator;
  spec.validate();
  return spec;
}

ConditionReport check_conditions(const NetworkSpec& nw, const std::vector<Vector>& ray, int ph_orders) {
  nw.validate();
  require(!ray.empty(), "check_conditions needs a nonempty ray");
  for (const auto& q : ray) require(q.size() == nw.size, "ray point has wrong dimension");
  ConditionReport rep;
  rep.kalman = kalman_rank(nw.omega.transpose() * nw.omega, nw.injection());
  rep.omega_condition = nw.omega_condition();
  rep.growth_limit = 1.0 / (4.0 * nw.size);
  rep.ph_orders = ph_orders > 0 ? ph_orders : 2 * nw.size;

  // (G): least-squares slope of log(1 + |grad U|) against log(1 + |q|).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& q : ray) {
    Vector g(nw.size);
    nw.potential.gradient<double>(as_span(q), as_span(g));
    const double x = std::log1p(q.norm()), y = std::log1p(g.norm());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, nw.potential.derivative_norm(q, 2));
  }
  const double n = double(ray.size());
  const double den = n * sxx - sx * sx;
  rep.growth_exponent = den > 1e-12 ? (n * sxy - sx * sy) / den : 0.0;
  rep.growth_pass = rep.growth_exponent < rep.growth_limit;

  // (pH): every product must decay along the ray.
  rep.ph_pass = true;
  for (int k = 0; k < rep.ph_orders; ++k) {
    std::vector<double> vals;
    for (const auto& q : ray) vals.push_back(std::pow(q.norm(), k) * nw.potential.derivative_norm(q, k + 1));
    const double peak = *std::max_element(vals.begin(), vals.end());
    const double last = vals.back();
    if (!(last <= 1e-12 || (ray.size() > 1 && last <= 1e-3 * peak))) rep.ph_pass = false;
    rep.ph_products.push_back(std::move(vals));
  }
  return rep;
}

}  // namespace jumpflow
