#include "jumpflow/pdmp.hpp"

#include <cmath>

#include "jumpflow/errors.hpp"
#include "jumpflow/parallel.hpp"

namespace jumpflow {

void SystemSpec::validate() const {
  require(f.dim() > 0, "system drift is missing");
  require(B.rows() == f.dim(), "B must have d rows");
  require(B.cols() > 0, "B must have at least one column");
  require(law.dim() == B.cols(), "jump law dimension must equal the number of columns of B");
  require(rate > 0.0, "jump rate must be positive");
  if (law.kind() == JumpLaw::Kind::PerBath)
    require(std::abs(rate - law.total_bath_rate()) <= 1e-12 * rate,
            "with per-bath noise the jump rate must equal the sum of the bath rates");
  integrator.validate();
}

Vector Trajectory::at(const SystemSpec& spec, double t) const {
  require(t >= 0.0 && t <= path.horizon, "trajectory evaluated outside [0, horizon]");
  const std::size_t k = jumps_until(t);
  const double tau = k == 0 ? 0.0 : path.jump_times[k - 1];
  return flow(spec.f, skeleton(k), t - tau, spec.integrator);
}

Vector embedded_step(const SystemSpec& spec, const Vector& z, double t, const Vector& eta) {
  Vector next = flow(spec.f, z, t, spec.integrator);
  next.noalias() += spec.B * eta;
  return next;
}

Trajectory simulate(const SystemSpec& spec, const Vector& x0, double horizon, Rng& rng) {
  require(x0.size() == spec.d(), "initial state has wrong dimension");
  Trajectory tr;
  tr.x0 = x0;
  tr.path = sample_path(spec.rate, spec.law, horizon, rng);
  tr.post_jump.reserve(tr.path.size());
  Vector z = x0;
  for (std::size_t k = 0; k < tr.path.size(); ++k) {
    z = embedded_step(spec, z, tr.path.waiting[k], tr.path.jumps[k]);
    tr.post_jump.push_back(z);
  }
  return tr;
}

std::vector<Vector> embedded_chain(const SystemSpec& spec, const Vector& x0, int k, Rng& rng) {
  std::vector<Vector> out;
  out.reserve(std::size_t(k));
  Vector z = x0;
  for (int j = 0; j < k; ++j) {
    const double t = rng.exponential(spec.rate);
    z = embedded_step(spec, z, t, spec.law.sample(rng));
    out.push_back(z);
  }
  return out;
}

Vector f_block(const SystemSpec& spec, const Vector& x, std::span<const double> s, std::span<const Vector> xi) {
  require(s.size() == xi.size(), "f_block: waiting times and jumps differ in length");
  Vector z = x;
  for (std::size_t k = 0; k < s.size(); ++k) z = embedded_step(spec, z, s[k], xi[k]);
  return z;
}

Matrix block_jacobian(const SystemSpec& spec, const Vector& x, std::span<const double> s,
                      std::span<const Vector> xi) {
  require(s.size() == xi.size(), "block_jacobian: waiting times and jumps differ in length");
  const Eigen::Index d = spec.d(), n = spec.n();
  const auto k = static_cast<Eigen::Index>(s.size());
  Matrix jac = Matrix::Zero(d, k * n);
  Vector z = x;
  for (Eigen::Index j = 0; j < k; ++j) {
    const FlowJacobian fj = flow_with_jacobian(spec.f, z, s[std::size_t(j)], spec.integrator);
    if (j > 0) jac.leftCols(j * n) = fj.jacobian * jac.leftCols(j * n);
    jac.middleCols(j * n, n) = spec.B;
    z = fj.state + spec.B * xi[std::size_t(j)];
  }
  return jac;
}

namespace {

struct Accumulator {
  double sum = 0.0, sum2 = 0.0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
  }
  MomentRow row(double at, std::size_t n) const {
    const double mean = sum / double(n);
    const double var = n > 1 ? std::max(0.0, (sum2 - double(n) * mean * mean) / double(n - 1)) : 0.0;
    return {at, mean, std::sqrt(var / double(n))};
  }
};

}  // namespace

MomentReport empirical_moment(const SystemSpec& spec, const Vector& x0, int k_max, const std::vector<double>& t_grid,
                              std::size_t replicas, std::uint64_t seed, unsigned threads) {
  spec.validate();
  require(replicas >= 1, "empirical_moment needs at least one replica");
  require(k_max >= 0, "k_max must be nonnegative");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    require(t_grid[i] >= 0.0, "time grid must be nonnegative");
    if (i) require(t_grid[i] > t_grid[i - 1], "time grid must be increasing");
  }
  const std::size_t nk = std::size_t(k_max) + 1, nt = t_grid.size();
  std::vector<double> values(replicas * (nk + nt));
  parallel_for(replicas, threads, [&](std::size_t r) {
    Rng rng(seed, r, StreamTag::Moments);
    double* out = values.data() + r * (nk + nt);
    Vector z = x0;
    double tau = 0.0;
    std::size_t k = 0, gi = 0;
    out[0] = z.squaredNorm();
    while (k < nk - 1 || gi < nt) {
      const double w = rng.exponential(spec.rate);
      const Vector eta = spec.law.sample(rng);
      Vector cur = z;
      double cur_t = tau;
      while (gi < nt && t_grid[gi] < tau + w) {
        cur = flow(spec.f, cur, t_grid[gi] - cur_t, spec.integrator);
        cur_t = t_grid[gi];
        out[nk + gi++] = cur.squaredNorm();
      }
      if (k + 1 >= nk && gi >= nt) break;
      z = embedded_step(spec, z, w, eta);
      tau += w;
      if (++k < nk) out[k] = z.squaredNorm();
    }
  });
  MomentReport rep;
  rep.replicas = replicas;
  for (std::size_t i = 0; i < nk + nt; ++i) {
    Accumulator acc;
    for (std::size_t r = 0; r < replicas; ++r) acc.add(values[r * (nk + nt) + i]);
    if (i < nk)
      rep.embedded.push_back(acc.row(double(i), replicas));
    else
      rep.continuous.push_back(acc.row(t_grid[i - nk], replicas));
  }
  return rep;
}

std::vector<double> linear_moment_recursion(double alpha, double rate, double Lambda, double m0, int k_max) {
  const double rho = rate / (rate + 2.0 * alpha);
  std::vector<double> m{m0};
  for (int k = 1; k <= k_max; ++k) m.push_back(rho * m.back() + Lambda);
  return m;
}

bool PathwiseBoundCheck::holds() const {
  for (std::size_t k = 0; k < lhs.size(); ++k)
    if (lhs[k] > rhs[k] * (1.0 + 1e-9) + 1e-9) return false;
  return true;
}

PathwiseBoundCheck pathwise_moment_bound(const SystemSpec& spec, const Trajectory& traj, double alpha, double beta,
                                         double eps) {
  require(alpha > 0.0 && beta >= 0.0 && eps > 0.0, "pathwise bound needs alpha > 0, beta >= 0, eps > 0");
  const Eigen::JacobiSVD<Matrix> svd(spec.B);
  const double b2 = std::pow(svd.singularValues()(0), 2);
  PathwiseBoundCheck c;
  c.c_eps = (1.0 + 1.0 / eps) * std::max(beta / alpha, b2);
  double bound = traj.x0.squaredNorm();
  for (std::size_t k = 0; k < traj.post_jump.size(); ++k) {
    bound = (1.0 + eps) * std::exp(-2.0 * alpha * traj.path.waiting[k]) * bound +
            c.c_eps * (1.0 + traj.path.jumps[k].squaredNorm());
    c.lhs.push_back(traj.post_jump[k].squaredNorm());
    c.rhs.push_back(bound);
  }
  return c;
}

}  // namespace jumpflow
