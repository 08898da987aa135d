#include "jumpflow/coupling.hpp"

#include <algorithm>
#include <cmath>

#include "jumpflow/errors.hpp"
#include "jumpflow/parallel.hpp"

namespace jumpflow {

namespace {

bool same(const Vector& a, const Vector& b) { return a.size() == b.size() && (a.array() == b.array()).all(); }

bool in_ball(const Vector& z, const Vector& center, double radius) { return (z - center).norm() <= radius; }

std::vector<Vector> draw_jumps(const JumpLaw& law, int m, Rng& rng) {
  std::vector<Vector> xi;
  xi.reserve(std::size_t(m));
  for (int i = 0; i < m; ++i) xi.push_back(law.sample(rng));
  return xi;
}

std::vector<Vector> block_states(const SystemSpec& spec, const Vector& z, std::span<const double> s,
                                 std::span<const Vector> xi) {
  std::vector<Vector> out;
  out.reserve(xi.size());
  Vector cur = z;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    cur = embedded_step(spec, cur, s[i], xi[i]);
    out.push_back(cur);
  }
  return out;
}

Vector stack(std::span<const Vector> xi) {
  Eigen::Index len = 0;
  for (const auto& v : xi) len += v.size();
  Vector out(len);
  Eigen::Index at = 0;
  for (const auto& v : xi) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

void unstack(const Vector& flat, std::vector<Vector>& xi) {
  Eigen::Index at = 0;
  for (auto& v : xi) {
    v = flat.segment(at, v.size());
    at += v.size();
  }
}

}  // namespace

SampledLaw SampledLaw::from_jump_law(const JumpLaw& law) {
  require(law.has_density(), "a sampled law needs a density");
  return {law.dim(), [law](Rng& rng) { return law.sample(rng); }, [law](const Vector& x) { return law.density(x); }};
}

SampledLaw SampledLaw::pushforward(const JumpLaw& law, const Matrix& b, const Vector& shift) {
  require(b.rows() == b.cols() && b.rows() == shift.size(), "pushforward needs a square B matching the shift");
  const Eigen::PartialPivLU<Matrix> lu(b);
  const double det = std::abs(lu.determinant());
  require(det > 0.0 && std::isfinite(det), "pushforward needs an invertible B");
  return {static_cast<int>(shift.size()),
          [law, b, shift](Rng& rng) -> Vector { return shift + b * law.sample(rng); },
          [law, lu, shift, det](const Vector& y) { return law.density(lu.solve(y - shift)) / det; }};
}

SampledLaw SampledLaw::uniform_box(Vector lo, Vector hi) {
  require(lo.size() == hi.size() && lo.size() > 0, "uniform box bounds must have equal positive length");
  require((hi.array() > lo.array()).all(), "uniform box needs hi > lo");
  const double vol = (hi - lo).prod();
  return {static_cast<int>(lo.size()),
          [lo, hi](Rng& rng) -> Vector {
            Vector x(lo.size());
            for (Eigen::Index i = 0; i < lo.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform();
            return x;
          },
          [lo, hi, vol](const Vector& x) {
            return ((x.array() >= lo.array()).all() && (x.array() <= hi.array()).all()) ? 1.0 / vol : 0.0;
          }};
}

MaximalDraw maximal_coupling_sample(const SampledLaw& p, const SampledLaw& q, Rng& rng, long budget) {
  require(p.dim == q.dim, "maximal coupling: laws live on different spaces");
  MaximalDraw d;
  d.x = p.sample(rng);
  const double px = p.density(d.x);
  const double qx = q.density(d.x);
  if (rng.uniform() * px < qx) {
    d.y = d.x;
    d.hit = true;
    return d;
  }
  for (long i = 0; i < budget; ++i) {
    Vector y = q.sample(rng);
    if (rng.uniform() * q.density(y) >= p.density(y)) {
      d.y = std::move(y);
      return d;
    }
  }
  throw NumericError("maximal coupling: rejection budget exceeded");
}

double tv_quadrature(const std::function<double(const Vector&)>& p, const std::function<double(const Vector&)>& q,
                     const QuadratureGrid& grid) {
  const auto dim = grid.lo.size();
  require(dim >= 1 && dim <= 3, "tv_quadrature supports dimension 1 to 3");
  require(grid.hi.size() == dim && grid.cells.size() == std::size_t(dim), "quadrature grid shape mismatch");
  Vector h(dim);
  double vol = 1.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    require(grid.cells[std::size_t(i)] > 0 && grid.hi[i] > grid.lo[i], "quadrature grid must be nondegenerate");
    h[i] = (grid.hi[i] - grid.lo[i]) / grid.cells[std::size_t(i)];
    vol *= h[i];
  }
  std::vector<int> idx(std::size_t(dim), 0);
  Vector x(dim);
  double mp = 0.0, mq = 0.0, diff = 0.0;
  for (;;) {
    for (Eigen::Index i = 0; i < dim; ++i) x[i] = grid.lo[i] + (idx[std::size_t(i)] + 0.5) * h[i];
    const double a = p(x), b = q(x);
    mp += a;
    mq += b;
    diff += std::abs(a - b);
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == grid.cells[k]) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  mp *= vol;
  mq *= vol;
  if (std::abs(mp - 1.0) > 1e-3 || std::abs(mq - 1.0) > 1e-3)
    throw ValidationError("tv_quadrature: grid does not cover the support (mass " + std::to_string(mp) + ", " +
                          std::to_string(mq) + ")");
  return std::clamp(0.5 * diff * vol, 0.0, 1.0);
}

std::string to_string(HitMode m) {
  switch (m) {
    case HitMode::ExactDensity: return "exact";
    case HitMode::Shooting: return "shooting";
    case HitMode::Independent: return "independent";
  }
  return "unknown";
}

HitMode hit_mode_from_string(const std::string& s) {
  if (s == "exact") return HitMode::ExactDensity;
  if (s == "shooting") return HitMode::Shooting;
  if (s == "independent") return HitMode::Independent;
  throw ValidationError("unknown hit mode '" + s + "' (expected exact, shooting or independent)");
}

void CouplingPolicy::validate(const SystemSpec& spec) const {
  require(x_hat.size() == spec.d(), "coupling x_hat has wrong dimension");
  require(r > 0.0, "coupling radius r must be positive");
  require(m >= 1, "coupling block length m must be at least 1");
  require(R >= 0.0, "coupling radius R must be nonnegative");
  require(max_blocks > 0, "max_blocks must be positive");
  require(shooting.max_iterations >= 1 && shooting.residual_tol > 0.0 && shooting.rank_tol > 0.0,
          "invalid shooting parameters");
  if (mode == HitMode::ExactDensity) {
    require(spec.n() == spec.d(), "exact-density coupling needs a square B; use shooting mode");
    require(spec.law.has_density(), "exact-density coupling needs a jump law with a density");
    require(Eigen::FullPivLU<Matrix>(spec.B).isInvertible(), "exact-density coupling needs an invertible B");
  }
  if (mode == HitMode::Shooting) {
    require(spec.law.has_density(), "shooting coupling needs a jump law with a density");
    require(m * spec.n() >= spec.d(), "shooting coupling needs m n >= d");
  }
}

double CouplingPolicy::effective_R() const { return std::max(R, x_hat.norm() + r); }

BlockOutcome block_couple(const SystemSpec& spec, const CouplingPolicy& policy, const Vector& z, const Vector& zp,
                          std::span<const double> s, Rng& rng) {
  const int m = policy.m;
  require(s.size() == std::size_t(m), "block_couple: need exactly m waiting times");
  BlockOutcome out;
  if (same(z, zp)) {
    const auto xi = draw_jumps(spec.law, m, rng);
    out.a = block_states(spec, z, s, xi);
    out.b = out.a;
    out.branch = Branch::Synchronous;
    out.hit = true;
    return out;
  }
  const bool near = in_ball(z, policy.x_hat, policy.r) && in_ball(zp, policy.x_hat, policy.r);
  if (!near || policy.mode == HitMode::Independent) {
    const auto xi = draw_jumps(spec.law, m, rng);
    const auto xip = draw_jumps(spec.law, m, rng);
    out.a = block_states(spec, z, s, xi);
    out.b = block_states(spec, zp, s, xip);
    out.branch = near ? Branch::Maximal : Branch::Independent;
    return out;
  }
  out.branch = Branch::Maximal;
  if (policy.mode == HitMode::ExactDensity) {
    // First m-1 jumps shared, last jump maximally coupled on the pushforward laws.
    const auto shared = draw_jumps(spec.law, m - 1, rng);
    out.a = block_states(spec, z, s.first(std::size_t(m - 1)), shared);
    out.b = block_states(spec, zp, s.first(std::size_t(m - 1)), shared);
    const Vector& w = m > 1 ? out.a.back() : z;
    const Vector& wp = m > 1 ? out.b.back() : zp;
    const double last = s[std::size_t(m - 1)];
    const auto pa = SampledLaw::pushforward(spec.law, spec.B, flow(spec.f, w, last, spec.integrator));
    const auto pb = SampledLaw::pushforward(spec.law, spec.B, flow(spec.f, wp, last, spec.integrator));
    MaximalDraw md = maximal_coupling_sample(pa, pb, rng);
    out.a.push_back(md.x);
    out.b.push_back(md.hit ? md.x : md.y);
    out.hit = md.hit;
    return out;
  }
  // Shooting: xi' = Phi(xi) solves F(z', s, xi') = F(z, s, xi). log_weight is the log ratio of the
  // law of xi' pulled back through Phi to the law of xi; with m n = d it includes the change of
  // variables, otherwise the fiber factor is omitted and the coupling is approximate.
  const bool square = m * spec.n() == spec.d();
  auto log_weight = [&](const std::vector<Vector>& xi, const std::vector<Vector>& xip) {
    double lw = log_density_product(spec.law, xip) - log_density_product(spec.law, xi);
    if (square) {
      const double da = block_jacobian(spec, z, s, xi).determinant();
      const double db = block_jacobian(spec, zp, s, xip).determinant();
      lw += std::log(std::abs(da)) - std::log(std::abs(db));
    }
    return std::isnan(lw) ? -std::numeric_limits<double>::infinity() : lw;
  };
  const auto xi = draw_jumps(spec.law, m, rng);
  out.a = block_states(spec, z, s, xi);
  const ShootResult sr = shoot_match(spec, z, zp, s, xi, policy.shooting);
  if (sr.xi) {
    if (std::log(rng.uniform()) < std::min(0.0, log_weight(xi, *sr.xi))) {
      out.b = block_states(spec, zp, s, *sr.xi);
      out.b.back() = out.a.back();
      out.hit = true;
      return out;
    }
    out.shoot_rejected = true;
  } else {
    out.shoot_failed = true;
  }
  // Miss: draw xi' from the residual of its law against the pushed-forward hit law, by rejection
  // from the plain law with the inverse shot. Where the inverse solve fails the hit law has no mass.
  constexpr int kResidualBudget = 100000;
  for (int attempt = 0; attempt < kResidualBudget; ++attempt) {
    auto xip = draw_jumps(spec.law, m, rng);
    const ShootResult back = shoot_match(spec, zp, z, s, xip, policy.shooting);
    const double keep = back.xi ? 1.0 - std::exp(std::min(0.0, -log_weight(*back.xi, xip))) : 1.0;
    if (rng.uniform() < keep) {
      out.b = block_states(spec, zp, s, xip);
      return out;
    }
  }
  out.shoot_failed = true;
  out.b = block_states(spec, zp, s, draw_jumps(spec.law, m, rng));
  return out;
}

ShootResult shoot_match(const SystemSpec& spec, const Vector& z, const Vector& zp, std::span<const double> s,
                        std::span<const Vector> xi, const ShootingConfig& cfg) {
  require(s.size() == xi.size() && !s.empty(), "shoot_match: need m >= 1 waiting times and jumps");
  ShootResult res;
  std::vector<Vector> cur(xi.begin(), xi.end());
  if (same(z, zp)) {
    res.xi = std::move(cur);
    res.residual = 0.0;
    return res;
  }
  const Vector target = f_block(spec, z, s, xi);
  // Residual of a candidate; +inf when the flow blows up on it.
  auto residual = [&](const std::vector<Vector>& cand, Vector& r) {
    try {
      r = f_block(spec, zp, s, cand) - target;
      return r.norm();
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  Vector flat = stack(cur);
  Vector r;
  res.residual = residual(cur, r);
  for (int it = 0;; ++it) {
    res.iterations = it;
    if (!std::isfinite(res.residual)) return res;
    if (res.residual <= cfg.residual_tol) {
      res.xi = std::move(cur);
      return res;
    }
    if (it == cfg.max_iterations) return res;
    Matrix jac;
    try {
      jac = block_jacobian(spec, zp, s, cur);
    } catch (const NumericError&) {
      return res;
    }
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    svd.setThreshold(cfg.rank_tol);
    if (sv.size() == 0 || svd.rank() < spec.d()) {
      res.singular = true;
      return res;
    }
    // Backtracking on the Gauss-Newton step keeps iterates where the flow is tame.
    const Vector step = svd.solve(r);
    bool moved = false;
    for (double t = 1.0; t >= 1.0 / 1024.0; t *= 0.5) {
      const Vector trial = flat - t * step;
      std::vector<Vector> cand = cur;
      unstack(trial, cand);
      Vector rt;
      const double nr = residual(cand, rt);
      if (nr < res.residual) {
        flat = trial;
        cur = std::move(cand);
        r = std::move(rt);
        res.residual = nr;
        moved = true;
        break;
      }
    }
    if (!moved) return res;
  }
}

bool CouplingRecord::ordered() const {
  if (I != kNever && J != kNever && I > J) return false;
  if (J != kNever && K != kNever && J > K) return false;
  if (K != kNever && !(T <= tau_K)) return false;
  return true;
}

CouplingRecord run_coupling(const SystemSpec& spec, const CouplingPolicy& policy, const Vector& x, const Vector& xp,
                            double horizon, Rng& rng, std::span<const double> observe) {
  require(horizon > 0.0, "coupling horizon must be positive");
  require(x.size() == spec.d() && xp.size() == spec.d(), "coupling initial states have wrong dimension");
  for (std::size_t i = 1; i < observe.size(); ++i)
    require(observe[i] >= observe[i - 1], "observation times must be nondecreasing");
  require(observe.empty() || (observe.front() >= 0.0 && observe.back() <= horizon),
          "observation times must lie in [0, horizon]");
  const double R = policy.effective_R();
  const Vector origin = Vector::Zero(spec.d());
  CouplingRecord rec;
  Vector z = x, zp = xp;
  double tau = 0.0;
  double equal_since = same(z, zp) ? 0.0 : -1.0;
  long k = 0;
  std::size_t oi = 0;
  std::vector<double> s(std::size_t(policy.m));
  for (long block = 0;; ++block) {
    if (rec.I == CouplingRecord::kNever && in_ball(z, origin, R) && in_ball(zp, origin, R)) rec.I = k;
    if (rec.J == CouplingRecord::kNever && in_ball(z, policy.x_hat, policy.r) && in_ball(zp, policy.x_hat, policy.r))
      rec.J = k;
    if (rec.K == CouplingRecord::kNever && same(z, zp)) {
      rec.K = k;
      rec.tau_K = tau;
      rec.T = equal_since;
    }
    const bool observed_all = oi == observe.size();
    if (rec.coalesced() && observed_all) break;
    if (!rec.coalesced() && tau >= horizon && observed_all) break;
    if (block >= policy.max_blocks) break;
    for (auto& w : s) w = rng.exponential(spec.rate);
    const BlockOutcome out = block_couple(spec, policy, z, zp, s, rng);
    rec.branches.push_back(static_cast<char>(out.branch));
    if (out.shoot_failed) ++rec.shoot_failures;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double next_tau = tau + s[i];
      while (oi < observe.size() && observe[oi] < next_tau) {
        const double dt = observe[oi] - tau;
        Vector a = flow(spec.f, z, dt, spec.integrator);
        Vector b = same(z, zp) ? a : flow(spec.f, zp, dt, spec.integrator);
        rec.observed_a.push_back(std::move(a));
        rec.observed_b.push_back(std::move(b));
        ++oi;
      }
      z = out.a[i];
      zp = out.b[i];
      tau = next_tau;
      ++k;
      if (!same(z, zp))
        equal_since = -1.0;
      else if (equal_since < 0.0)
        equal_since = tau;
    }
  }
  return rec;
}

std::vector<CouplingRecord> run_couplings(const SystemSpec& spec, const CouplingPolicy& policy, const Vector& x,
                                          const Vector& xp, double horizon, std::size_t replicas, std::uint64_t seed,
                                          unsigned threads, std::span<const double> observe) {
  spec.validate();
  policy.validate(spec);
  std::vector<CouplingRecord> out(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    Rng rng(seed, r, StreamTag::Coupling);
    out[r] = run_coupling(spec, policy, x, xp, horizon, rng, observe);
  });
  return out;
}

std::vector<TailPoint> tail_curve(std::span<const CouplingRecord> records, std::span<const double> times) {
  require(!records.empty(), "tail curve needs at least one record");
  const double n = static_cast<double>(records.size());
  std::vector<TailPoint> out;
  for (double t : times) {
    double alive = 0.0;
    for (const auto& r : records) alive += (!r.coalesced() || r.T > t) ? 1.0 : 0.0;
    const double p = alive / n;
    out.push_back({t, p, std::sqrt(p * (1.0 - p) / n)});
  }
  return out;
}

std::vector<TailPoint> block_tail_curve(std::span<const CouplingRecord> records, int m, long max_k) {
  require(!records.empty() && m >= 1, "block tail curve needs records and m >= 1");
  const double n = static_cast<double>(records.size());
  std::vector<TailPoint> out;
  for (long k = 0; k <= max_k; k += m) {
    double alive = 0.0;
    for (const auto& r : records) alive += (!r.coalesced() || r.K > k) ? 1.0 : 0.0;
    const double p = alive / n;
    out.push_back({double(k), p, std::sqrt(p * (1.0 - p) / n)});
  }
  return out;
}

}  // namespace jumpflow
