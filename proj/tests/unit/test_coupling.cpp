#include <doctest.h>

#include <cmath>

#include "jumpflow/coupling.hpp"
#include "jumpflow/diagnostics.hpp"
#include "jumpflow/errors.hpp"
#include "support.hpp"

using namespace jumpflow;

namespace {

constexpr double kTvShiftedNormal = 0.38292492254802624;  // 2 Phi(1/2) - 1

SampledLaw normal_law(double mean, double sigma) {
  return SampledLaw::pushforward(JumpLaw::gaussian(1, 1.0), Matrix::Constant(1, 1, sigma), Vector::Constant(1, mean));
}

SystemSpec cubic_1d() {
  SystemSpec s;
  auto body = [](auto x, auto out) { out[0] = -x[0] - x[0] * x[0] * x[0]; };
  s.f = VectorField::generic(1, body, {}, 3);
  s.B = Matrix::Identity(1, 1);
  s.rate = 1.0;
  s.law = JumpLaw::gaussian(1, 1.0);
  return s;
}

SystemSpec nonlinear_2d() {
  SystemSpec s;
  auto body = [](auto x, auto out) {
    out[0] = x[1] - x[0] * 0.1 - x[0] * x[0] * x[0];
    out[1] = -x[0] - x[1] - x[1] * x[1] * x[1];
  };
  s.f = VectorField::generic(2, body, {}, 3);
  s.B = (Matrix(2, 1) << 0.0, 1.0).finished();
  s.rate = 1.0;
  s.law = JumpLaw::gaussian(1, 1.0);
  return s;
}

CouplingPolicy exact_policy(int d, double r) {
  CouplingPolicy p;
  p.x_hat = Vector::Zero(d);
  p.r = r;
  p.m = 1;
  p.mode = HitMode::ExactDensity;
  p.R = 3.0;
  return p;
}

}  // namespace

TEST_CASE("maximal coupling of a law with itself always hits") {
  auto r = testing::rng();
  const auto p = normal_law(0.3, 1.2);
  for (int i = 0; i < 2000; ++i) {
    const auto d = maximal_coupling_sample(p, p, r);
    CHECK(d.hit);
    CHECK(d.x == d.y);
  }
}

TEST_CASE("maximal coupling miss rate equals the total variation distance") {
  auto r = testing::rng(1);
  const auto p = normal_law(0.0, 1.0), q = normal_law(1.0, 1.0);
  const int n = 100000;
  int miss = 0;
  std::vector<double> xs, ys;
  for (int i = 0; i < n; ++i) {
    const auto d = maximal_coupling_sample(p, q, r);
    miss += d.hit ? 0 : 1;
    CHECK((d.hit == (d.x == d.y)));
    xs.push_back(d.x[0]);
    ys.push_back(d.y[0]);
  }
  const double rate = double(miss) / n;
  const double se = std::sqrt(kTvShiftedNormal * (1.0 - kTvShiftedNormal) / n);
  CHECK(std::abs(rate - kTvShiftedNormal) < 3.0 * se);
  CHECK(ks_one_sample(xs, [](double v) { return testing::phi_cdf(v); }).p_value > 0.01);
  CHECK(ks_one_sample(ys, [](double v) { return testing::phi_cdf(v - 1.0); }).p_value > 0.01);
}

TEST_CASE("disjoint uniforms never coincide and keep their marginals") {
  auto r = testing::rng(2);
  const auto p = SampledLaw::uniform_box(Vector::Zero(1), Vector::Ones(1));
  const auto q = SampledLaw::uniform_box(Vector::Constant(1, 2.0), Vector::Constant(1, 3.0));
  std::vector<double> xs, ys;
  for (int i = 0; i < 20000; ++i) {
    const auto d = maximal_coupling_sample(p, q, r);
    REQUIRE_FALSE(d.hit);
    xs.push_back(d.x[0]);
    ys.push_back(d.y[0]);
  }
  CHECK(ks_one_sample(xs, [](double v) { return std::clamp(v, 0.0, 1.0); }).p_value > 0.01);
  CHECK(ks_one_sample(ys, [](double v) { return std::clamp(v - 2.0, 0.0, 1.0); }).p_value > 0.01);
}

TEST_CASE("miss rate conditioned on a miss: draws are independent") {
  auto r = testing::rng(3);
  const auto p = normal_law(0.0, 1.0), q = normal_law(1.0, 1.0);
  std::vector<double> xs, ys;
  while (xs.size() < 20000) {
    const auto d = maximal_coupling_sample(p, q, r);
    if (d.hit) continue;
    xs.push_back(d.x[0]);
    ys.push_back(d.y[0]);
  }
  // On a miss x comes from (p - q)+, which lives left of 1/2, and y from (q - p)+ on the right.
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(xs[i] < 0.5 + 1e-12);
    CHECK(ys[i] > 0.5 - 1e-12);
  }
  double mx = 0, my = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= double(xs.size()), my /= double(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 3.0 / std::sqrt(double(xs.size())));
}

TEST_CASE("tv_quadrature") {
  const auto p = normal_law(0.0, 1.0), q = normal_law(1.0, 1.0);
  const QuadratureGrid grid{Vector::Constant(1, -12.0), Vector::Constant(1, 13.0), {25000}};
  CHECK(tv_quadrature(p.density, p.density, grid) == doctest::Approx(0.0));
  CHECK(std::abs(tv_quadrature(p.density, q.density, grid) - kTvShiftedNormal) < 1e-4);

  const auto u0 = SampledLaw::uniform_box(Vector::Zero(1), Vector::Ones(1));
  const auto u2 = SampledLaw::uniform_box(Vector::Constant(1, 2.0), Vector::Constant(1, 3.0));
  const QuadratureGrid box{Vector::Constant(1, -1.0), Vector::Constant(1, 4.0), {5000}};
  CHECK(tv_quadrature(u0.density, u2.density, box) == doctest::Approx(1.0).epsilon(1e-9));

  const auto p2 = SampledLaw::from_jump_law(JumpLaw::gaussian(2, 1.0));
  const auto q2 = SampledLaw::pushforward(JumpLaw::gaussian(2, 1.0), Matrix::Identity(2, 2), Vector::Ones(2));
  const QuadratureGrid plane{Vector::Constant(2, -9.0), Vector::Constant(2, 10.0), {800, 800}};
  CHECK(std::abs(tv_quadrature(p2.density, q2.density, plane) - 0.5204998778130467) < 1e-4);

  const QuadratureGrid narrow{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), {1000}};
  CHECK_THROWS_AS(tv_quadrature(p.density, q.density, narrow), ValidationError);
}

TEST_CASE("shoot_match closed cases") {
  const auto spec = nonlinear_2d();
  const Vector z = (Vector(2) << 0.2, -0.1).finished();
  const std::vector<double> s{0.6, 0.9};
  const std::vector<Vector> xi{Vector::Constant(1, 0.4), Vector::Constant(1, -0.2)};
  const auto same = shoot_match(spec, z, z, s, xi, {});
  REQUIRE(same.xi);
  CHECK(same.residual == 0.0);
  CHECK((*same.xi)[0] == xi[0]);
  CHECK((*same.xi)[1] == xi[1]);

  SystemSpec zero;
  zero.f = VectorField::zero(2);
  zero.B = Matrix::Identity(2, 2);
  zero.law = JumpLaw::gaussian(2, 1.0);
  const Vector zp = (Vector(2) << -0.5, 0.3).finished();
  const std::vector<double> s1{0.5};
  const std::vector<Vector> xi1{(Vector(2) << 1.0, 2.0).finished()};
  const auto affine = shoot_match(zero, z, zp, s1, xi1, {});
  REQUIRE(affine.xi);
  CHECK(affine.iterations <= 1);
  CHECK(((*affine.xi)[0] - (xi1[0] + (z - zp))).norm() < 1e-12);
}

TEST_CASE("shoot_match converges on the nonlinear gallery inside the ball") {
  const auto spec = nonlinear_2d();
  auto r = testing::rng(4);
  const std::vector<double> s{1.0, 1.0};
  const double radius = 0.5;
  int converged = 0;
  const int trials = 100;
  for (int i = 0; i < trials; ++i) {
    Vector z = testing::random_vector(2, r), zp = testing::random_vector(2, r);
    z *= radius * r.uniform() / z.norm();
    zp *= radius * r.uniform() / zp.norm();
    const std::vector<Vector> xi{testing::random_vector(1, r), testing::random_vector(1, r)};
    const auto res = shoot_match(spec, z, zp, s, xi, {});
    if (res.xi) {
      ++converged;
      CHECK(res.residual <= 1e-8);
      CHECK(res.iterations <= 20);
      CHECK((f_block(spec, zp, s, *res.xi) - f_block(spec, z, s, xi)).norm() <= 1e-8);
    }
  }
  CHECK(converged == trials);
}

TEST_CASE("block_couple branches") {
  const auto spec = cubic_1d();
  const auto policy = exact_policy(1, 1.0);
  auto r = testing::rng(5);
  const std::vector<double> s{0.7};
  const Vector a = Vector::Constant(1, 0.3);
  for (int i = 0; i < 200; ++i) {
    const auto out = block_couple(spec, policy, a, a, s, r);
    CHECK(out.branch == Branch::Synchronous);
    CHECK(out.a.back() == out.b.back());
  }
  const Vector far = Vector::Constant(1, 5.0);
  for (int i = 0; i < 200; ++i) {
    const auto out = block_couple(spec, policy, a, far, s, r);
    CHECK(out.branch == Branch::Independent);
    CHECK_FALSE(out.hit);
    CHECK(out.a.back() != out.b.back());
  }
}

TEST_CASE("exact-density hit rate is one minus the pushforward distance") {
  const auto spec = cubic_1d();
  const auto policy = exact_policy(1, 1.0);
  const Vector z = Vector::Constant(1, 0.8), zp = Vector::Constant(1, -0.5);
  const double t = 0.6;
  const auto pa = SampledLaw::pushforward(spec.law, spec.B, flow(spec.f, z, t));
  const auto pb = SampledLaw::pushforward(spec.law, spec.B, flow(spec.f, zp, t));
  const double tv = tv_quadrature(pa.density, pb.density, {Vector::Constant(1, -12.0), Vector::Constant(1, 12.0), {24000}});
  auto r = testing::rng(6);
  const std::vector<double> s{t};
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += block_couple(spec, policy, z, zp, s, r).hit ? 1 : 0;
  const double p = 1.0 - tv;
  CHECK(std::abs(double(hits) / n - p) < 3.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST_CASE("run_coupling from equal states coalesces immediately") {
  const auto spec = cubic_1d();
  auto r = testing::rng(7);
  const auto rec = run_coupling(spec, exact_policy(1, 1.0), Vector::Ones(1), Vector::Ones(1), 5.0, r);
  CHECK(rec.K == 0);
  CHECK(rec.T == 0.0);
  CHECK(rec.tau_K == 0.0);
}

TEST_CASE("coupling records are ordered and components agree after coalescence") {
  const auto spec = cubic_1d();
  const auto policy = exact_policy(1, 1.0);
  const std::vector<double> observe{0.0, 1.0, 2.0, 4.0, 8.0, 12.0};
  const auto recs = run_couplings(spec, policy, Vector::Constant(1, 2.0), Vector::Constant(1, -2.0), 12.0, 500, 3, 1,
                                  observe);
  int coalesced = 0;
  for (const auto& rec : recs) {
    CHECK(rec.ordered());
    REQUIRE(rec.observed_a.size() == observe.size());
    if (!rec.coalesced()) continue;
    ++coalesced;
    CHECK(rec.K % policy.m == 0);
    for (std::size_t i = 0; i < observe.size(); ++i)
      if (observe[i] >= rec.T) CHECK(rec.observed_a[i] == rec.observed_b[i]);
  }
  CHECK(coalesced > 450);
}

TEST_CASE("coupling runs do not depend on the worker count") {
  const auto spec = nonlinear_2d();
  CouplingPolicy policy;
  policy.x_hat = Vector::Zero(2);
  policy.r = 0.5;
  policy.m = 2;
  policy.mode = HitMode::Shooting;
  policy.R = 3.0;
  const auto a = run_couplings(spec, policy, Vector::Ones(2), -Vector::Ones(2), 20.0, 64, 11, 1);
  const auto b = run_couplings(spec, policy, Vector::Ones(2), -Vector::Ones(2), 20.0, 64, 11, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].K == b[i].K);
    CHECK(a[i].T == b[i].T);
    CHECK(a[i].branches == b[i].branches);
  }
}

TEST_CASE("block tail decays geometrically") {
  const auto spec = cubic_1d();
  const auto recs = run_couplings(spec, exact_policy(1, 1.0), Vector::Constant(1, 2.0), Vector::Constant(1, -2.0),
                                  30.0, 4000, 5, 1);
  const auto tail = block_tail_curve(recs, 1, 20);
  for (std::size_t i = 1; i < tail.size(); ++i) CHECK(tail[i].survival <= tail[i - 1].survival);
  const auto rep = mixing_fit(to_curve(tail));
  CHECK(rep.mixing);
  CHECK(rep.r2 > 0.9);
}

TEST_CASE("coupled components keep the law of the plain chain") {
  const auto spec = cubic_1d();
  for (auto mode : {HitMode::ExactDensity, HitMode::Independent}) {
    auto policy = exact_policy(1, 1.0);
    policy.mode = mode;
    auto rc = testing::rng(8), rp = testing::rng(9);
    std::vector<double> ca, cb, pa, pb;
    const Vector z = Vector::Constant(1, 0.4), zp = Vector::Constant(1, -0.3);
    for (int i = 0; i < 5000; ++i) {
      Vector a = z, b = zp;
      for (int k = 0; k < 5; ++k) {
        const std::vector<double> s{rc.exponential(spec.rate)};
        const auto out = block_couple(spec, policy, a, b, s, rc);
        a = out.a.back();
        b = out.b.back();
      }
      ca.push_back(a[0]);
      cb.push_back(b[0]);
      pa.push_back(embedded_chain(spec, z, 5, rp).back()[0]);
      pb.push_back(embedded_chain(spec, zp, 5, rp).back()[0]);
    }
    CHECK(ks_two_sample(ca, pa).p_value > 0.005);
    CHECK(ks_two_sample(cb, pb).p_value > 0.005);
  }
}

TEST_CASE("shooting keeps the one-block law of both components") {
  const auto spec = nonlinear_2d();
  CouplingPolicy policy;
  policy.x_hat = Vector::Zero(2);
  policy.r = 1.0;
  policy.m = 2;
  policy.mode = HitMode::Shooting;
  auto rc = testing::rng(14), rp = testing::rng(15);
  const Vector z = (Vector(2) << 0.3, 0.2).finished(), zp = (Vector(2) << -0.2, 0.1).finished();
  std::vector<std::vector<double>> coupled(4), plain(4);
  int hits = 0;
  for (int i = 0; i < 1500; ++i) {
    const std::vector<double> s{rc.exponential(spec.rate), rc.exponential(spec.rate)};
    const auto out = block_couple(spec, policy, z, zp, s, rc);
    hits += out.hit ? 1 : 0;
    const Vector pa = embedded_chain(spec, z, 2, rp).back(), pb = embedded_chain(spec, zp, 2, rp).back();
    for (int j = 0; j < 2; ++j) {
      coupled[std::size_t(j)].push_back(out.a.back()[j]);
      coupled[std::size_t(2 + j)].push_back(out.b.back()[j]);
      plain[std::size_t(j)].push_back(pa[j]);
      plain[std::size_t(2 + j)].push_back(pb[j]);
    }
  }
  CHECK(hits > 400);
  for (std::size_t c = 0; c < 4; ++c) CHECK(ks_two_sample(coupled[c], plain[c]).p_value > 0.001);
}
