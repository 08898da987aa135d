#include <doctest.h>

#include <cmath>

#include "jumpflow/diagnostics.hpp"
#include "jumpflow/errors.hpp"
#include "support.hpp"

using namespace jumpflow;

namespace {

std::vector<Vector> normals(int n, double mean, Rng& r) {
  std::vector<Vector> out;
  for (int i = 0; i < n; ++i) out.push_back(Vector::Constant(1, mean + r.normal()));
  return out;
}

std::vector<CurvePoint> exponential_curve(double C, double c, double noise, Rng& r) {
  std::vector<CurvePoint> out;
  for (int i = 0; i <= 20; ++i) {
    const double t = 0.5 * i;
    const double v = C * std::exp(-c * t) * (1.0 + noise * r.normal());
    out.push_back({t, v, noise * v, false});
  }
  return out;
}

SystemSpec linear_1d() {
  SystemSpec s;
  s.f = VectorField::linear(-0.5 * Matrix::Identity(1, 1));
  s.B = Matrix::Identity(1, 1);
  s.rate = 1.0;
  s.law = JumpLaw::gaussian(1, 1.0);
  return s;
}

}  // namespace

TEST_CASE("histogram_tv examples") {
  auto r = testing::rng();
  const auto a = normals(100000, 0.0, r);
  const auto same = histogram_tv(a, a, 100, 1, 20);
  CHECK(same.estimate < 1e-12);

  const auto b = normals(100000, 1.0, r);
  const auto tv = histogram_tv(a, b, 100, 2);
  CHECK(std::abs(tv.estimate - 0.38292492254802624) < 0.01);
  CHECK(tv.std_error > 0.0);
  CHECK(tv.std_error < 0.01);
  CHECK(tv.bins.size() == 1);

  std::vector<Vector> u0, u2;
  for (int i = 0; i < 20000; ++i) {
    u0.push_back(Vector::Constant(1, r.uniform()));
    u2.push_back(Vector::Constant(1, 2.0 + r.uniform()));
  }
  CHECK(histogram_tv(u0, u2, 0, 3).estimate > 1.0 - 1e-3);

  // Freedman-Diaconis binning on a two-dimensional pair.
  std::vector<Vector> p, q;
  for (int i = 0; i < 50000; ++i) {
    p.push_back(testing::random_vector(2, r));
    q.push_back(testing::random_vector(2, r) + Vector::Ones(2));
  }
  const auto tv2 = histogram_tv(p, q, 0, 4, 20);
  CHECK(tv2.bins.size() == 2);
  CHECK(std::abs(tv2.estimate - 0.5204998778130467) < 0.03);
}

TEST_CASE("histogram_tv bootstrap does not depend on the worker count") {
  auto r = testing::rng(1);
  const auto a = normals(5000, 0.0, r), b = normals(5000, 0.5, r);
  const auto one = histogram_tv(a, b, 0, 9, 50, 1);
  const auto many = histogram_tv(a, b, 0, 9, 50, 3);
  CHECK(one.estimate == many.estimate);
  CHECK(one.std_error == many.std_error);
}

TEST_CASE("mixing_fit examples") {
  auto r = testing::rng(2);
  const auto exact = mixing_fit(exponential_curve(0.9, 0.7, 0.0, r));
  CHECK(exact.c == doctest::Approx(0.7));
  CHECK(exact.C == doctest::Approx(0.9));
  CHECK(exact.r2 == doctest::Approx(1.0));
  CHECK(exact.mixing);

  for (int trial = 0; trial < 20; ++trial) {
    const auto noisy = mixing_fit(exponential_curve(0.8, 0.7, 0.05, r));
    CHECK(noisy.c >= 0.6);
    CHECK(noisy.c <= 0.8);
  }

  std::vector<CurvePoint> flat;
  for (int i = 0; i < 10; ++i) flat.push_back({double(i), 0.4, 0.01, false});
  const auto constant = mixing_fit(flat);
  CHECK(std::abs(constant.c) < 1e-12);
  CHECK_FALSE(constant.mixing);

  std::vector<CurvePoint> censored = flat;
  for (auto& p : censored) p.censored = true;
  CHECK_THROWS_AS(mixing_fit(censored), NumericError);
  CHECK_THROWS_AS(mixing_fit(std::span<const CurvePoint>(flat).first(3)), ValidationError);
}

TEST_CASE("mixing_fit honours t_max and censoring") {
  auto r = testing::rng(3);
  auto curve = exponential_curve(1.0, 0.5, 0.0, r);
  for (std::size_t i = 15; i < curve.size(); ++i) curve[i].value = 0.9, curve[i].censored = true;
  const auto rep = mixing_fit(curve);
  CHECK(rep.c == doctest::Approx(0.5));
  CHECK(rep.points_used == 15);
  CHECK(rep.censoring_fraction == doctest::Approx(6.0 / 21.0));
  const auto cut = mixing_fit(curve, 3.0);
  CHECK(cut.points_used == 7);
  CHECK(cut.fit_t_max == 3.0);
}

TEST_CASE("mixing_fit recovers planted rates from survival data") {
  auto r = testing::rng(4);
  for (double c : {0.3, 0.8, 1.5}) {
    std::vector<double> times;
    for (int i = 0; i < 10000; ++i) times.push_back(r.exponential(c));
    std::vector<CurvePoint> curve;
    for (int i = 0; i <= 30; ++i) {
      const double t = (3.0 / c) * i / 30.0;
      double alive = 0;
      for (double s : times) alive += s > t ? 1 : 0;
      const double p = alive / 1e4;
      curve.push_back({t, p, std::sqrt(p * (1 - p) / 1e4), false});
    }
    const auto rep = mixing_fit(curve);
    CHECK(std::abs(rep.c - c) < 0.1 * c);
    CHECK(rep.r2 > 0.95);
  }
}

TEST_CASE("coalescence_quantile") {
  std::vector<CouplingRecord> recs(4);
  recs[0].K = 1, recs[0].T = 1.0;
  recs[1].K = 2, recs[1].T = 3.0;
  recs[2].K = 1, recs[2].T = 2.0;
  CHECK(coalescence_quantile(recs, 1.0) == 3.0);
  CHECK(coalescence_quantile(recs, 0.0) == 1.0);
  std::vector<CouplingRecord> none(3);
  CHECK(std::isinf(coalescence_quantile(none, 0.5)));
}

TEST_CASE("invariant measure of the linear gallery") {
  const auto spec = linear_1d();
  InvariantOptions opts;
  opts.samples = 40000;
  auto r1 = testing::rng(5), r2 = testing::rng(6);
  const auto a = invariant_estimate(spec, Vector::Constant(1, 2.0), opts, r1);
  const auto b = invariant_estimate(spec, Vector::Constant(1, -6.0), opts, r2);
  CHECK(std::abs(a.second_moment - 1.0) < 0.05);
  CHECK(std::abs(a.embedded_second_moment - 2.0) < 0.1);
  CHECK(std::abs(a.second_moment - b.second_moment) <
        3.0 * std::hypot(a.second_moment_se, b.second_moment_se));
  CHECK(std::abs(a.embedded_second_moment - b.embedded_second_moment) <
        3.0 * std::hypot(a.embedded_se, b.embedded_se));
  REQUIRE(a.histograms.size() == 1);
  double mass = 0.0;
  const auto& h = a.histograms[0];
  for (double v : h.density) mass += v * (h.hi - h.lo) / double(h.density.size());
  CHECK(mass == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("Kolmogorov-Smirnov tests are calibrated") {
  CHECK(kolmogorov_tail(0.0) == 1.0);
  CHECK(kolmogorov_tail(1.3580986393225507) == doctest::Approx(0.05).epsilon(1e-6));
  auto r = testing::rng(7);
  int one = 0, two = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> a, b;
    for (int i = 0; i < 500; ++i) a.push_back(r.normal()), b.push_back(r.normal());
    one += ks_one_sample(a, testing::phi_cdf).p_value < 0.05 ? 1 : 0;
    two += ks_two_sample(a, b).p_value < 0.05 ? 1 : 0;
  }
  const double se = std::sqrt(0.05 * 0.95 / trials);
  CHECK(std::abs(one / double(trials) - 0.05) < 4.0 * se);
  CHECK(std::abs(two / double(trials) - 0.05) < 4.0 * se);

  std::vector<double> shifted;
  for (int i = 0; i < 2000; ++i) shifted.push_back(r.normal() + 0.3);
  CHECK(ks_one_sample(shifted, testing::phi_cdf).p_value < 1e-6);
}
