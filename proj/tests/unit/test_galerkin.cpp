#include <doctest.h>

#include <cmath>
#include <complex>
#include <map>

#include "jumpflow/galerkin.hpp"
#include "support.hpp"

using namespace jumpflow;

namespace {

using Spectrum = std::map<int, std::complex<double>>;

// Complex Fourier coefficients of a one-dimensional state.
Spectrum to_spectrum(const GalerkinModel& model, const Vector& u) {
  Spectrum s;
  const auto& modes = model.modes();
  for (int i = 0; i < model.dim(); ++i) {
    const int k = modes[std::size_t(i)].k[0];
    if (k == 0) {
      s[0] += u[i];
    } else if (modes[std::size_t(i)].sine) {  // sin kx = (e^{ikx} - e^{-ikx}) / 2i
      s[k] += u[i] / std::complex<double>(0.0, 2.0);
      s[-k] -= u[i] / std::complex<double>(0.0, 2.0);
    } else {
      s[k] += u[i] / 2.0;
      s[-k] += u[i] / 2.0;
    }
  }
  return s;
}

Spectrum convolve(const Spectrum& a, const Spectrum& b) {
  Spectrum out;
  for (const auto& [ka, va] : a)
    for (const auto& [kb, vb] : b) out[ka + kb] += va * vb;
  return out;
}

Vector from_spectrum(const GalerkinModel& model, const Spectrum& s) {
  Vector u(model.dim());
  auto at = [&](int k) {
    const auto it = s.find(k);
    return it == s.end() ? std::complex<double>() : it->second;
  };
  for (int i = 0; i < model.dim(); ++i) {
    const auto& mode = model.modes()[std::size_t(i)];
    const int k = mode.k[0];
    if (k == 0)
      u[i] = at(0).real();
    else if (mode.sine)
      u[i] = -2.0 * at(k).imag();
    else
      u[i] = 2.0 * at(k).real();
  }
  return u;
}

GalerkinSystem system(int D, int N, int p = 3) {
  GalerkinSystem s;
  s.D = D;
  s.N = N;
  s.p = p;
  return s;
}

}  // namespace

TEST_CASE("basis layout") {
  const GalerkinModel one(system(1, 2));
  CHECK(one.dim() == 5);
  CHECK(one.control_dim() == 3);
  CHECK(one.embedding().rows() == 5);
  CHECK(one.embedding().cols() == 3);
  const GalerkinModel two(system(2, 2));
  CHECK(two.dim() == 13);  // 1 + 2 * #{k != 0 : |k|_1 <= 2} / 2
  CHECK(two.control_dim() == 5);
  CHECK(one.laplacian()[0] == 0.0);
  CHECK((one.trig({-1}, true) + one.trig({1}, true)).norm() == 0.0);
  CHECK(one.trig({3}, false).norm() == 0.0);
  CHECK_THROWS(GalerkinModel(system(1, 2, 4)));
}

TEST_CASE("field at the constant mode") {
  const GalerkinModel model(system(1, 2));
  const Vector f = model.field()(model.trig({0}, false));
  Vector expect = Vector::Zero(5);
  expect[0] = -1.0;
  CHECK((f - expect).norm() < 1e-12);
}

TEST_CASE("projection of cos^3") {
  const GalerkinModel n2(system(1, 2));
  const Vector c1 = n2.trig({1}, false);
  CHECK((n2.power(c1) - 0.75 * c1).norm() < 1e-12);
  const GalerkinModel n4(system(1, 4));
  const Vector expect = 0.75 * n4.trig({1}, false) + 0.25 * n4.trig({3}, false);
  CHECK((n4.power(n4.trig({1}, false)) - expect).norm() < 1e-12);
}

TEST_CASE("projection is idempotent") {
  auto r = testing::rng();
  for (int D : {1, 2}) {
    const GalerkinModel model(system(D, 3));
    const int points = int(std::pow(model.system().grid_points(), D));
    for (int i = 0; i < 5; ++i) {
      const Vector g = testing::random_vector(points, r);
      const Vector once = model.project(g);
      CHECK((model.project(model.to_grid(once)) - once).norm() < 1e-12 * (1.0 + once.norm()));
    }
  }
}

TEST_CASE("grid products are exact convolutions") {
  auto r = testing::rng(1);
  for (int N : {2, 3, 5}) {
    const GalerkinModel model(system(1, N));
    for (int trial = 0; trial < 5; ++trial) {
      const Vector a = testing::random_vector(model.dim(), r), b = testing::random_vector(model.dim(), r),
                   c = testing::random_vector(model.dim(), r);
      const Spectrum prod = convolve(convolve(to_spectrum(model, a), to_spectrum(model, b)), to_spectrum(model, c));
      CHECK((model.product({a, b, c}) - from_spectrum(model, prod)).norm() < 1e-10);
    }
  }
}

TEST_CASE("trigonometric identities behind the bracket tower") {
  for (int D : {1, 2}) {
    const int N = 3;
    const GalerkinModel model(system(D, N));
    std::vector<std::vector<int>> ls, ms;
    for (const auto& mode : model.modes()) {
      if (mode.sine) continue;
      int l1 = 0;
      for (int v : mode.k) l1 += std::abs(v);
      if (l1 <= 1) ls.push_back(mode.k);
      if (l1 >= 1 && l1 <= N - 1) ms.push_back(mode.k);
    }
    const Vector one = model.trig(std::vector<int>(std::size_t(D), 0), false);
    for (const auto& l : ls)
      for (const auto& m : ms) {
        std::vector<int> plus(m), minus(m);
        for (int i = 0; i < D; ++i) plus[std::size_t(i)] += l[std::size_t(i)], minus[std::size_t(i)] -= l[std::size_t(i)];
        const Vector cl = model.trig(l, false), sl = model.trig(l, true), cm = model.trig(m, false),
                     sm = model.trig(m, true);
        // c_{m +- l} = c_l c_m -+ s_l s_m, with the remaining factors of the p-fold product equal to 1.
        CHECK((model.trig(plus, false) - (model.product({one, cl, cm}) - model.product({one, sl, sm}))).norm() < 1e-10);
        CHECK((model.trig(minus, false) - (model.product({one, cl, cm}) + model.product({one, sl, sm}))).norm() < 1e-10);
        // s_{l +- m} = s_l c_m +- c_l s_m.
        std::vector<int> lm(l);
        for (int i = 0; i < D; ++i) lm[std::size_t(i)] -= m[std::size_t(i)];
        CHECK((model.trig(plus, true) - (model.product({one, sl, cm}) + model.product({one, cl, sm}))).norm() < 1e-10);
        CHECK((model.trig(lm, true) - (model.product({one, sl, cm}) - model.product({one, cl, sm}))).norm() < 1e-10);
      }
  }
}

TEST_CASE("subspace towers") {
  const auto t2 = subspace_tower(GalerkinModel(system(1, 2)));
  REQUIRE(t2.full_at);
  CHECK(*t2.full_at == 2);
  CHECK(t2.dims().front() == 3);
  CHECK(t2.dims().back() == 5);

  const auto t4 = subspace_tower(GalerkinModel(system(1, 4)));
  REQUIRE(t4.full_at);
  CHECK(*t4.full_at == 3);
  const auto dims = t4.dims();
  for (std::size_t i = 1; i < dims.size(); ++i) CHECK(dims[i] >= dims[i - 1]);
  CHECK(dims.back() == 9);

  const auto t2d = subspace_tower(GalerkinModel(system(2, 2)));
  CHECK(t2d.dims().front() == 5);
  REQUIRE(t2d.full_at);
}

TEST_CASE("Galerkin field is dissipative with alpha = nu") {
  GalerkinSystem sys = system(1, 2);
  sys.nu = 0.7;
  const GalerkinModel model(sys);
  const auto f = model.field();
  auto r = testing::rng(2);
  auto ball = [&](double radius, int n) {
    std::vector<Vector> out;
    for (int i = 0; i < n; ++i) {
      Vector v = testing::random_vector(model.dim(), r);
      out.push_back(v * (radius * std::pow(r.uniform(), 1.0 / model.dim()) / v.norm()));
    }
    return out;
  };
  const auto small = ball(10.0, 1000);
  const double beta = fit_dissipativity_beta(f, sys.nu, small);
  CHECK(std::isfinite(beta));
  CHECK(check_dissipativity(f, sys.nu, beta, small).passed());
  // The quartic term dominates far out, so the constant does not grow with the radius.
  const double beta_far = fit_dissipativity_beta(f, sys.nu, ball(40.0, 1000));
  CHECK(beta_far <= beta * 1.5 + 1.0);
}

TEST_CASE("scaling control endpoint") {
  const GalerkinModel model(system(1, 2));
  auto r = testing::rng(3);
  const Vector u0 = testing::random_vector(5, r, 0.5);
  const Vector zero = Vector::Zero(5);
  CHECK((scaling_control_endpoint(model, u0, zero, zero, 0.1) - flow(model.field(), u0, 0.1)).norm() < 1e-9);

  GalerkinSystem lin = system(1, 2);
  lin.a = 0.0;
  lin.nu = 0.1;
  const GalerkinModel linear(lin);
  const Vector psi = testing::random_vector(5, r);
  double prev = 1e300;
  for (double delta : {1e-1, 1e-2, 1e-3}) {
    const double err = (scaling_control_endpoint(linear, u0, zero, psi, delta) - (u0 + psi)).norm();
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-3);

  const Vector phi = model.embedding() * testing::random_vector(3, r);
  const Vector limit = scaling_control_limit(model, u0, phi, psi);
  CHECK((limit - (u0 + psi - model.power(phi))).norm() < 1e-12);
  std::vector<double> ld, le;
  for (int j = 4; j <= 10; ++j) {
    const double delta = std::ldexp(1.0, -j);
    ld.push_back(std::log(delta));
    le.push_back(std::log((scaling_control_endpoint(model, u0, phi, psi, delta) - limit).squaredNorm()));
  }
  const double mx = std::accumulate(ld.begin(), ld.end(), 0.0) / double(ld.size());
  const double my = std::accumulate(le.begin(), le.end(), 0.0) / double(le.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ld.size(); ++i) sxy += (ld[i] - mx) * (le[i] - my), sxx += (ld[i] - mx) * (ld[i] - mx);
  CHECK(sxy / sxx >= 1.0 / 3.0 - 0.1);
}

TEST_CASE("steering") {
  const GalerkinModel model(system(1, 2));
  auto r = testing::rng(4);
  const Vector u0 = testing::random_vector(5, r, 0.5);

  const auto stay = synthesize_steering(model, u0, u0, 1e-2, 20.0);
  CHECK(stay.converged);
  CHECK(stay.error == 0.0);
  CHECK(stay.control.horizon() == 0.0);

  const Vector shifted = u0 + model.embedding() * testing::random_vector(3, r);
  const auto base = synthesize_steering(model, u0, shifted, 1e-2, 20.0);
  CHECK(base.converged);
  CHECK(base.error < 1e-2);

  for (int i = 0; i < 3; ++i) {
    Vector target = testing::random_vector(5, r);
    target *= 2.0 * r.uniform() / target.norm();
    const auto res = synthesize_steering(model, u0, target, 1e-2, 20.0);
    CHECK(res.converged);
    CHECK(res.error < 1e-2);
    CHECK(res.control.horizon() <= 20.0);
    const Vector check = controlled_flow(model.field(), model.embedding(), u0, res.control);
    CHECK((check - target).norm() < 1e-2);
  }
}
