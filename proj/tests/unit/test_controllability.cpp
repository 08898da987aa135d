#include <doctest.h>

#include <cmath>

#include "jumpflow/controllability.hpp"
#include "jumpflow/galerkin.hpp"
#include "jumpflow/network.hpp"
#include "support.hpp"

using namespace jumpflow;

namespace {

// Independent rank of [B, AB, ..., A^{d-1}B] by full-pivot LU.
int brute_kalman_rank(const Matrix& a, const Matrix& b) {
  const auto d = a.rows();
  Matrix k(d, d * b.cols());
  Matrix p = b;
  for (Eigen::Index i = 0; i < d; ++i) {
    k.middleCols(i * b.cols(), b.cols()) = p;
    p = a * p;
  }
  Eigen::FullPivLU<Matrix> lu(k);
  lu.setThreshold(1e-10);
  return int(lu.rank());
}

SystemSpec linear_spec(const Matrix& a, const Matrix& b) {
  SystemSpec s;
  s.f = VectorField::linear(a);
  s.B = b;
  s.law = JumpLaw::gaussian(int(b.cols()), 1.0);
  return s;
}

}  // namespace

TEST_CASE("kalman_rank examples") {
  Matrix a(2, 2);
  a << 0.0, 1.0, -1.0, 0.0;
  const Matrix b = (Matrix(2, 1) << 0.0, 1.0).finished();
  const auto ok = kalman_rank(a, b);
  CHECK(ok.pass);
  CHECK(ok.dimension_reached == 2);
  const auto none = kalman_rank(a, Matrix::Zero(2, 1));
  CHECK_FALSE(none.pass);
  CHECK(none.dimension_reached == 0);

  const auto chain = chain_network(3, {0, 2});
  const Matrix w = chain.omega.transpose() * chain.omega;
  const auto cert = kalman_rank(w, chain.injection());
  CHECK(cert.pass);
  CHECK(cert.dimension_reached == brute_kalman_rank(w, chain.injection()));
}

TEST_CASE("lie_bracket examples") {
  const Vector b = (Vector(2) << 1.0, -2.0).finished();
  const Vector c = (Vector(2) << 0.5, 3.0).finished();
  const Vector x = (Vector(2) << 0.3, 0.7).finished();
  CHECK(lie_bracket(VectorField::constant(b), VectorField::constant(c), x).norm() == 0.0);
  Matrix a(2, 2);
  a << 1.0, 2.0, -1.0, 4.0;
  CHECK((lie_bracket(VectorField::constant(b), VectorField::linear(a), x) - a * b).norm() < 1e-13);

  auto cube = [](auto u, auto out) { out[0] = -(u[0] * u[0] * u[0]); };
  const auto f = VectorField::generic(1, cube, {}, 3);
  const auto one = VectorField::constant(Vector::Ones(1));
  const auto triple = lie_bracket_field(one, lie_bracket_field(one, lie_bracket_field(one, f)));
  for (double u : {-2.0, 0.0, 0.4, 3.0}) CHECK(triple(Vector::Constant(1, u))[0] == doctest::Approx(-6.0));
  CHECK(lie_bracket_field(one, f)(Vector::Constant(1, 2.0))[0] == doctest::Approx(-12.0));
}

TEST_CASE("tower on a linear field reproduces the Kalman verdict") {
  auto r = testing::rng();
  Matrix a(3, 3);
  a << 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, -2.0, -0.5;
  const Matrix good = (Matrix(3, 1) << 0.0, 0.0, 1.0).finished();
  Matrix diag = Matrix::Zero(3, 3);
  diag.diagonal() << -1.0, -2.0, -3.0;
  const Matrix bad = (Matrix(3, 1) << 1.0, 0.0, 0.0).finished();
  for (int i = 0; i < 10; ++i) {
    const Vector x = testing::random_vector(3, r, 2.0);
    const auto k = kalman_rank(a, good);
    const auto t = hormander_tower(VectorField::linear(a), good, x);
    CHECK(k.pass);
    CHECK(t.pass);
    CHECK(t.dimension_reached == k.dimension_reached);
    const auto k2 = kalman_rank(diag, bad);
    const auto t2 = hormander_tower(VectorField::linear(diag), bad, x);
    CHECK_FALSE(k2.pass);
    CHECK(t2.dimension_reached == k2.dimension_reached);
  }
}

TEST_CASE("tower without drift stays at the span of B") {
  const Matrix b = (Matrix(2, 1) << 1.0, 1.0).finished();
  const auto t = hormander_tower(VectorField::zero(2), b, Vector::Ones(2));
  CHECK_FALSE(t.pass);
  CHECK(t.dimension_reached == 1);
}

TEST_CASE("Galerkin tower spans the truncation within three generations") {
  GalerkinSystem sys;
  const GalerkinModel model(sys);
  auto r = testing::rng(1);
  for (int i = 0; i < 5; ++i) {
    const Vector x = testing::random_vector(model.dim(), r, 1.0 + i);
    const auto t = hormander_tower(model.field(), model.embedding(), x);
    CHECK(t.pass);
    CHECK(t.dimension_reached == 5);
    CHECK(t.generations_used <= 3);
  }
}

TEST_CASE("p-fold brackets of constant fields are scaled projected products") {
  GalerkinSystem sys;
  const GalerkinModel model(sys);
  const auto f = model.field();
  const int d = model.dim();
  auto r = testing::rng(2);
  const Vector x = testing::random_vector(d, r);
  const double h = 1e-2;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      for (int k = j; k < d; ++k) {
        const Vector ei = Vector::Unit(d, i), ej = Vector::Unit(d, j), ek = Vector::Unit(d, k);
        const Vector expect = -6.0 * model.product({ei, ej, ek});
        const auto w = lie_bracket_field(VectorField::constant(ei),
                                         lie_bracket_field(VectorField::constant(ej),
                                                           lie_bracket_field(VectorField::constant(ek), f)));
        CHECK((w(x) - expect).norm() < 1e-8);
        // Mixed third central difference; exact up to rounding for a cubic field.
        Vector fd = Vector::Zero(d);
        for (int s = 0; s < 8; ++s) {
          const double a = (s & 1) ? 1.0 : -1.0, b = (s & 2) ? 1.0 : -1.0, c = (s & 4) ? 1.0 : -1.0;
          fd += a * b * c * f(x + h * (a * ei + b * ej + c * ek));
        }
        fd /= 8.0 * h * h * h;
        CHECK((fd - expect).norm() < 1e-4);
      }
}

TEST_CASE("solid_cert examples") {
  auto r = testing::rng(3);
  const std::vector<double> s1{1.0};
  const auto ident = solid_cert(linear_spec(Matrix::Zero(2, 2), Matrix::Identity(2, 2)), Vector::Zero(2), s1, 8, r);
  CHECK(ident.pass);
  CHECK(ident.verdict() == "pass");

  const Matrix e1 = (Matrix(2, 1) << 1.0, 0.0).finished();
  const std::vector<double> s3{0.5, 1.0, 2.0};
  const auto stuck = solid_cert(linear_spec(Matrix::Zero(2, 2), e1), Vector::Zero(2), s3, 16, r);
  CHECK_FALSE(stuck.pass);
  CHECK(stuck.dimension_reached == 1);
  CHECK(stuck.verdict() == "inconclusive");

  Matrix a(2, 2);
  a << 0.0, 1.0, -1.0, -1.0;
  const Matrix e2 = (Matrix(2, 1) << 0.0, 1.0).finished();
  const std::vector<double> s2{0.7, 0.9};
  const auto osc = solid_cert(linear_spec(a, e2), Vector::Ones(2), s2, 4, r);
  CHECK(osc.pass);
  CHECK(brute_kalman_rank(a, e2) == 2);
}

TEST_CASE("verdicts are invariant under scaling of B") {
  Matrix a(2, 2);
  a << 0.0, 1.0, -1.0, -1.0;
  const Matrix e2 = (Matrix(2, 1) << 0.0, 1.0).finished();
  Matrix diag = Matrix::Zero(2, 2);
  diag.diagonal() << -1.0, -2.0;
  const Matrix e1 = (Matrix(2, 1) << 1.0, 0.0).finished();
  const std::vector<double> s2{0.7, 0.9};
  for (double c : {1e-3, 1e-1, 1.0, 1e1, 1e3}) {
    auto r = testing::rng(4);
    CHECK(kalman_rank(a, c * e2).pass);
    CHECK_FALSE(kalman_rank(diag, c * e1).pass);
    CHECK(hormander_tower(VectorField::linear(a), c * e2, Vector::Ones(2)).pass);
    CHECK_FALSE(hormander_tower(VectorField::linear(diag), c * e1, Vector::Ones(2)).pass);
    CHECK(solid_cert(linear_spec(a, c * e2), Vector::Ones(2), s2, 4, r).pass);
    CHECK_FALSE(solid_cert(linear_spec(diag, c * e1), Vector::Ones(2), s2, 4, r).pass);
  }
}
