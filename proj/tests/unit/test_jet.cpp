#include <doctest.h>

#include <cmath>

#include "jumpflow/jet.hpp"

using namespace jumpflow;

TEST_CASE("jet products carry mixed partials") {
  const Jet x = Jet::seed(2.0, 0);
  const Jet y = Jet::seed(3.0, 1);
  const Jet f = x * x * y;  // d/dx = 2xy, d/dy = x^2, d2/dxdy = 2x
  CHECK(f.value() == doctest::Approx(12.0));
  CHECK(f.coeff(1) == doctest::Approx(12.0));
  CHECK(f.coeff(2) == doctest::Approx(4.0));
  CHECK(f.coeff(3) == doctest::Approx(4.0));
}

TEST_CASE("third directional derivative of u^3 through three slots") {
  Jet u = Jet::seed(0.7, 0) + Jet::seed(0.0, 1) + Jet::seed(0.0, 2);
  const Jet c = u * u * u;
  CHECK(c.coeff(7) == doctest::Approx(6.0));
  CHECK(c.coeff(3) == doctest::Approx(6.0 * 0.7));
}

TEST_CASE("transcendental jets match calculus") {
  const Jet x = Jet::seed(0.4, 0);
  CHECK(sin(x).coeff(1) == doctest::Approx(std::cos(0.4)));
  CHECK(cos(x).coeff(1) == doctest::Approx(-std::sin(0.4)));
  CHECK(exp(x).coeff(1) == doctest::Approx(std::exp(0.4)));
  CHECK((1.0 / x).coeff(1) == doctest::Approx(-1.0 / 0.16));
}

TEST_CASE("derivative_part strips the top slot") {
  const Jet x = Jet::seed(1.5, 0);
  const Jet y = Jet::seed(0.0, 1);
  const Jet f = x * x + x * y * 3.0;  // coefficient of eps_1 is 3x
  const Jet d = f.derivative_part(1);
  CHECK(d.value() == doctest::Approx(4.5));
  CHECK(d.coeff(1) == doctest::Approx(3.0));
}

TEST_CASE("taylor coefficients are scaled derivatives") {
  const Taylor t = Taylor::variable(0.3, 1.0, 5);
  const Taylor e = exp(t);
  double fact = 1.0;
  for (int k = 0; k <= 5; ++k) {
    if (k > 0) fact *= k;
    CHECK(e.coeff(k) * fact == doctest::Approx(std::exp(0.3)));
  }
  const Taylor s = sin(t);
  CHECK(s.coeff(3) * 6.0 == doctest::Approx(-std::cos(0.3)));
  const Taylor q = 1.0 / (1.0 - t);  // sum 1/(0.7)^{k+1} t^k
  CHECK(q.coeff(4) == doctest::Approx(std::pow(0.7, -5)));
}
