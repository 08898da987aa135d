#pragma once

// Two automatic-differentiation scalars used to obtain exact derivatives of
// vector fields written generically over their scalar type:
//
//  * Jet    - multivariate first-order-per-slot nilpotent numbers
//             (eps_i^2 = 0, eps_i eps_j != 0). The coefficient of
//             eps_1...eps_k in f(x + sum eps_i v_i) is D^k f(x)[v_1,...,v_k].
//             Used for Jacobians and iterated Lie brackets.
//  * Taylor - univariate truncated power series in t. The k-th coefficient of
//             f(x + t v) is D^k f(x)[v,...,v] / k!.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace jumpflow {

class Jet {
 public:
  Jet() : c_(1, 0.0) {}
  Jet(double v) : c_(1, v) {}  // NOLINT(google-explicit-constructor)

  /// value + eps_slot; the jet has room for slots 0..slot.
  static Jet seed(double value, unsigned slot);
  /// value + scale * eps_slot.
  static Jet seed(double value, unsigned slot, double scale);

  /// Number of infinitesimal slots carried.
  unsigned slots() const;
  double value() const { return c_[0]; }
  /// Coefficient of the monomial whose slot set is `mask`.
  double coeff(std::size_t mask) const { return mask < c_.size() ? c_[mask] : 0.0; }
  std::size_t size() const { return c_.size(); }
  void set_coeff(std::size_t mask, double v);

  /// Coefficient of eps_slot as a jet over the lower slots:
  /// for x = a + eps_slot b (a, b free of eps_slot) returns b.
  Jet derivative_part(unsigned slot) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o);
  Jet& operator*=(double s);
  Jet operator-() const;

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(Jet a, const Jet& b) { return a /= b; }
  friend Jet operator+(Jet a, double b) { a.c_[0] += b; return a; }
  friend Jet operator+(double b, Jet a) { a.c_[0] += b; return a; }
  friend Jet operator-(Jet a, double b) { a.c_[0] -= b; return a; }
  friend Jet operator-(double b, const Jet& a) { Jet r = -a; r.c_[0] += b; return r; }
  friend Jet operator*(Jet a, double b) { return a *= b; }
  friend Jet operator*(double b, Jet a) { return a *= b; }
  friend Jet operator/(Jet a, double b) { return a *= 1.0 / b; }
  friend Jet operator/(double b, const Jet& a) { return Jet(b) / a; }

  /// Apply a scalar function given its derivatives at value():
  /// derivs[j] = f^{(j)}(value()). Missing high orders are treated as zero.
  Jet compose(const std::vector<double>& derivs) const;

 private:
  void grow(std::size_t n) {
    if (c_.size() < n) c_.resize(n, 0.0);
  }
  std::vector<double> c_;
};

Jet sin(const Jet& x);
Jet cos(const Jet& x);
Jet exp(const Jet& x);
Jet abs(const Jet& x);
Jet pow(const Jet& x, int n);

class Taylor {
 public:
  Taylor() : c_(1, 0.0) {}
  Taylor(double v) : c_(1, v) {}  // NOLINT(google-explicit-constructor)
  /// value + t, truncated at degree `order`.
  static Taylor variable(double value, double slope, int order);

  int order() const { return static_cast<int>(c_.size()) - 1; }
  double value() const { return c_[0]; }
  double coeff(int k) const { return k < static_cast<int>(c_.size()) ? c_[k] : 0.0; }

  Taylor& operator+=(const Taylor& o);
  Taylor& operator-=(const Taylor& o);
  Taylor& operator*=(double s);
  Taylor operator-() const;

  friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
  friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
  friend Taylor operator*(const Taylor& a, const Taylor& b);
  friend Taylor operator/(const Taylor& a, const Taylor& b);
  friend Taylor operator+(Taylor a, double b) { a.c_[0] += b; return a; }
  friend Taylor operator+(double b, Taylor a) { a.c_[0] += b; return a; }
  friend Taylor operator-(Taylor a, double b) { a.c_[0] -= b; return a; }
  friend Taylor operator-(double b, const Taylor& a) { Taylor r = -a; r.c_[0] += b; return r; }
  friend Taylor operator*(Taylor a, double b) { return a *= b; }
  friend Taylor operator*(double b, Taylor a) { return a *= b; }
  friend Taylor operator/(Taylor a, double b) { return a *= 1.0 / b; }
  friend Taylor operator/(double b, const Taylor& a) { return Taylor(b) / a; }

  friend Taylor exp(const Taylor& x);
  friend Taylor sin(const Taylor& x);
  friend Taylor cos(const Taylor& x);

 private:
  std::vector<double> c_;
};

Taylor abs(const Taylor& x);
Taylor pow(const Taylor& x, int n);

/// Value of a scalar regardless of its type; lets generic code branch on it.
inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value(); }
inline double value_of(const Taylor& x) { return x.value(); }

}  // namespace jumpflow
