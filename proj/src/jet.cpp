#include "jumpflow/jet.hpp"

#include <bit>
#include <cmath>

namespace jumpflow {

Jet Jet::seed(double value, unsigned slot) { return seed(value, slot, 1.0); }

Jet Jet::seed(double value, unsigned slot, double scale) {
  Jet j(value);
  j.grow(std::size_t{1} << (slot + 1));
  j.c_[std::size_t{1} << slot] = scale;
  return j;
}

unsigned Jet::slots() const {
  return static_cast<unsigned>(std::countr_zero(c_.size()));
}

void Jet::set_coeff(std::size_t mask, double v) {
  grow(std::bit_ceil(mask + 1));
  c_[mask] = v;
}

Jet Jet::derivative_part(unsigned slot) const {
  // `slot` must be the highest slot carried; brackets always differentiate
  // along the most recently seeded direction.
  const std::size_t bit = std::size_t{1} << slot;
  Jet r;
  if (c_.size() <= bit) return r;
  r.c_.assign(bit, 0.0);
  for (std::size_t m = 0; m < bit; ++m) r.c_[m] = c_[m | bit];
  return r;
}

Jet& Jet::operator+=(const Jet& o) {
  grow(o.c_.size());
  for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  grow(o.c_.size());
  for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

Jet Jet::operator-() const {
  Jet r = *this;
  for (double& v : r.c_) v = -v;
  return r;
}

Jet operator*(const Jet& a, const Jet& b) {
  if (a.c_.size() == 1) return b * a.c_[0];
  if (b.c_.size() == 1) return a * b.c_[0];
  const std::size_t n = std::max(a.c_.size(), b.c_.size());
  Jet r;
  r.c_.assign(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0.0;
    // Sum over submasks t of s: a[t] * b[s \ t].
    for (std::size_t t = s;; t = (t - 1) & s) {
      acc += a.coeff(t) * b.coeff(s ^ t);
      if (t == 0) break;
    }
    r.c_[s] = acc;
  }
  return r;
}

Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }

Jet& Jet::operator/=(const Jet& o) {
  const double v = o.value();
  // 1/(v + n) = sum_j (-1)^j n^j / v^{j+1}
  std::vector<double> d;
  double fact = 1.0;
  const unsigned k = o.slots();
  for (unsigned j = 0; j <= k; ++j) {
    if (j > 0) fact *= j;
    d.push_back(((j % 2) ? -1.0 : 1.0) * fact / std::pow(v, j + 1));
  }
  return *this *= o.compose(d);
}

Jet Jet::compose(const std::vector<double>& derivs) const {
  Jet nil = *this;
  nil.c_[0] = 0.0;
  Jet result(derivs.empty() ? 0.0 : derivs[0]);
  Jet power(1.0);
  double fact = 1.0;
  const unsigned k = slots();
  for (unsigned j = 1; j <= k && j < derivs.size(); ++j) {
    power = power * nil;
    fact *= j;
    if (derivs[j] != 0.0) result += power * (derivs[j] / fact);
  }
  return result;
}

Jet sin(const Jet& x) {
  const double s = std::sin(x.value()), c = std::cos(x.value());
  std::vector<double> d(x.slots() + 1);
  const double cyc[4] = {s, c, -s, -c};
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = cyc[j % 4];
  return x.compose(d);
}

Jet cos(const Jet& x) {
  const double s = std::sin(x.value()), c = std::cos(x.value());
  std::vector<double> d(x.slots() + 1);
  const double cyc[4] = {c, -s, -c, s};
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = cyc[j % 4];
  return x.compose(d);
}

Jet exp(const Jet& x) {
  return x.compose(std::vector<double>(x.slots() + 1, std::exp(x.value())));
}

Jet abs(const Jet& x) { return x.value() < 0.0 ? -x : x; }

Jet pow(const Jet& x, int n) {
  if (n < 0) return Jet(1.0) / pow(x, -n);
  Jet r(1.0), base = x;
  while (n > 0) {
    if (n & 1) r = r * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return r;
}

// ---------------------------------------------------------------------------

Taylor Taylor::variable(double value, double slope, int order) {
  Taylor t;
  t.c_.assign(static_cast<std::size_t>(order) + 1, 0.0);
  t.c_[0] = value;
  if (order >= 1) t.c_[1] = slope;
  return t;
}

Taylor& Taylor::operator+=(const Taylor& o) {
  if (c_.size() < o.c_.size()) c_.resize(o.c_.size(), 0.0);
  for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Taylor& Taylor::operator-=(const Taylor& o) {
  if (c_.size() < o.c_.size()) c_.resize(o.c_.size(), 0.0);
  for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Taylor& Taylor::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

Taylor Taylor::operator-() const {
  Taylor r = *this;
  for (double& v : r.c_) v = -v;
  return r;
}

Taylor operator*(const Taylor& a, const Taylor& b) {
  const std::size_t n = std::max(a.c_.size(), b.c_.size());
  Taylor r;
  r.c_.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= k; ++j) acc += a.coeff(int(j)) * b.coeff(int(k - j));
    r.c_[k] = acc;
  }
  return r;
}

Taylor operator/(const Taylor& a, const Taylor& b) {
  const std::size_t n = std::max(a.c_.size(), b.c_.size());
  Taylor q;
  q.c_.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = a.coeff(int(k));
    for (std::size_t j = 1; j <= k; ++j) acc -= b.coeff(int(j)) * q.c_[k - j];
    q.c_[k] = acc / b.c_[0];
  }
  return q;
}

Taylor exp(const Taylor& x) {
  const std::size_t n = x.c_.size();
  Taylor r;
  r.c_.assign(n, 0.0);
  r.c_[0] = std::exp(x.c_[0]);
  for (std::size_t k = 1; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 1; j <= k; ++j) acc += double(j) * x.c_[j] * r.c_[k - j];
    r.c_[k] = acc / double(k);
  }
  return r;
}

namespace {
void sincos_series(const std::vector<double>& a, std::vector<double>& s, std::vector<double>& c) {
  const std::size_t n = a.size();
  s.assign(n, 0.0);
  c.assign(n, 0.0);
  s[0] = std::sin(a[0]);
  c[0] = std::cos(a[0]);
  for (std::size_t k = 1; k < n; ++k) {
    double as = 0.0, ac = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
      as += double(j) * a[j] * c[k - j];
      ac += double(j) * a[j] * s[k - j];
    }
    s[k] = as / double(k);
    c[k] = -ac / double(k);
  }
}
}  // namespace

Taylor sin(const Taylor& x) {
  Taylor s, c;
  sincos_series(x.c_, s.c_, c.c_);
  return s;
}

Taylor cos(const Taylor& x) {
  Taylor s, c;
  sincos_series(x.c_, s.c_, c.c_);
  return c;
}

Taylor abs(const Taylor& x) { return x.value() < 0.0 ? -x : x; }

Taylor pow(const Taylor& x, int n) {
  if (n < 0) return Taylor(1.0) / pow(x, -n);
  Taylor r(1.0);
  for (int i = 0; i < n; ++i) r = r * x;
  return r;
}

}  // namespace jumpflow
