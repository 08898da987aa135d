#pragma once

// Oscillator networks driven through a subset of their masses: Langevin and
// semi-Markov (auxiliary bath variable) forms, chain presets and checks of
// the structural hypotheses (K), (G) and (pH).

#include <string>
#include <vector>

#include "jumpflow/controllability.hpp"
#include "jumpflow/pdmp.hpp"

namespace jumpflow {

/// Scalar potential U on R^I, written once for double, Jet and Taylor scalars.
struct Potential {
  enum class Kind { Zero, CosSum, Bump };
  Kind kind = Kind::Zero;
  double amplitude = 1.0;
  double width = 1.0;  // bump support radius

  static Potential zero() { return {}; }
  /// U(q) = amplitude * sum_i cos(q_i).
  static Potential cos_sum(double amplitude) { return {Kind::CosSum, amplitude, 1.0}; }
  /// U(q) = amplitude * exp(-1 / (1 - |q|^2 / width^2)) inside the ball, 0 outside.
  static Potential bump(double amplitude, double width) { return {Kind::Bump, amplitude, width}; }

  template <class S>
  S value(std::span<const S> q) const;
  template <class S>
  void gradient(std::span<const S> q, std::span<S> out) const;
  /// sup over unit v of |D^k U(q)[v, ..., v]|, estimated over axes and `directions` random unit vectors.
  double derivative_norm(const Vector& q, int k, int directions = 64) const;
};

std::string to_string(Potential::Kind k);

struct NetworkSpec {
  int size = 1;              // |I|
  std::vector<int> driven;   // J, 0-based
  Matrix omega;              // |I| x |I|, nonsingular
  Vector gamma;              // per driven mass
  Vector lambda;             // per driven mass (semi-Markov coupling)
  Potential potential;

  void validate() const;
  /// sum_j iota_j iota_j^*: |I| x |J| selection matrix.
  Matrix injection() const;
  double omega_condition() const;
};

/// Chain of L unit masses, each pinned, neighbours coupled: omega = sqrt(I + path Laplacian).
NetworkSpec chain_network(int L, std::vector<int> driven, double gamma = 1.0, double lambda = 0.1);

/// Symmetric positive square root.
Matrix sym_sqrt(const Matrix& k);

/// Drift matrix of the Langevin form in (p, omega q) coordinates.
Matrix langevin_matrix(const NetworkSpec& nw);
/// tilde omega with tilde omega^* tilde omega = omega^* omega - sum lambda_j^2 iota_j iota_j^*.
Matrix omega_tilde(const NetworkSpec& nw);
/// Drift matrix of the semi-Markov form in (r, p, tilde omega q) coordinates.
Matrix semimarkov_matrix(const NetworkSpec& nw);

/// Langevin system: B injects bath j into the momentum of mass j.
SystemSpec build_langevin(const NetworkSpec& nw, double rate, const JumpLaw& law, IntegratorConfig integrator = {});
/// Semi-Markov system: B is the identity into the auxiliary variables r.
SystemSpec build_semimarkov(const NetworkSpec& nw, double rate, const JumpLaw& law, IntegratorConfig integrator = {});

struct ConditionReport {
  RankCertificate kalman;                 // (K)
  double omega_condition = 0.0;
  double growth_exponent = 0.0;           // fitted d log(1+|grad U|) / d log(1+|q|)
  double growth_limit = 0.0;              // 1 / (4 |I|)
  double lipschitz_estimate = 0.0;        // max Hessian norm seen on the ray
  bool growth_pass = false;               // (G), numeric spot check only
  std::vector<std::vector<double>> ph_products;  // [k][n] = |q_n|^k |D^{k+1} U(q_n)|
  bool ph_pass = false;                   // (pH) along the supplied ray
  int ph_orders = 0;
};

/// ph_orders defaults to the Langevin state dimension 2|I|.
ConditionReport check_conditions(const NetworkSpec& nw, const std::vector<Vector>& ray, int ph_orders = 0);

// ---------------------------------------------------------------------------

template <class S>
S Potential::value(std::span<const S> q) const {
  using std::cos;
  using std::exp;
  switch (kind) {
    case Kind::Zero:
      return S(0.0);
    case Kind::CosSum: {
      S s(0.0);
      for (const auto& v : q) s += cos(v);
      return s * amplitude;
    }
    case Kind::Bump: {
      S r2(0.0);
      for (const auto& v : q) r2 += v * v;
      const S s = r2 * (1.0 / (width * width));
      if (value_of(s) >= 1.0) return S(0.0);
      return exp(-1.0 / (1.0 - s)) * amplitude;
    }
  }
  return S(0.0);
}

template <class S>
void Potential::gradient(std::span<const S> q, std::span<S> out) const {
  using std::exp;
  using std::sin;
  switch (kind) {
    case Kind::Zero:
      for (auto& o : out) o = S(0.0);
      return;
    case Kind::CosSum:
      for (std::size_t i = 0; i < q.size(); ++i) out[i] = sin(q[i]) * (-amplitude);
      return;
    case Kind::Bump: {
      S r2(0.0);
      for (const auto& v : q) r2 += v * v;
      const S s = r2 * (1.0 / (width * width));
      if (value_of(s) >= 1.0) {
        for (auto& o : out) o = S(0.0);
        return;
      }
      const S one_minus = 1.0 - s;
      const S u = exp(-1.0 / one_minus) * amplitude;
      const S factor = u * (-2.0 / (width * width)) / (one_minus * one_minus);
      for (std::size_t i = 0; i < q.size(); ++i) out[i] = factor * q[i];
      return;
    }
  }
}

}  // namespace jumpflow
