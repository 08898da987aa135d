#pragma once

// Compound Poisson driving noise: jump laws with evaluable densities and
// sampled paths Y_t = sum_k eta_k 1[tau_k, inf)(t).

#include <span>
#include <string>
#include <vector>

#include "jumpflow/rng.hpp"
#include "jumpflow/types.hpp"

namespace jumpflow {

/// Law of a single jump vector eta in R^n.
///
/// Built-in laws have continuous, strictly positive densities. The per-bath
/// law (one randomly chosen coordinate jumps) is singular and has no density;
/// it is only usable where a density is not needed.
class JumpLaw {
 public:
  enum class Kind { Gaussian, Laplace, GaussianMixture, PerBath };

  /// N(mean, sigma^2 I).
  static JumpLaw gaussian(int dim, double sigma, Vector mean = {});
  /// Independent Laplace(0, scale) coordinates.
  static JumpLaw laplace(int dim, double scale);
  /// w N(mu1, s1^2 I) + (1 - w) N(mu2, s2^2 I).
  static JumpLaw gaussian_mixture(double weight, Vector mu1, double sigma1, Vector mu2, double sigma2);
  /// Bath j jumps at rate rates[j] with a N(0, sigma^2) amplitude; the jump is
  /// that amplitude times the j-th unit vector.
  static JumpLaw per_bath(std::vector<double> rates, double sigma);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  Vector sample(Rng& rng) const;
  bool has_density() const { return kind_ != Kind::PerBath; }
  double density(const Vector& x) const;
  double log_density(const Vector& x) const;
  /// Lambda = E|eta|^2.
  double second_moment() const;

  double sigma() const { return sigma_; }
  double sigma2() const { return sigma2_; }
  double scale() const { return sigma_; }
  double weight() const { return weight_; }
  const Vector& mean() const { return mu1_; }
  const Vector& mean2() const { return mu2_; }
  const std::vector<double>& bath_rates() const { return rates_; }
  double total_bath_rate() const;

 private:
  Kind kind_ = Kind::Gaussian;
  int dim_ = 0;
  double sigma_ = 1.0, sigma2_ = 1.0, weight_ = 1.0;
  Vector mu1_, mu2_;
  std::vector<double> rates_;
};

std::string to_string(JumpLaw::Kind k);

/// Jump times tau_1 < tau_2 < ... <= horizon, their increments t_k, and jumps eta_k.
struct CompoundPoissonPath {
  double rate = 0.0;
  double horizon = 0.0;
  std::vector<double> waiting;     // t_k = tau_k - tau_{k-1}
  std::vector<double> jump_times;  // tau_k
  std::vector<Vector> jumps;       // eta_k

  std::size_t size() const { return jump_times.size(); }
  /// N_t = max{k >= 0 : tau_k <= t}.
  std::size_t count_until(double t) const;
  /// Y_t.
  Vector value_at(double t, int dim) const;
};

/// Waiting times i.i.d. Exp(rate) and jumps i.i.d. from `law`, drawn alternately
/// (t_1, eta_1, t_2, eta_2, ...). A per-bath law is routed to sample_per_bath_path.
CompoundPoissonPath sample_path(double rate, const JumpLaw& law, double horizon, Rng& rng);

/// Each bath is an independent one-dimensional compound Poisson process;
/// their event times are generated separately and merged.
CompoundPoissonPath sample_per_bath_path(const JumpLaw& law, double horizon, Rng& rng);

/// E exp(c tau_k) = (rate / (rate - c))^k. Throws DomainError when c >= rate.
double waiting_exp_moment(double rate, double c, int k);

/// prod_j law.density(xi_j); 1 for an empty list.
double density_product(const JumpLaw& law, std::span<const Vector> xi);
double log_density_product(const JumpLaw& law, std::span<const Vector> xi);

}  // namespace jumpflow
