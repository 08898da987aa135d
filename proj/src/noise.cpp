#include "jumpflow/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "jumpflow/errors.hpp"

namespace jumpflow {

namespace {

double log_gauss_iso(const Vector& x, const Vector& mu, double sigma) {
  const double n = static_cast<double>(x.size());
  const double r2 = mu.size() ? (x - mu).squaredNorm() : x.squaredNorm();
  return -0.5 * r2 / (sigma * sigma) - n * (std::log(sigma) + 0.5 * std::log(2.0 * std::numbers::pi));
}

}  // namespace

JumpLaw JumpLaw::gaussian(int dim, double sigma, Vector mean) {
  require(dim > 0, "jump law dimension must be positive");
  require(sigma > 0.0, "gaussian jump law needs sigma > 0");
  require(mean.size() == 0 || mean.size() == dim, "gaussian mean has wrong length");
  JumpLaw l;
  l.kind_ = Kind::Gaussian;
  l.dim_ = dim;
  l.sigma_ = sigma;
  l.mu1_ = mean.size() ? mean : Vector::Zero(dim);
  return l;
}

JumpLaw JumpLaw::laplace(int dim, double scale) {
  require(dim > 0, "jump law dimension must be positive");
  require(scale > 0.0, "laplace jump law needs scale > 0");
  JumpLaw l;
  l.kind_ = Kind::Laplace;
  l.dim_ = dim;
  l.sigma_ = scale;
  return l;
}

JumpLaw JumpLaw::gaussian_mixture(double weight, Vector mu1, double sigma1, Vector mu2, double sigma2) {
  require(weight > 0.0 && weight < 1.0, "mixture weight must lie in (0, 1)");
  require(mu1.size() > 0 && mu1.size() == mu2.size(), "mixture means must have equal positive length");
  require(sigma1 > 0.0 && sigma2 > 0.0, "mixture scales must be positive");
  JumpLaw l;
  l.kind_ = Kind::GaussianMixture;
  l.dim_ = static_cast<int>(mu1.size());
  l.weight_ = weight;
  l.mu1_ = std::move(mu1);
  l.mu2_ = std::move(mu2);
  l.sigma_ = sigma1;
  l.sigma2_ = sigma2;
  return l;
}

JumpLaw JumpLaw::per_bath(std::vector<double> rates, double sigma) {
  require(!rates.empty(), "per-bath law needs at least one bath");
  for (double r : rates) require(r > 0.0, "bath rates must be positive");
  require(sigma > 0.0, "per-bath amplitude scale must be positive");
  JumpLaw l;
  l.kind_ = Kind::PerBath;
  l.dim_ = static_cast<int>(rates.size());
  l.sigma_ = sigma;
  l.rates_ = std::move(rates);
  return l;
}

double JumpLaw::total_bath_rate() const { return std::accumulate(rates_.begin(), rates_.end(), 0.0); }

Vector JumpLaw::sample(Rng& rng) const {
  Vector x(dim_);
  switch (kind_) {
    case Kind::Gaussian:
      for (int i = 0; i < dim_; ++i) x[i] = mu1_[i] + sigma_ * rng.normal();
      break;
    case Kind::Laplace:
      for (int i = 0; i < dim_; ++i) x[i] = rng.laplace(sigma_);
      break;
    case Kind::GaussianMixture: {
      const bool first = rng.uniform() < weight_;
      const Vector& mu = first ? mu1_ : mu2_;
      const double s = first ? sigma_ : sigma2_;
      for (int i = 0; i < dim_; ++i) x[i] = mu[i] + s * rng.normal();
      break;
    }
    case Kind::PerBath: {
      x.setZero();
      double u = rng.uniform() * total_bath_rate();
      int j = 0;
      while (j + 1 < dim_ && u >= rates_[std::size_t(j)]) u -= rates_[std::size_t(j++)];
      x[j] = sigma_ * rng.normal();
      break;
    }
  }
  return x;
}

double JumpLaw::log_density(const Vector& x) const {
  require(x.size() == dim_, "jump density: wrong argument length");
  switch (kind_) {
    case Kind::Gaussian:
      return log_gauss_iso(x, mu1_, sigma_);
    case Kind::Laplace:
      return -x.cwiseAbs().sum() / sigma_ - dim_ * std::log(2.0 * sigma_);
    case Kind::GaussianMixture: {
      const double a = std::log(weight_) + log_gauss_iso(x, mu1_, sigma_);
      const double b = std::log1p(-weight_) + log_gauss_iso(x, mu2_, sigma2_);
      const double m = std::max(a, b);
      return m + std::log(std::exp(a - m) + std::exp(b - m));
    }
    case Kind::PerBath:
      break;
  }
  throw DomainError("the per-bath jump law is singular and has no density");
}

double JumpLaw::density(const Vector& x) const { return std::exp(log_density(x)); }

double JumpLaw::second_moment() const {
  const double n = dim_;
  switch (kind_) {
    case Kind::Gaussian:
      return mu1_.squaredNorm() + n * sigma_ * sigma_;
    case Kind::Laplace:
      return 2.0 * n * sigma_ * sigma_;
    case Kind::GaussianMixture:
      return weight_ * (mu1_.squaredNorm() + n * sigma_ * sigma_) +
             (1.0 - weight_) * (mu2_.squaredNorm() + n * sigma2_ * sigma2_);
    case Kind::PerBath:
      return sigma_ * sigma_;
  }
  return 0.0;
}

std::string to_string(JumpLaw::Kind k) {
  switch (k) {
    case JumpLaw::Kind::Gaussian: return "gaussian";
    case JumpLaw::Kind::Laplace: return "laplace";
    case JumpLaw::Kind::GaussianMixture: return "mixture";
    case JumpLaw::Kind::PerBath: return "per_bath";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

std::size_t CompoundPoissonPath::count_until(double t) const {
  return static_cast<std::size_t>(std::upper_bound(jump_times.begin(), jump_times.end(), t) - jump_times.begin());
}

Vector CompoundPoissonPath::value_at(double t, int dim) const {
  Vector y = Vector::Zero(dim);
  for (std::size_t k = 0, n = count_until(t); k < n; ++k) y += jumps[k];
  return y;
}

CompoundPoissonPath sample_path(double rate, const JumpLaw& law, double horizon, Rng& rng) {
  if (law.kind() == JumpLaw::Kind::PerBath) return sample_per_bath_path(law, horizon, rng);
  require(rate > 0.0, "jump rate must be positive");
  require(horizon > 0.0, "path horizon must be positive");
  CompoundPoissonPath path;
  path.rate = rate;
  path.horizon = horizon;
  double tau = 0.0;
  for (;;) {
    const double w = rng.exponential(rate);
    if (tau + w > horizon) break;
    tau += w;
    path.waiting.push_back(w);
    path.jump_times.push_back(tau);
    path.jumps.push_back(law.sample(rng));
  }
  return path;
}

CompoundPoissonPath sample_per_bath_path(const JumpLaw& law, double horizon, Rng& rng) {
  require(law.kind() == JumpLaw::Kind::PerBath, "sample_per_bath_path needs a per-bath law");
  require(horizon > 0.0, "path horizon must be positive");
  struct Event {
    double time;
    int bath;
    double amplitude;
  };
  std::vector<Event> events;
  for (int j = 0; j < law.dim(); ++j) {
    double tau = 0.0;
    for (;;) {
      tau += rng.exponential(law.bath_rates()[std::size_t(j)]);
      if (tau > horizon) break;
      events.push_back({tau, j, law.sigma() * rng.normal()});
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
  CompoundPoissonPath path;
  path.rate = law.total_bath_rate();
  path.horizon = horizon;
  double prev = 0.0;
  for (const auto& e : events) {
    if (e.time <= prev && !path.jump_times.empty()) continue;  // simultaneous events have probability zero
    Vector eta = Vector::Zero(law.dim());
    eta[e.bath] = e.amplitude;
    path.waiting.push_back(e.time - prev);
    path.jump_times.push_back(e.time);
    path.jumps.push_back(std::move(eta));
    prev = e.time;
  }
  return path;
}

double waiting_exp_moment(double rate, double c, int k) {
  require(rate > 0.0, "waiting-time rate must be positive");
  require(k >= 0, "number of waiting times must be nonnegative");
  if (c >= rate) throw DomainError("E exp(c tau_k) is infinite for c >= rate");
  return std::pow(rate / (rate - c), k);
}

double log_density_product(const JumpLaw& law, std::span<const Vector> xi) {
  double s = 0.0;
  for (const auto& x : xi) s += law.log_density(x);
  return s;
}

double density_product(const JumpLaw& law, std::span<const Vector> xi) {
  double p = 1.0;
  for (const auto& x : xi) p *= law.density(x);
  return p;
}

}  // namespace jumpflow
