#pragma once

// Estimators that turn simulated samples into the quantities the theory talks
// about: total-variation distances, exponential mixing fits, invariant-measure
// summaries and Kolmogorov-Smirnov tests.

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "jumpflow/coupling.hpp"
#include "jumpflow/pdmp.hpp"

namespace jumpflow {

struct TvEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<int> bins;             // per coordinate
  std::vector<double> bin_width;     // per coordinate
};

/// Half the L1 distance between the two histograms on a shared grid.
/// bins = 0 picks Freedman-Diaconis widths per coordinate from the pooled sample.
/// Standard error from `bootstrap` resamples of both sets.
TvEstimate histogram_tv(std::span<const Vector> a, std::span<const Vector> b, int bins = 0,
                        std::uint64_t seed = 0, int bootstrap = 100, unsigned threads = 1);

struct CurvePoint {
  double t = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  bool censored = false;
};

struct MixingReport {
  std::vector<CurvePoint> curve;
  double C = 0.0;
  double c = 0.0;
  double c_std_error = 0.0;
  double r2 = 0.0;
  double censoring_fraction = 0.0;
  double fit_t_max = std::numeric_limits<double>::infinity();
  int points_used = 0;
  bool mixing = false;  // c significantly positive
};

enum class FitWeights {
  Uniform,          // ordinary least squares on the log scale
  InverseVariance,  // (value / std_error)^2, zero errors capped at the smallest positive one
};

/// Least-squares fit of log value = log C - c t over the uncensored, positive
/// points with t <= t_max. Inverse-variance weights concentrate on values near
/// 1, where a coupling tail is still in its pre-asymptotic shoulder, so the
/// default is uniform.
MixingReport mixing_fit(std::span<const CurvePoint> curve,
                        double t_max = std::numeric_limits<double>::infinity(),
                        FitWeights weights = FitWeights::Uniform);

/// Tail curve as fit input.
std::vector<CurvePoint> to_curve(std::span<const TailPoint> tail);

/// q-quantile of the finite coupling times, or +inf if none are finite.
double coalescence_quantile(std::span<const CouplingRecord> records, double q);

struct Histogram1D {
  double lo = 0.0, hi = 0.0;
  std::vector<double> density;
};

struct InvariantOptions {
  double burn_in = 50.0;
  std::size_t samples = 10000;
  double spacing = 0.5;   // time between continuous-time observations
  int batches = 20;       // batch-means standard errors
  int histogram_bins = 50;
};

struct InvariantSummary {
  double second_moment = 0.0;          // time average of |X_t|^2
  double second_moment_se = 0.0;
  double embedded_second_moment = 0.0; // average of |X_{tau_k}|^2 past burn-in
  double embedded_se = 0.0;
  std::size_t embedded_samples = 0;
  std::vector<Histogram1D> histograms; // per coordinate, continuous time
};

InvariantSummary invariant_estimate(const SystemSpec& spec, const Vector& x0, const InvariantOptions& opts,
                                    Rng& rng);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov distribution tail P{K > lambda}.
double kolmogorov_tail(double lambda);
KsResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

}  // namespace jumpflow
