#include "jumpflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jumpflow/errors.hpp"
#include "jumpflow/parallel.hpp"

namespace jumpflow {

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return 0.0;
  const double pos = q * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

double tv_from_cells(std::span<const std::size_t> ca, std::span<const std::size_t> cb, std::size_t n_cells,
                     std::vector<double>& scratch) {
  scratch.assign(n_cells, 0.0);
  const double wa = 1.0 / double(ca.size()), wb = 1.0 / double(cb.size());
  for (auto c : ca) scratch[c] += wa;
  for (auto c : cb) scratch[c] -= wb;
  double s = 0.0;
  for (double v : scratch) s += std::abs(v);
  return 0.5 * s;
}

}  // namespace

TvEstimate histogram_tv(std::span<const Vector> a, std::span<const Vector> b, int bins, std::uint64_t seed,
                        int bootstrap, unsigned threads) {
  require(!a.empty() && !b.empty(), "histogram_tv needs two nonempty sample sets");
  const auto dim = a.front().size();
  require(dim >= 1 && dim <= 3, "histogram_tv supports dimension 1 to 3");
  for (const auto& x : a) require(x.size() == dim, "sample dimension mismatch");
  for (const auto& x : b) require(x.size() == dim, "sample dimension mismatch");
  require(bins >= 0 && bootstrap >= 0, "bins and bootstrap must be nonnegative");

  const std::size_t n = a.size() + b.size();
  TvEstimate out;
  const auto ud = static_cast<std::size_t>(dim);
  std::vector<double> lo(ud), width(ud);
  std::vector<std::size_t> stride(ud);
  std::size_t cells = 1;
  for (Eigen::Index j = 0; j < dim; ++j) {
    std::vector<double> col;
    col.reserve(n);
    for (const auto& x : a) col.push_back(x[j]);
    for (const auto& x : b) col.push_back(x[j]);
    std::sort(col.begin(), col.end());
    const double mn = col.front(), mx = col.back();
    int k = bins;
    if (k == 0) {
      const double iqr = quantile_sorted(col, 0.75) - quantile_sorted(col, 0.25);
      const double h = 2.0 * iqr / std::cbrt(double(n));
      k = h > 0.0 ? static_cast<int>(std::ceil((mx - mn) / h)) : 1;
      k = std::clamp(k, 1, 1 << 20);
    }
    const double span = mx > mn ? mx - mn : 1.0;
    lo[std::size_t(j)] = mn;
    width[std::size_t(j)] = span / k;
    stride[std::size_t(j)] = cells;
    cells *= std::size_t(k);
    out.bins.push_back(k);
    out.bin_width.push_back(span / k);
  }

  // Cell ids compacted to the occupied ones so the count array stays small.
  auto cell_of = [&](const Vector& x) {
    std::size_t id = 0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const auto k = static_cast<std::size_t>(out.bins[std::size_t(j)]);
      auto c = static_cast<std::size_t>(std::max(0.0, std::floor((x[j] - lo[std::size_t(j)]) / width[std::size_t(j)])));
      id += std::min(c, k - 1) * stride[std::size_t(j)];
    }
    return id;
  };
  std::vector<std::size_t> ca(a.size()), cb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ca[i] = cell_of(a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) cb[i] = cell_of(b[i]);
  std::vector<std::size_t> ids(ca);
  ids.insert(ids.end(), cb.begin(), cb.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto compact = [&](std::vector<std::size_t>& c) {
    for (auto& v : c) v = std::size_t(std::lower_bound(ids.begin(), ids.end(), v) - ids.begin());
  };
  compact(ca);
  compact(cb);

  std::vector<double> scratch;
  out.estimate = tv_from_cells(ca, cb, ids.size(), scratch);
  if (bootstrap > 1) {
    std::vector<double> reps(static_cast<std::size_t>(bootstrap), 0.0);
    parallel_for(std::size_t(bootstrap), threads, [&](std::size_t r) {
      Rng rng(seed, r, StreamTag::Bootstrap);
      std::vector<std::size_t> ra(ca.size()), rb(cb.size());
      for (auto& v : ra) v = ca[rng.index(ca.size())];
      for (auto& v : rb) v = cb[rng.index(cb.size())];
      std::vector<double> s;
      reps[r] = tv_from_cells(ra, rb, ids.size(), s);
    });
    const double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / bootstrap;
    double var = 0.0;
    for (double v : reps) var += (v - mean) * (v - mean);
    out.std_error = std::sqrt(var / (bootstrap - 1));
  }
  return out;
}

MixingReport mixing_fit(std::span<const CurvePoint> curve, double t_max, FitWeights weights) {
  MixingReport rep;
  rep.curve.assign(curve.begin(), curve.end());
  rep.fit_t_max = t_max;
  require(!curve.empty(), "mixing_fit needs a nonempty curve");
  std::size_t censored = 0;
  for (const auto& p : curve) {
    require(std::isfinite(p.value) && p.value >= 0.0 && p.value <= 1.0, "curve values must lie in [0, 1]");
    if (p.censored) ++censored;
  }
  rep.censoring_fraction = double(censored) / double(curve.size());
  if (censored == curve.size()) throw NumericError("mixing_fit: every point is censored");

  std::vector<const CurvePoint*> use;
  double min_se = std::numeric_limits<double>::infinity();
  for (const auto& p : curve) {
    if (p.censored || p.value <= 0.0 || p.t > t_max) continue;
    use.push_back(&p);
    if (p.std_error > 0.0) min_se = std::min(min_se, p.std_error);
  }
  if (use.size() < 4) throw ValidationError("mixing_fit needs at least 4 usable points");
  rep.points_used = static_cast<int>(use.size());

  // Delta method: var(log v) ~ (se / v)^2.
  const bool inverse_variance = weights == FitWeights::InverseVariance && std::isfinite(min_se);
  std::vector<double> w, x, y;
  for (const auto* p : use) {
    const double se = std::max(p->std_error, min_se);
    w.push_back(inverse_variance ? (p->value / se) * (p->value / se) : 1.0);
    x.push_back(p->t);
    y.push_back(std::log(p->value));
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
    syy += w[i] * (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "mixing_fit needs at least two distinct times");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double r = y[i] - intercept - slope * x[i];
    ss_res += w[i] * r * r;
  }
  rep.c = -slope;
  rep.C = std::exp(intercept);
  const double dof = double(w.size()) - 2.0;
  rep.c_std_error = std::sqrt(ss_res / dof / sxx);
  rep.r2 = syy > 1e-300 ? 1.0 - ss_res / syy : 0.0;
  rep.mixing = rep.c > 1e-12 && rep.c > 2.0 * rep.c_std_error;
  return rep;
}

std::vector<CurvePoint> to_curve(std::span<const TailPoint> tail) {
  std::vector<CurvePoint> out;
  out.reserve(tail.size());
  for (const auto& p : tail) out.push_back({p.t, p.survival, p.std_error, false});
  return out;
}

double coalescence_quantile(std::span<const CouplingRecord> records, double q) {
  require(q >= 0.0 && q <= 1.0, "quantile level must lie in [0, 1]");
  std::vector<double> t;
  for (const auto& r : records)
    if (r.coalesced()) t.push_back(r.T);
  if (t.empty()) return std::numeric_limits<double>::infinity();
  std::sort(t.begin(), t.end());
  return quantile_sorted(t, q);
}

InvariantSummary invariant_estimate(const SystemSpec& spec, const Vector& x0, const InvariantOptions& opts,
                                    Rng& rng) {
  spec.validate();
  require(x0.size() == spec.d(), "initial state has wrong dimension");
  require(opts.burn_in > 0.0 && opts.samples > 0 && opts.spacing > 0.0, "burn_in, samples and spacing must be positive");
  require(opts.batches >= 2 && std::size_t(opts.batches) <= opts.samples, "need 2 <= batches <= samples");
  require(opts.histogram_bins >= 1, "histogram needs at least one bin");

  const double horizon = opts.burn_in + double(opts.samples) * opts.spacing;
  const Trajectory tr = simulate(spec, x0, horizon, rng);

  auto batch_mean = [&](const std::vector<double>& v, double& mean, double& se) {
    const std::size_t per = v.size() / std::size_t(opts.batches);
    mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    if (per == 0) {
      se = std::numeric_limits<double>::infinity();
      return;
    }
    std::vector<double> m(static_cast<std::size_t>(opts.batches));
    for (std::size_t b = 0; b < m.size(); ++b)
      m[b] = std::accumulate(v.begin() + long(b * per), v.begin() + long((b + 1) * per), 0.0) / double(per);
    const double mm = std::accumulate(m.begin(), m.end(), 0.0) / double(m.size());
    double var = 0.0;
    for (double x : m) var += (x - mm) * (x - mm);
    se = std::sqrt(var / double(m.size() - 1) / double(m.size()));
  };

  InvariantSummary out;
  std::vector<Vector> states;
  states.reserve(opts.samples);
  std::vector<double> sq;
  sq.reserve(opts.samples);
  for (std::size_t i = 1; i <= opts.samples; ++i) {
    states.push_back(tr.at(spec, opts.burn_in + double(i) * opts.spacing));
    sq.push_back(states.back().squaredNorm());
  }
  batch_mean(sq, out.second_moment, out.second_moment_se);

  std::vector<double> emb;
  for (std::size_t k = 0; k < tr.path.size(); ++k)
    if (tr.path.jump_times[k] > opts.burn_in) emb.push_back(tr.post_jump[k].squaredNorm());
  out.embedded_samples = emb.size();
  if (emb.size() >= std::size_t(opts.batches)) {
    batch_mean(emb, out.embedded_second_moment, out.embedded_se);
  } else {
    out.embedded_second_moment = std::numeric_limits<double>::quiet_NaN();
    out.embedded_se = std::numeric_limits<double>::infinity();
  }

  for (int j = 0; j < spec.d(); ++j) {
    Histogram1D h;
    h.lo = h.hi = states.front()[j];
    for (const auto& s : states) {
      h.lo = std::min(h.lo, s[j]);
      h.hi = std::max(h.hi, s[j]);
    }
    if (h.hi <= h.lo) h.hi = h.lo + 1.0;
    const double width = (h.hi - h.lo) / opts.histogram_bins;
    h.density.assign(std::size_t(opts.histogram_bins), 0.0);
    for (const auto& s : states) {
      auto c = static_cast<std::size_t>((s[j] - h.lo) / width);
      h.density[std::min(c, h.density.size() - 1)] += 1.0 / (double(states.size()) * width);
    }
    out.histograms.push_back(std::move(h));
  }
  return out;
}

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

namespace {

double ks_p(double d, double n_eff) {
  const double sn = std::sqrt(n_eff);
  return kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
}

}  // namespace

KsResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf) {
  require(!samples.empty(), "KS test needs samples");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double n = double(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf(v[i]);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  return {d, ks_p(d, n)};
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "KS test needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = double(x.size()), nb = double(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  return {d, ks_p(d, na * nb / (na + nb))};
}

}  // namespace jumpflow
