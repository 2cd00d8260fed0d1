// Copyright 2026 The gavg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GAVG_DIAGNOSTICS_HPP
#define GAVG_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gavg/core.hpp"
#include "gavg/trace.hpp"

namespace gavg {

/// Log-spaced checkpoints: round(10^(i / per_decade)) for i = 0, 1, ..., with
/// duplicates dropped, capped at max_k, and max_k itself always included.
inline std::vector<std::int64_t> log_checkpoints(std::int64_t max_k, int per_decade = 20) {
  if (max_k < 1) throw UsageError("checkpoints: max_k must be >= 1");
  if (per_decade < 1) throw UsageError("checkpoints: per_decade must be >= 1");
  std::vector<std::int64_t> ks;
  for (int i = 0;; ++i) {
    const auto k = static_cast<std::int64_t>(std::llround(std::pow(10.0, double(i) / per_decade)));
    if (k > max_k) break;
    if (ks.empty() || k != ks.back()) ks.push_back(k);
  }
  if (ks.back() != max_k) ks.push_back(max_k);
  return ks;
}

/// Across-trial moments of x_j - x_K, where K is the last checkpoint.
struct IterateMoments {
  std::vector<std::int64_t> ks;
  std::int64_t reference_k = 0;
  std::int64_t n_trials = 0;
  std::vector<double> diff_mean_sq;  // |E-hat[x_j - x_K]|^2
  std::vector<double> diff_var;      // V-hat[x_j - x_K] (trace of covariance)
};

/// Across-trial summary of a set of traces at common checkpoints.
struct TrialAggregate {
  std::string method_id;
  std::string schedule_id;
  std::vector<std::int64_t> ks;
  std::vector<double> mean_gap;
  std::vector<double> var_gap;  // NaN when n_trials < 2
  std::int64_t n_trials = 0;

  // Present only when every trace carries iterate snapshots.
  std::vector<Vector> mean_iterate;
  std::vector<double> iterate_cov_trace;
  std::optional<IterateMoments> moments;
  // Present only when every trace carries direction snapshots.
  std::vector<double> direction_var;
};

namespace detail {

// Unbiased trace variance of a set of vectors.
inline std::pair<Vector, double> vector_moments(const std::vector<const Vector*>& xs) {
  Vector mean = Vector::Zero(xs.front()->size());
  for (const Vector* x : xs) mean += *x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (const Vector* x : xs) ss += (*x - mean).squaredNorm();
  const double var = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1)
                                   : std::numeric_limits<double>::quiet_NaN();
  return {std::move(mean), var};
}

}  // namespace detail

/// Sample mean and unbiased variance of f_gap at each checkpoint. Traces are
/// reduced in (seed, stream_id) order whatever order they arrive in.
inline TrialAggregate aggregate(std::span<const Trace> traces,
                                std::span<const std::int64_t> checkpoints) {
  if (traces.empty()) throw UsageError("aggregate: no traces");
  if (checkpoints.empty()) throw UsageError("aggregate: no checkpoints");
  for (const auto& t : traces)
    if (t.method_id != traces.front().method_id || t.schedule_id != traces.front().schedule_id)
      throw UsageError("aggregate: traces disagree on method or schedule id");

  std::vector<const Trace*> order;
  for (const auto& t : traces) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](const Trace* a, const Trace* b) {
    return std::pair(a->seed, a->stream_id) < std::pair(b->seed, b->stream_id);
  });

  // Locate each checkpoint in each trace.
  const std::size_t nk = checkpoints.size();
  std::vector<std::vector<const TraceEntry*>> at(nk);
  for (const Trace* t : order) {
    auto it = t->entries.begin();
    for (std::size_t c = 0; c < nk; ++c) {
      it = std::lower_bound(it, t->entries.end(), checkpoints[c],
                            [](const TraceEntry& e, std::int64_t k) { return e.k < k; });
      if (it == t->entries.end() || it->k != checkpoints[c])
        throw DataError("aggregate: checkpoint " + std::to_string(checkpoints[c]) +
                        " missing from trace with stream id " + std::to_string(t->stream_id));
      at[c].push_back(&*it);
    }
  }

  TrialAggregate agg;
  agg.method_id = traces.front().method_id;
  agg.schedule_id = traces.front().schedule_id;
  agg.ks.assign(checkpoints.begin(), checkpoints.end());
  agg.n_trials = static_cast<std::int64_t>(order.size());
  const double n = static_cast<double>(order.size());
  for (std::size_t c = 0; c < nk; ++c) {
    double sum = 0.0;
    for (const TraceEntry* e : at[c]) sum += e->f_gap;
    const double mean = sum / n;
    double ss = 0.0;
    for (const TraceEntry* e : at[c]) ss += (e->f_gap - mean) * (e->f_gap - mean);
    agg.mean_gap.push_back(mean);
    agg.var_gap.push_back(order.size() > 1 ? ss / (n - 1.0)
                                           : std::numeric_limits<double>::quiet_NaN());
  }

  const auto all_have = [&](auto member) {
    for (const auto& row : at)
      for (const TraceEntry* e : row)
        if (!(e->*member)) return false;
    return true;
  };

  if (all_have(&TraceEntry::iterate)) {
    IterateMoments mom;
    mom.ks = agg.ks;
    mom.reference_k = agg.ks.back();
    mom.n_trials = agg.n_trials;
    const auto& final_row = at.back();
    for (std::size_t c = 0; c < nk; ++c) {
      std::vector<const Vector*> xs;
      for (const TraceEntry* e : at[c]) xs.push_back(&*e->iterate);
      auto [mean, var] = detail::vector_moments(xs);
      agg.mean_iterate.push_back(std::move(mean));
      agg.iterate_cov_trace.push_back(var);

      std::vector<Vector> diffs;
      diffs.reserve(at[c].size());
      for (std::size_t t = 0; t < at[c].size(); ++t)
        diffs.push_back(*at[c][t]->iterate - *final_row[t]->iterate);
      std::vector<const Vector*> dp;
      for (const auto& d : diffs) dp.push_back(&d);
      auto [dmean, dvar] = detail::vector_moments(dp);
      mom.diff_mean_sq.push_back(dmean.squaredNorm());
      mom.diff_var.push_back(dvar);
    }
    agg.moments = std::move(mom);
  }

  if (all_have(&TraceEntry::direction)) {
    for (std::size_t c = 0; c < nk; ++c) {
      std::vector<const Vector*> ds;
      for (const TraceEntry* e : at[c]) ds.push_back(&*e->direction);
      agg.direction_var.push_back(detail::vector_moments(ds).second);
    }
  }
  return agg;
}

/// Least-squares line through (ln x, ln y) restricted to x in [lo, hi].
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::int64_t k_lo = 0;
  std::int64_t k_hi = 0;
  std::size_t n_points = 0;
  double max_abs_residual = 0.0;
};

/// Least-squares line through (ln x, ln y) over all given points.
inline RateFit fit_loglog_xy(std::span<const double> xs, std::span<const double> ys,
                             std::size_t min_points = 5) {
  if (xs.size() != ys.size()) throw UsageError("fit: size mismatch");
  if (xs.size() < min_points)
    throw UsageError("fit: need at least " + std::to_string(min_points) +
                     " checkpoints in range, have " + std::to_string(xs.size()));
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw DataError("fit: nonpositive value " + format_real(ys[i]) + " at " +
                      format_real(xs[i]));
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw UsageError("fit: degenerate range");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ssr += r * r;
    f.max_abs_residual = std::max(f.max_abs_residual, std::abs(r));
  }
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  f.n_points = lx.size();
  return f;
}

/// Log-log fit restricted to checkpoints k in [k_lo, k_hi].
inline RateFit fit_loglog(std::span<const std::int64_t> ks, std::span<const double> ys,
                          std::int64_t k_lo, std::int64_t k_hi, std::size_t min_points = 5) {
  if (ks.size() != ys.size()) throw UsageError("fit: size mismatch");
  if (k_lo > k_hi) throw UsageError("fit: empty k range");
  std::vector<double> xs, vs;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < k_lo || ks[i] > k_hi) continue;
    if (!(ys[i] > 0.0))
      throw DataError("fit: nonpositive value " + format_real(ys[i]) + " at k = " +
                      std::to_string(ks[i]));
    xs.push_back(static_cast<double>(ks[i]));
    vs.push_back(ys[i]);
  }
  RateFit f = fit_loglog_xy(xs, vs, min_points);
  f.k_lo = k_lo;
  f.k_hi = k_hi;
  return f;
}

/// Rate exponent estimate from the mean optimality gap.
inline RateFit fit_rate(const TrialAggregate& agg, std::int64_t k_lo, std::int64_t k_hi) {
  return fit_loglog(agg.ks, agg.mean_gap, k_lo, k_hi);
}

/// Decay exponent of the across-trial variance of the search direction.
inline RateFit fit_direction_variance(std::span<const std::int64_t> ks,
                                      std::span<const double> variances, std::int64_t k_lo,
                                      std::int64_t k_hi) {
  return fit_loglog(ks, variances, k_lo, k_hi);
}

struct KappaEstimate {
  double kappa_hat = 0.0;
  std::int64_t j_lo = 0;
  std::int64_t j_hi = 0;
  RateFit fit;
  std::vector<std::int64_t> js;
  std::vector<double> mean_sq;   // |E-hat[x_j - x_K]|^2
  std::vector<double> variance;  // V-hat[x_j - x_K]
};

/// Variance-dominance exponent: fits ln r_j against ln j with
/// r_j = |E-hat[x_j - x_K]|^2 / V-hat[x_j - x_K] and returns -slope. Only the
/// final checkpoint K serves as the partner index.
inline KappaEstimate estimate_kappa(const IterateMoments& mom, std::int64_t K, std::int64_t j_lo,
                                    std::int64_t j_hi) {
  if (mom.reference_k != K)
    throw UsageError("estimate_kappa: moments were taken against k = " +
                     std::to_string(mom.reference_k) + ", not " + std::to_string(K));
  if (mom.n_trials < 50)
    throw UsageError("estimate_kappa: need moments from at least 50 trials");
  if (mom.ks.size() != mom.diff_mean_sq.size() || mom.ks.size() != mom.diff_var.size())
    throw UsageError("estimate_kappa: inconsistent moment arrays");
  KappaEstimate est;
  est.j_lo = j_lo;
  est.j_hi = std::min(j_hi, K - 1);
  std::vector<double> ratio;
  for (std::size_t i = 0; i < mom.ks.size(); ++i) {
    const std::int64_t j = mom.ks[i];
    if (j < est.j_lo || j > est.j_hi) continue;
    if (!(mom.diff_var[i] > 0.0))
      throw DataError("estimate_kappa: zero variance of x_j - x_K at j = " + std::to_string(j));
    est.js.push_back(j);
    est.mean_sq.push_back(mom.diff_mean_sq[i]);
    est.variance.push_back(mom.diff_var[i]);
    ratio.push_back(mom.diff_mean_sq[i] / mom.diff_var[i]);
  }
  est.fit = fit_loglog(est.js, ratio, est.j_lo, est.j_hi);
  est.kappa_hat = -est.fit.slope;
  return est;
}

// --- CSV emission ---------------------------------------------------------

inline std::string csv_real(double v) { return std::isnan(v) ? "nan" : format_real(v); }

/// k,mean_gap,var_gap[,direction_var]
inline void write_aggregate_csv(std::ostream& os, const TrialAggregate& agg) {
  const bool dir = !agg.direction_var.empty();
  os << "k,mean_gap,var_gap" << (dir ? ",direction_var" : "") << '\n';
  for (std::size_t i = 0; i < agg.ks.size(); ++i) {
    os << agg.ks[i] << ',' << csv_real(agg.mean_gap[i]) << ',' << csv_real(agg.var_gap[i]);
    if (dir) os << ',' << csv_real(agg.direction_var[i]);
    os << '\n';
  }
}

struct SummaryRow {
  std::string method;
  double p = std::numeric_limits<double>::quiet_NaN();
  double s = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  std::int64_t n_trials = 0;
  double rate_slope = std::numeric_limits<double>::quiet_NaN();
  double rate_r2 = std::numeric_limits<double>::quiet_NaN();
  double kappa_hat = std::numeric_limits<double>::quiet_NaN();
  double varm_slope = std::numeric_limits<double>::quiet_NaN();
};

inline void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows) {
  os << "method,p,s,sigma,n_trials,rate_slope,rate_r2,kappa_hat,varm_slope\n";
  for (const auto& r : rows)
    os << r.method << ',' << csv_real(r.p) << ',' << csv_real(r.s) << ',' << csv_real(r.sigma)
       << ',' << r.n_trials << ',' << csv_real(r.rate_slope) << ',' << csv_real(r.rate_r2) << ','
       << csv_real(r.kappa_hat) << ',' << csv_real(r.varm_slope) << '\n';
}

}  // namespace gavg

#endif  // GAVG_DIAGNOSTICS_HPP
