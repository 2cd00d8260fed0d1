#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "gavg/diagnostics.hpp"
#include "gavg/rng.hpp"

namespace {

using gavg::RngStream;
using gavg::Trace;
using gavg::TraceEntry;
using gavg::Vector;

Trace make_trace(std::uint64_t stream, const std::vector<std::int64_t>& ks,
                 const std::vector<double>& gaps) {
  Trace t;
  t.seed = 1;
  t.stream_id = stream;
  t.method_id = "m";
  t.schedule_id = "s";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    TraceEntry e;
    e.k = ks[i];
    e.f_gap = gaps[i];
    t.entries.push_back(e);
  }
  return t;
}

TEST(Checkpoints, LogSpacedAndEndsAtMax) {
  const auto ks = gavg::log_checkpoints(100000, 20);
  EXPECT_EQ(ks.front(), 1);
  EXPECT_EQ(ks.back(), 100000);
  EXPECT_TRUE(std::is_sorted(ks.begin(), ks.end()));
  EXPECT_EQ(std::adjacent_find(ks.begin(), ks.end()), ks.end());
  // 20 per decade once rounding stops merging points.
  EXPECT_EQ(std::count_if(ks.begin(), ks.end(), [](auto k) { return k >= 1000 && k < 10000; }), 20);
  EXPECT_EQ(gavg::log_checkpoints(150, 1), (std::vector<std::int64_t>{1, 10, 100, 150}));
  EXPECT_THROW(gavg::log_checkpoints(0), gavg::UsageError);
}

TEST(Aggregate, HandArithmetic) {
  const std::vector<Trace> ts{make_trace(0, {10}, {1.0}), make_trace(1, {10}, {3.0})};
  const std::vector<std::int64_t> cps{10};
  const auto agg = gavg::aggregate(ts, cps);
  EXPECT_DOUBLE_EQ(agg.mean_gap[0], 2.0);
  EXPECT_DOUBLE_EQ(agg.var_gap[0], 2.0);
  EXPECT_EQ(agg.n_trials, 2);
  EXPECT_FALSE(agg.moments.has_value());
  EXPECT_TRUE(agg.direction_var.empty());
}

TEST(Aggregate, IdenticalTracesHaveZeroVariance) {
  const std::vector<Trace> ts(5, make_trace(0, {1, 2, 5}, {3.0, 2.0, 0.5}));
  const std::vector<std::int64_t> cps{1, 2, 5};
  const auto agg = gavg::aggregate(ts, cps);
  for (double v : agg.var_gap) EXPECT_EQ(v, 0.0);
}

TEST(Aggregate, SingleTraceVarianceIsNan) {
  const std::vector<Trace> ts{make_trace(0, {1}, {1.0})};
  const std::vector<std::int64_t> cps{1};
  EXPECT_TRUE(std::isnan(gavg::aggregate(ts, cps).var_gap[0]));
}

TEST(Aggregate, SubsetOfCheckpoints) {
  const std::vector<Trace> ts{make_trace(0, {1, 2, 3}, {1, 2, 3}), make_trace(1, {1, 2, 3}, {3, 4, 5})};
  const std::vector<std::int64_t> cps{1, 3};
  const auto agg = gavg::aggregate(ts, cps);
  EXPECT_EQ(agg.mean_gap, (std::vector<double>{2.0, 4.0}));
}

TEST(Aggregate, ErrorCases) {
  std::vector<Trace> ts{make_trace(0, {1, 2}, {1, 1}), make_trace(1, {1, 2}, {1, 1})};
  const std::vector<std::int64_t> cps{1, 2};
  const std::vector<std::int64_t> missing{1, 3};
  EXPECT_THROW(gavg::aggregate(ts, missing), gavg::DataError);
  ts[1].method_id = "other";
  EXPECT_THROW(gavg::aggregate(ts, cps), gavg::UsageError);
  ts[1].method_id = "m";
  ts[1].schedule_id = "other";
  EXPECT_THROW(gavg::aggregate(ts, cps), gavg::UsageError);
}

TEST(Aggregate, RecoversMeanOfSyntheticTraces) {
  const std::vector<std::int64_t> ks{1, 10, 100, 1000};
  RngStream rng(3, 0);
  std::vector<Trace> ts;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> g;
    for (auto k : ks) g.push_back(5.0 / k + 0.1 * rng.normal());
    ts.push_back(make_trace(t, ks, g));
  }
  const auto agg = gavg::aggregate(ts, ks);
  for (std::size_t i = 0; i < ks.size(); ++i)
    EXPECT_NEAR(agg.mean_gap[i], 5.0 / ks[i], 4.0 * 0.1 / std::sqrt(100.0));
}

TEST(Aggregate, PermutationInvariant) {
  const std::vector<std::int64_t> ks{1, 10, 100};
  RngStream rng(4, 0);
  std::vector<Trace> ts;
  for (int t = 0; t < 30; ++t) {
    std::vector<double> g;
    for (std::size_t i = 0; i < ks.size(); ++i) g.push_back(std::exp(rng.normal()));
    ts.push_back(make_trace(t, ks, g));
  }
  const auto a = gavg::aggregate(ts, ks);
  std::reverse(ts.begin(), ts.end());
  std::swap(ts[3], ts[17]);
  const auto b = gavg::aggregate(ts, ks);
  EXPECT_EQ(a.mean_gap, b.mean_gap);  // bitwise: reduction order is fixed
  EXPECT_EQ(a.var_gap, b.var_gap);
}

TEST(Fit, ExactPowerLaws) {
  const auto ks = gavg::log_checkpoints(100000, 20);
  std::vector<double> y2, y1;
  for (auto k : ks) {
    y2.push_back(7.0 / (double(k) * k));
    y1.push_back(3.0 / double(k));
  }
  const auto f2 = gavg::fit_loglog(ks, y2, 1, 100000);
  EXPECT_NEAR(f2.slope, -2.0, 1e-12);
  EXPECT_NEAR(f2.r_squared, 1.0, 1e-12);
  EXPECT_LT(f2.max_abs_residual, 1e-10);
  EXPECT_NEAR(std::exp(f2.intercept), 7.0, 1e-9);
  EXPECT_NEAR(gavg::fit_loglog(ks, y1, 10, 1000).slope, -1.0, 1e-12);
}

TEST(Fit, MixtureOnLateRange) {
  const auto ks = gavg::log_checkpoints(100000, 20);
  std::vector<double> y;
  for (auto k : ks) y.push_back(1.0 / (double(k) * k) + 0.1 / std::pow(double(k), 3));
  EXPECT_NEAR(gavg::fit_loglog(ks, y, 1000, 100000).slope, -2.0, 0.02);
}

TEST(Fit, ErrorCases) {
  const std::vector<std::int64_t> ks{1, 2, 3, 4, 5, 6};
  const std::vector<double> bad{1, 2, 0, 4, 5, 6};
  EXPECT_THROW(gavg::fit_loglog(ks, bad, 1, 6), gavg::DataError);
  const std::vector<double> ok{1, 2, 3, 4, 5, 6};
  EXPECT_THROW(gavg::fit_loglog(ks, ok, 1, 3), gavg::UsageError);
  EXPECT_NO_THROW(gavg::fit_loglog(ks, bad, 4, 6, 3));
}

TEST(Fit, DirectionVarianceExactInverse) {
  const auto ks = gavg::log_checkpoints(10000, 20);
  std::vector<double> v;
  for (auto k : ks) v.push_back(0.3 / double(k));
  EXPECT_NEAR(gavg::fit_direction_variance(ks, v, 100, 10000).slope, -1.0, 1e-12);
}

// Synthetic iterates x_j = mean_j + noise_j across trials; the final
// checkpoint K serves as the partner index.
std::vector<Trace> synthetic_iterates(int trials, const std::vector<std::int64_t>& ks,
                                      double mean_pow, double var_pow, int d,
                                      std::uint64_t seed) {
  RngStream rng(seed, 0);
  Vector u = Vector::Zero(d);
  u[0] = 1.0;
  std::vector<Trace> ts;
  for (int t = 0; t < trials; ++t) {
    Trace tr;
    tr.seed = seed;
    tr.stream_id = t;
    tr.method_id = "m";
    tr.schedule_id = "s";
    for (auto k : ks) {
      TraceEntry e;
      e.k = k;
      e.f_gap = 1.0;
      Vector x = std::pow(double(k), -mean_pow) * u;
      const double sd = std::sqrt(std::pow(double(k), -var_pow) / d);
      for (int c = 0; c < d; ++c) x[c] += sd * rng.normal();
      e.iterate = x;
      tr.entries.push_back(e);
    }
    ts.push_back(tr);
  }
  return ts;
}

TEST(Kappa, RecoversUnitExponent) {
  // |E|^2 = j^-2 and V = j^-1 give r_j = j^-1.
  const auto ks = gavg::log_checkpoints(100000, 20);
  const auto ts = synthetic_iterates(4000, ks, 1.0, 1.0, 3, 11);
  const auto agg = gavg::aggregate(ts, ks);
  ASSERT_TRUE(agg.moments);
  const auto est = gavg::estimate_kappa(*agg.moments, 100000, 1, 30);
  EXPECT_NEAR(est.kappa_hat, 1.0, 0.1);
}

TEST(Kappa, IidIteratesGiveFlatRatio) {
  const auto ks = gavg::log_checkpoints(10000, 20);
  const auto ts = synthetic_iterates(400, ks, 0.0, 0.0, 3, 12);
  const auto agg = gavg::aggregate(ts, ks);
  const auto est = gavg::estimate_kappa(*agg.moments, 10000, 10, 1000);
  EXPECT_NEAR(est.kappa_hat, 0.0, 0.3);
}

TEST(Kappa, DeterministicTrajectoriesAreDataError) {
  const std::vector<std::int64_t> ks{1, 10, 100, 1000, 10000, 100000};
  auto ts = synthetic_iterates(60, ks, 1.0, 1.0, 2, 1);
  for (auto& t : ts)
    for (auto& e : t.entries) e.iterate = Vector::Constant(2, 1.0 / double(e.k));
  const auto agg = gavg::aggregate(ts, ks);
  EXPECT_THROW(gavg::estimate_kappa(*agg.moments, 100000, 1, 10000), gavg::DataError);
}

TEST(Kappa, PreconditionChecks) {
  const std::vector<std::int64_t> ks{1, 10, 100, 1000, 10000, 100000};
  const auto few = gavg::aggregate(synthetic_iterates(10, ks, 1, 1, 2, 1), ks);
  EXPECT_THROW(gavg::estimate_kappa(*few.moments, 100000, 1, 10000), gavg::UsageError);
  const auto many = gavg::aggregate(synthetic_iterates(60, ks, 1, 1, 2, 1), ks);
  EXPECT_THROW(gavg::estimate_kappa(*many.moments, 10000, 1, 1000), gavg::UsageError);
}

TEST(Kappa, RotationInvariant) {
  const auto ks = gavg::log_checkpoints(10000, 10);
  auto ts = synthetic_iterates(200, ks, 0.5, 1.0, 3, 13);
  const auto a = gavg::estimate_kappa(*gavg::aggregate(ts, ks).moments, 10000, 1, 1000);
  // Rotation about a random axis.
  const Eigen::Matrix3d q =
      Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  for (auto& t : ts)
    for (auto& e : t.entries) e.iterate = Vector(q * *e.iterate);
  const auto b = gavg::estimate_kappa(*gavg::aggregate(ts, ks).moments, 10000, 1, 1000);
  EXPECT_NEAR(a.kappa_hat, b.kappa_hat, 1e-9);
}

TEST(Csv, AggregateAndSummaryFormats) {
  const std::vector<Trace> ts{make_trace(0, {1, 10}, {1.0, 0.5}), make_trace(1, {1, 10}, {3.0, 0.5})};
  const std::vector<std::int64_t> cps{1, 10};
  std::ostringstream a;
  gavg::write_aggregate_csv(a, gavg::aggregate(ts, cps));
  EXPECT_EQ(a.str(), "k,mean_gap,var_gap\n1,2,2\n10,0.5,0\n");
  gavg::SummaryRow row;
  row.method = "sg";
  row.n_trials = 2;
  row.rate_slope = -1.0 / 3.0;
  std::ostringstream s;
  gavg::write_summary_csv(s, std::vector<gavg::SummaryRow>{row});
  EXPECT_EQ(s.str(),
            "method,p,s,sigma,n_trials,rate_slope,rate_r2,kappa_hat,varm_slope\n"
            "sg,nan,nan,nan,2,-0.333333333333,nan,nan,nan\n");
}

}  // namespace
