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

#ifndef GAVG_OPTIMIZERS_HPP
#define GAVG_OPTIMIZERS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gavg/core.hpp"
#include "gavg/rng.hpp"
#include "gavg/schedules.hpp"

namespace gavg {

/// Normalized weights w_j = j^p / sum_{i<=k} i^p for j = 1..k. Terms are
/// formed as (j/k)^p <= 1 so large p cannot overflow.
inline std::vector<double> weights(std::int64_t k, double p) {
  if (k < 1) throw UsageError("weights: k must be >= 1");
  if (!(p >= 0.0)) throw UsageError("weights: p must be nonnegative");
  std::vector<double> w(static_cast<std::size_t>(k));
  const double kd = static_cast<double>(k);
  double total = 0.0;
  for (std::int64_t j = 1; j <= k; ++j) {
    w[static_cast<std::size_t>(j - 1)] = std::pow(static_cast<double>(j) / kd, p);
    total += w[static_cast<std::size_t>(j - 1)];
  }
  for (double& x : w) x /= total;
  return w;
}

// ---------------------------------------------------------------------------
// Accelerated method: weighted gradient averaging with weights j^p.
//
//   v_k    = ((k-1)/k)^p v_{k-1} - g_k           (v_1 = -g_1)
//   beta_k = ((k-1)/k)^p beta_{k-1} + 1          (= sum_{i<=k} (i/k)^p)
//   x_{k+1} = x_k + (alpha_k / beta_k) v_k
//
// so that v_k / beta_k equals -sum_j j^p g_j / sum_i i^p. Old gradients fade
// by ((k-1)/k)^p per step and may underflow to zero; that is harmless.
// ---------------------------------------------------------------------------

struct AcceleratedState {
  Vector x;
  Vector v;
  double beta = 0.0;
  std::int64_t k = 0;  // steps taken
  double p = 20.0;
  Vector direction;    // m_k = v_k / beta_k of the last step
  Vector g;            // scratch

  static AcceleratedState start(Vector x1, double p) {
    if (!(p >= 0.0)) throw UsageError("accelerated method: p must be nonnegative");
    AcceleratedState s;
    s.v = Vector::Zero(x1.size());
    s.direction = Vector::Zero(x1.size());
    s.g = Vector::Zero(x1.size());
    s.x = std::move(x1);
    s.p = p;
    return s;
  }

  const Vector& iterate() const { return x; }
  Vector estimate() const { return x; }
};

template <Objective P>
void accel_step(AcceleratedState& st, const P& problem, const Stepsize& stepsize, RngStream& rng) {
  stepsize.require_usable();
  const std::int64_t k = st.k + 1;
  problem.stochastic_gradient(st.x, rng, st.g);
  if (k == 1) {
    st.v = -st.g;
    st.beta = 1.0;
  } else {
    const double fade = std::pow(static_cast<double>(k - 1) / static_cast<double>(k), st.p);
    st.v *= fade;
    st.v -= st.g;
    st.beta = st.beta * fade + 1.0;
  }
  st.direction = st.v / st.beta;
  st.x.noalias() += stepsize(k) * st.direction;
  st.k = k;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Plain stochastic gradient: x_{k+1} = x_k - alpha_k g_k.
struct SgState {
  Vector x;
  std::int64_t k = 0;
  Vector direction;
  Vector g;

  static SgState start(Vector x1) {
    SgState s;
    s.direction = Vector::Zero(x1.size());
    s.g = Vector::Zero(x1.size());
    s.x = std::move(x1);
    return s;
  }

  const Vector& iterate() const { return x; }
  Vector estimate() const { return x; }
};

template <Objective P>
void sg_step(SgState& st, const P& problem, const Stepsize& stepsize, RngStream& rng) {
  stepsize.require_usable();
  const std::int64_t k = st.k + 1;
  problem.stochastic_gradient(st.x, rng, st.g);
  st.direction = -st.g;
  st.x.noalias() -= stepsize(k) * st.g;
  st.k = k;
}

/// Heavy ball with fixed (alpha, beta) and x_0 := x_1:
///   x_{k+1} = x_k - alpha g_k + beta (x_k - x_{k-1}).
/// `velocity` is the displacement x_{k+1} - x_k = -alpha sum_i beta^{k-i} g_i.
struct SgmState {
  Vector x;
  Vector velocity;
  double beta = 0.9;
  double alpha = 0.01;
  double wsum = 0.0;  // sum_i beta^{k-i}
  std::int64_t k = 0;
  Vector direction;   // velocity / (alpha * wsum): the normalized average
  Vector g;

  static SgmState start(Vector x1, double alpha, double beta) {
    if (!(alpha > 0.0)) throw ConfigError("sgm: alpha must be positive");
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("sgm: beta must lie in [0, 1)");
    SgmState s;
    s.velocity = Vector::Zero(x1.size());
    s.direction = Vector::Zero(x1.size());
    s.g = Vector::Zero(x1.size());
    s.x = std::move(x1);
    s.alpha = alpha;
    s.beta = beta;
    return s;
  }

  const Vector& iterate() const { return x; }
  Vector estimate() const { return x; }
};

template <Objective P>
void sgm_step(SgmState& st, const P& problem, RngStream& rng) {
  if (!(st.beta >= 0.0 && st.beta < 1.0)) throw ConfigError("sgm: beta must lie in [0, 1)");
  problem.stochastic_gradient(st.x, rng, st.g);
  st.velocity *= st.beta;
  st.velocity.noalias() -= st.alpha * st.g;
  st.x += st.velocity;
  st.wsum = st.beta * st.wsum + 1.0;
  st.direction = st.velocity / (st.alpha * st.wsum);
  ++st.k;
}

/// Uniform gradient averaging: x_{k+1} = x_k - (alpha_k / k) sum_{i<=k} g_i.
struct GradAvgState {
  Vector x;
  Vector gsum;
  std::int64_t k = 0;
  Vector direction;  // -gsum / k
  Vector g;

  static GradAvgState start(Vector x1) {
    GradAvgState s;
    s.gsum = Vector::Zero(x1.size());
    s.direction = Vector::Zero(x1.size());
    s.g = Vector::Zero(x1.size());
    s.x = std::move(x1);
    return s;
  }

  const Vector& iterate() const { return x; }
  Vector estimate() const { return x; }
};

template <Objective P>
void gradavg_step(GradAvgState& st, const P& problem, const Stepsize& stepsize, RngStream& rng) {
  stepsize.require_usable();
  const std::int64_t k = st.k + 1;
  problem.stochastic_gradient(st.x, rng, st.g);
  st.gsum += st.g;
  st.direction = -st.gsum / static_cast<double>(k);
  st.x.noalias() += stepsize(k) * st.direction;
  st.k = k;
}

/// Plain SG whose reported estimate is the running mean of the iterates.
/// After k steps, xbar = (1/k) sum_{i<=k} x_i.
struct IterateAvgState {
  SgState inner;
  Vector xbar;
  std::int64_t k = 0;

  static IterateAvgState start(Vector x1) {
    IterateAvgState s;
    s.xbar = Vector::Zero(x1.size());
    s.inner = SgState::start(std::move(x1));
    return s;
  }

  const Vector& iterate() const { return inner.x; }
  const Vector& direction() const { return inner.direction; }
  /// Mean of x_1..x_{k+1}, i.e. including the current iterate.
  Vector estimate() const {
    return xbar + (inner.x - xbar) / static_cast<double>(k + 1);
  }
};

template <Objective P>
void iterate_avg_step(IterateAvgState& st, const P& problem, const Stepsize& stepsize,
                      RngStream& rng) {
  const std::int64_t k = st.k + 1;
  st.xbar += (st.inner.x - st.xbar) / static_cast<double>(k);
  sg_step(st.inner, problem, stepsize, rng);
  st.k = k;
}

/// Linear-rate factor guaranteed for SVRG:
///   rho = 1/(1 - 2 alpha L) * (1/(m alpha l) + 2 alpha L).
/// Meaningful only for alpha < 1/(2L).
inline double svrg_rho(double alpha, std::int64_t m, double l, double L) {
  if (!(alpha > 0.0) || m < 1 || !(l > 0.0) || !(L >= l))
    throw UsageError("svrg_rho: need alpha > 0, m >= 1, 0 < l <= L");
  if (!(2.0 * alpha * L < 1.0)) throw DomainError("svrg_rho: requires alpha < 1/(2L)");
  return (1.0 / (1.0 - 2.0 * alpha * L)) *
         (1.0 / (static_cast<double>(m) * alpha * l) + 2.0 * alpha * L);
}

/// SVRG with the last inner iterate as the next snapshot. Each call is one
/// inner step; the full gradient at the snapshot is recomputed whenever an
/// outer loop begins.
struct SvrgState {
  Vector x;
  Vector snapshot;
  Vector snapshot_full_grad;
  std::int64_t m = 1;
  double alpha = 0.01;
  std::int64_t inner_counter = 0;
  std::int64_t k = 0;
  std::int64_t epochs = 0;  // completed outer loops
  Vector direction;
  Vector gi;
  Vector gs;

  static SvrgState start(Vector x1, double alpha, std::int64_t m) {
    if (!(alpha > 0.0)) throw ConfigError("svrg: alpha must be positive");
    if (m < 1) throw ConfigError("svrg: inner loop length must be >= 1");
    SvrgState s;
    const auto d = x1.size();
    s.snapshot = Vector::Zero(d);
    s.snapshot_full_grad = Vector::Zero(d);
    s.direction = Vector::Zero(d);
    s.gi = Vector::Zero(d);
    s.gs = Vector::Zero(d);
    s.x = std::move(x1);
    s.alpha = alpha;
    s.m = m;
    return s;
  }

  const Vector& iterate() const { return x; }
  Vector estimate() const { return x; }
};

template <FiniteSumObjective P>
void svrg_step(SvrgState& st, const P& problem, RngStream& rng) {
  if (st.inner_counter == 0) {
    st.snapshot = st.x;
    st.snapshot_full_grad = problem.full_gradient(st.snapshot);
  }
  const auto i =
      static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(problem.n_components())));
  problem.component_gradient(i, st.x, st.gi);
  problem.component_gradient(i, st.snapshot, st.gs);
  st.direction = st.gs - st.gi - st.snapshot_full_grad;
  st.x.noalias() += st.alpha * st.direction;
  ++st.k;
  if (++st.inner_counter == st.m) {
    st.inner_counter = 0;
    ++st.epochs;
  }
}

// Uniform interface: step(state, problem, stepsize, rng). SGM and SVRG run
// with the fixed alpha held in their state and ignore `stepsize`.

template <Objective P>
void step(AcceleratedState& s, const P& p, const Stepsize& a, RngStream& r) { accel_step(s, p, a, r); }
template <Objective P>
void step(SgState& s, const P& p, const Stepsize& a, RngStream& r) { sg_step(s, p, a, r); }
template <Objective P>
void step(GradAvgState& s, const P& p, const Stepsize& a, RngStream& r) { gradavg_step(s, p, a, r); }
template <Objective P>
void step(IterateAvgState& s, const P& p, const Stepsize& a, RngStream& r) {
  iterate_avg_step(s, p, a, r);
}
template <Objective P>
void step(SgmState& s, const P& p, const Stepsize&, RngStream& r) { sgm_step(s, p, r); }
template <FiniteSumObjective P>
void step(SvrgState& s, const P& p, const Stepsize&, RngStream& r) { svrg_step(s, p, r); }

inline const Vector& direction_of(const AcceleratedState& s) { return s.direction; }
inline const Vector& direction_of(const SgState& s) { return s.direction; }
inline const Vector& direction_of(const GradAvgState& s) { return s.direction; }
inline const Vector& direction_of(const IterateAvgState& s) { return s.direction(); }
inline const Vector& direction_of(const SgmState& s) { return s.direction; }
inline const Vector& direction_of(const SvrgState& s) { return s.direction; }

}  // namespace gavg

#endif  // GAVG_OPTIMIZERS_HPP
