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

#ifndef GAVG_SCHEDULES_HPP
#define GAVG_SCHEDULES_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "gavg/core.hpp"
#include "gavg/trace.hpp"

namespace gavg {

/// Outcome of checking (s, sigma) against s > 4/l and alpha_1 <= 1/(L * MG1).
struct ValidityReport {
  bool s_gt_4_over_l = false;
  bool alpha1_leq_bound = false;
  double bound_used = 0.0;   // 1 / (L * MG1)
  double assumed_MG1 = 0.0;
  double alpha1 = 0.0;
  double s_min = 0.0;        // 4 / l, exclusive

  bool valid() const { return s_gt_4_over_l && alpha1_leq_bound; }

  std::string describe() const {
    std::string out;
    out += "s > 4/l (strict, 4/l = " + format_real(s_min) + "): ";
    out += s_gt_4_over_l ? "ok\n" : "VIOLATED\n";
    out += "alpha_1 = " + format_real(alpha1) + " <= 1/(L*MG1) = " + format_real(bound_used) +
           " (MG1 = " + format_real(assumed_MG1) + "): ";
    out += alpha1_leq_bound ? "ok\n" : "VIOLATED\n";
    return out;
  }
};

/// MG1 when the config does not override it: 3/2 (the k -> inf limit) when
/// M_V = 0, otherwise 2.
inline double default_mg1(const SmoothnessConstants& c) { return c.M_V == 0.0 ? 1.5 : 2.0; }

/// Smallest sigma putting alpha_1 exactly on the 1/(L * MG1) bound.
inline double auto_sigma(double s, const SmoothnessConstants& c, double mg1) {
  return s * c.L * mg1 - 1.0;
}

inline ValidityReport validate(double s, double sigma, const SmoothnessConstants& c, double mg1) {
  if (!(s > 0.0)) throw UsageError("schedule: s must be positive");
  if (!(sigma > 0.0)) throw UsageError("schedule: sigma must be positive");
  if (!(mg1 > 0.0)) throw UsageError("schedule: MG1 must be positive");
  c.check();
  ValidityReport r;
  r.s_min = 4.0 / c.l;
  r.s_gt_4_over_l = s > r.s_min;
  r.assumed_MG1 = mg1;
  r.bound_used = 1.0 / (c.L * mg1);
  r.alpha1 = s / (1.0 + sigma);
  // auto_sigma lands on the bound up to rounding; allow a few ulps.
  r.alpha1_leq_bound = r.alpha1 <= r.bound_used * (1.0 + 1e-12);
  return r;
}

/// alpha_k = s / (k + sigma).
struct DecaySchedule {
  double s = 1.0;
  double sigma = 1.0;
  std::optional<ValidityReport> constraint_report;

  /// Builds a schedule and checks it against `c`. `sigma` defaults to
  /// auto_sigma and `mg1` to default_mg1.
  static DecaySchedule checked(double s, std::optional<double> sigma, const SmoothnessConstants& c,
                               std::optional<double> mg1 = std::nullopt) {
    const double g = mg1.value_or(default_mg1(c));
    DecaySchedule out;
    out.s = s;
    out.sigma = sigma.value_or(auto_sigma(s, c, g));
    out.constraint_report = validate(out.s, out.sigma, c, g);
    return out;
  }

  double alpha(std::int64_t k) const {
    if (k < 1) throw UsageError("schedule: iteration index must be >= 1");
    return s / (static_cast<double>(k) + sigma);
  }

  /// Unchecked schedules are accepted; checked ones must have passed.
  bool usable() const { return !constraint_report || constraint_report->valid(); }
};

inline double alpha(const DecaySchedule& schedule, std::int64_t k) { return schedule.alpha(k); }

/// Either a decaying schedule or a fixed stepsize; what the step functions take.
class Stepsize {
 public:
  static Stepsize fixed(double a) {
    if (!(a > 0.0)) throw UsageError("fixed stepsize must be positive");
    Stepsize st;
    st.fixed_ = a;
    return st;
  }
  static Stepsize decay(DecaySchedule d) {
    Stepsize st;
    st.decay_ = std::move(d);
    return st;
  }

  double operator()(std::int64_t k) const { return decay_ ? decay_->alpha(k) : *fixed_; }

  bool is_fixed() const { return fixed_.has_value(); }
  const std::optional<DecaySchedule>& schedule() const { return decay_; }

  void require_usable() const {
    if (decay_ && !decay_->usable())
      throw ConfigError("refusing to step with an invalid schedule:\n" +
                        decay_->constraint_report->describe());
  }

  std::string id() const {
    if (fixed_) return "fixed(alpha=" + format_real(*fixed_) + ")";
    return "decay(s=" + format_real(decay_->s) + ",sigma=" + format_real(decay_->sigma) + ")";
  }

 private:
  Stepsize() = default;
  std::optional<double> fixed_;
  std::optional<DecaySchedule> decay_;
};

}  // namespace gavg

#endif  // GAVG_SCHEDULES_HPP
