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

#ifndef GAVG_CORE_HPP
#define GAVG_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace gavg {

inline constexpr const char* kVersion = "0.1.0";

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error taxonomy. Callers (notably the CLI) map these onto exit codes.

/// Caller violated an operation's precondition.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration is well-formed but not admissible (invalid schedule,
/// unsupported method/problem pairing, reference solve that did not converge).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data cannot support the requested computation (missing checkpoint,
/// nonpositive value under a log, zero variance).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric argument outside a function's domain (gamma poles, nonpositive
/// contraction factors).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Strong convexity modulus `l`, gradient Lipschitz constant `L`, and the
/// variance-bound coefficients: V[g(x)] <= M + M_V * |grad F(x)|^2.
struct SmoothnessConstants {
  double l = 1.0;
  double L = 1.0;
  double M = 0.0;
  double M_V = 0.0;

  void check() const {
    if (!(l > 0.0) || !(l <= L) || !std::isfinite(L))
      throw UsageError("smoothness constants require 0 < l <= L < inf");
    if (!(M >= 0.0) || !(M_V >= 0.0))
      throw UsageError("variance-bound coefficients must be nonnegative");
  }

  /// Right-hand side of the variance bound at a point with squared gradient
  /// norm `grad_norm_sq`.
  double variance_bound(double grad_norm_sq) const { return M + M_V * grad_norm_sq; }
};

class RngStream;

/// Contract every test problem satisfies. `gap(x)` is F(x) - F* evaluated in
/// the most accurate form the problem admits (quadratic forms avoid the
/// cancellation in F(x) - F*).
template <typename P>
concept Objective = requires(const P& p, const Vector& x, Vector& out, RngStream& rng) {
  { p.dim() } -> std::convertible_to<Eigen::Index>;
  { p.value(x) } -> std::convertible_to<double>;
  { p.gap(x) } -> std::convertible_to<double>;
  { p.full_gradient(x) } -> std::convertible_to<Vector>;
  p.stochastic_gradient(x, rng, out);
  { p.constants() } -> std::convertible_to<SmoothnessConstants>;
  { p.minimizer() } -> std::convertible_to<Vector>;
  { p.fstar() } -> std::convertible_to<double>;
  { p.reference_tolerance() } -> std::convertible_to<double>;
};

/// Finite-sum problems additionally expose their components (SVRG needs them).
template <typename P>
concept FiniteSumObjective = Objective<P> && requires(const P& p, const Vector& x,
                                                      Eigen::Index i, Vector& out) {
  { p.n_components() } -> std::convertible_to<Eigen::Index>;
  p.component_gradient(i, x, out);
};

inline void check_dim(const Vector& x, Eigen::Index dim, const char* what) {
  if (x.size() != dim)
    throw UsageError(std::string(what) + ": expected dimension " + std::to_string(dim) +
                     ", got " + std::to_string(x.size()));
}

}  // namespace gavg

#endif  // GAVG_CORE_HPP
