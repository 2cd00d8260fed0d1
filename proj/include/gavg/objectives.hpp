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

#ifndef GAVG_OBJECTIVES_HPP
#define GAVG_OBJECTIVES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "gavg/core.hpp"
#include "gavg/rng.hpp"

namespace gavg {

/// How a stochastic gradient is drawn.
///  - additive_gaussian: g = grad F(x) + sigma * zeta, zeta ~ N(0, I).
///  - subsample: g = (1/batch) sum of component gradients at indices drawn
///    uniformly with replacement; batch = n means the exact full gradient.
///    Finite-sum problems only.
struct NoiseModel {
  enum class Kind { additive_gaussian, subsample };
  Kind kind = Kind::additive_gaussian;
  double sigma = 0.0;
  std::int64_t batch = 1;

  static NoiseModel additive(double sigma) { return {Kind::additive_gaussian, sigma, 1}; }
  static NoiseModel subsample(std::int64_t batch) { return {Kind::subsample, 0.0, batch}; }

  void check() const {
    if (kind == Kind::additive_gaussian && !(sigma >= 0.0))
      throw UsageError("noise sigma must be nonnegative");
    if (kind == Kind::subsample && batch < 1) throw UsageError("subsample batch must be >= 1");
  }

  std::string name() const {
    return kind == Kind::additive_gaussian ? "additive_gaussian" : "subsample";
  }
};

namespace detail {

inline void add_gaussian(Vector& out, double sigma, RngStream& rng) {
  if (sigma == 0.0) return;
  double pair[2];
  Eigen::Index i = 0;
  for (; i + 1 < out.size(); i += 2) {
    rng.fill_normal(pair);
    out[i] += sigma * pair[0];
    out[i + 1] += sigma * pair[1];
  }
  if (i < out.size()) out[i] += sigma * rng.normal();
}

inline double max_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// log(1 + exp(-m)) without overflow.
inline double logistic_loss(double margin) {
  return margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

// 1 / (1 + exp(m)), the derivative magnitude of logistic_loss.
inline double logistic_weight(double margin) {
  if (margin >= 0.0) {
    const double e = std::exp(-margin);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(margin));
}

}  // namespace detail

/// F(x) = 1/2 x^T diag(a) x - b^T x with additive Gaussian gradient noise.
class QuadraticProblem {
 public:
  QuadraticProblem(Vector a_diag, Vector b, NoiseModel noise)
      : a_(std::move(a_diag)), b_(std::move(b)), noise_(noise) {
    if (a_.size() < 1) throw UsageError("quadratic: dimension must be >= 1");
    if (b_.size() != a_.size()) throw UsageError("quadratic: b and A_diag sizes differ");
    if (!(a_.minCoeff() > 0.0)) throw UsageError("quadratic: A_diag entries must be positive");
    noise_.check();
    if (noise_.kind != NoiseModel::Kind::additive_gaussian)
      throw UsageError("quadratic: only additive_gaussian noise is defined");
    xstar_ = b_.cwiseQuotient(a_);
    fstar_ = -0.5 * b_.dot(xstar_);
    constants_.l = a_.minCoeff();
    constants_.L = a_.maxCoeff();
    constants_.M = noise_.sigma * noise_.sigma * static_cast<double>(a_.size());
    constants_.M_V = 0.0;
  }

  Eigen::Index dim() const { return a_.size(); }
  const Vector& a_diag() const { return a_; }
  const Vector& b() const { return b_; }
  const NoiseModel& noise() const { return noise_; }
  SmoothnessConstants constants() const { return constants_; }
  Vector minimizer() const { return xstar_; }
  double fstar() const { return fstar_; }
  double reference_tolerance() const { return 1e-10 * std::max(1.0, std::abs(fstar_)); }

  double value(const Vector& x) const {
    check_dim(x, dim(), "quadratic value");
    return 0.5 * x.dot(a_.cwiseProduct(x)) - b_.dot(x);
  }

  double gap(const Vector& x) const {
    check_dim(x, dim(), "quadratic gap");
    const Vector e = x - xstar_;
    return 0.5 * e.dot(a_.cwiseProduct(e));
  }

  Vector full_gradient(const Vector& x) const {
    check_dim(x, dim(), "full_gradient");
    return a_.cwiseProduct(x) - b_;
  }

  void stochastic_gradient(const Vector& x, RngStream& rng, Vector& out) const {
    check_dim(x, dim(), "stochastic_gradient");
    out.resize(dim());
    out.noalias() = a_.cwiseProduct(x) - b_;
    detail::add_gaussian(out, noise_.sigma, rng);
  }

 private:
  Vector a_;
  Vector b_;
  NoiseModel noise_;
  Vector xstar_;
  double fstar_ = 0.0;
  SmoothnessConstants constants_;
};

/// F(x) = (1/n) sum_i 1/2 (a_i^T x - y_i)^2 + ridge/2 |x|^2.
class FiniteSumLeastSquares {
 public:
  FiniteSumLeastSquares(Matrix rows, Vector targets, double ridge, NoiseModel noise)
      : rows_(std::move(rows)), targets_(std::move(targets)), ridge_(ridge), noise_(noise) {
    if (rows_.rows() < 1 || rows_.cols() < 1) throw UsageError("least squares: empty data");
    if (targets_.size() != rows_.rows()) throw UsageError("least squares: target count mismatch");
    if (!(ridge_ >= 0.0)) throw UsageError("least squares: ridge must be nonnegative");
    noise_.check();
    const double n = static_cast<double>(rows_.rows());
    const Eigen::Index d = rows_.cols();
    gram_ = rows_.transpose() * rows_ / n;
    hessian_ = gram_ + ridge_ * Matrix::Identity(d, d);
    Eigen::LDLT<Matrix> ldlt(hessian_);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw ConfigError("least squares: Hessian is not positive definite");
    xstar_ = ldlt.solve(rows_.transpose() * targets_ / n);
    fstar_ = value(xstar_);
    constants_.l = detail::min_eigenvalue(hessian_);
    constants_.L = detail::max_eigenvalue(hessian_);
    if (!(constants_.l > 0.0)) throw ConfigError("least squares: problem is not strongly convex");
    max_component_L_ = rows_.rowwise().squaredNorm().maxCoeff() + ridge_;
    set_variance_constants();
  }

  Eigen::Index dim() const { return rows_.cols(); }
  Eigen::Index n_components() const { return rows_.rows(); }
  const Matrix& rows() const { return rows_; }
  const Vector& targets() const { return targets_; }
  double ridge() const { return ridge_; }
  const Matrix& hessian() const { return hessian_; }
  const NoiseModel& noise() const { return noise_; }
  SmoothnessConstants constants() const { return constants_; }
  /// Largest Lipschitz constant among the component gradients.
  double max_component_L() const { return max_component_L_; }
  Vector minimizer() const { return xstar_; }
  double fstar() const { return fstar_; }
  double reference_tolerance() const { return 1e-10 * std::max(1.0, std::abs(fstar_)); }

  double value(const Vector& x) const {
    check_dim(x, dim(), "least squares value");
    const Vector r = rows_ * x - targets_;
    return 0.5 * r.squaredNorm() / static_cast<double>(rows_.rows()) +
           0.5 * ridge_ * x.squaredNorm();
  }

  double gap(const Vector& x) const {
    check_dim(x, dim(), "least squares gap");
    const Vector e = x - xstar_;
    return 0.5 * e.dot(hessian_ * e);
  }

  Vector full_gradient(const Vector& x) const {
    check_dim(x, dim(), "full_gradient");
    const Vector r = rows_ * x - targets_;
    return rows_.transpose() * r / static_cast<double>(rows_.rows()) + ridge_ * x;
  }

  void component_gradient(Eigen::Index i, const Vector& x, Vector& out) const {
    const double r = rows_.row(i).dot(x) - targets_[i];
    out.noalias() = r * rows_.row(i).transpose() + ridge_ * x;
  }

  void stochastic_gradient(const Vector& x, RngStream& rng, Vector& out) const {
    check_dim(x, dim(), "stochastic_gradient");
    out.resize(dim());
    if (noise_.kind == NoiseModel::Kind::additive_gaussian) {
      out = full_gradient(x);
      detail::add_gaussian(out, noise_.sigma, rng);
      return;
    }
    if (noise_.batch == rows_.rows()) {  // full batch: no sampling
      out = full_gradient(x);
      return;
    }
    out.setZero();
    const auto n = static_cast<std::uint64_t>(rows_.rows());
    for (std::int64_t b = 0; b < noise_.batch; ++b) {
      const auto i = static_cast<Eigen::Index>(rng.index(n));
      out.noalias() += (rows_.row(i).dot(x) - targets_[i]) * rows_.row(i).transpose();
    }
    out /= static_cast<double>(noise_.batch);
    out.noalias() += ridge_ * x;
  }

 private:
  // Subsample variance: with e = x - x*, D_i = a_i a_i^T - gram and
  // u_i = grad f_i(x*), one draw has variance (1/n) sum |D_i e + u_i|^2,
  // which is at most 2 V(x*) + 2 lambda_max((1/n) sum D_i^2) |e|^2, and
  // |e| <= |grad F(x)| / l.
  void set_variance_constants() {
    if (noise_.kind == NoiseModel::Kind::additive_gaussian) {
      constants_.M = noise_.sigma * noise_.sigma * static_cast<double>(dim());
      constants_.M_V = 0.0;
      return;
    }
    const double n = static_cast<double>(rows_.rows());
    const Vector row_sq = rows_.rowwise().squaredNorm();
    const Matrix second = rows_.transpose() * row_sq.asDiagonal() * rows_ / n - gram_ * gram_;
    double v_star = 0.0;
    Vector g(dim());
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      component_gradient(i, xstar_, g);
      v_star += g.squaredNorm();
    }
    v_star /= n;
    const double batch = static_cast<double>(noise_.batch);
    const double lam = std::max(0.0, detail::max_eigenvalue(second));
    constants_.M = 2.0 * v_star / batch;
    constants_.M_V = 2.0 * lam / (batch * constants_.l * constants_.l);
  }

  Matrix rows_;
  Vector targets_;
  double ridge_;
  NoiseModel noise_;
  Matrix gram_;
  Matrix hessian_;
  Vector xstar_;
  double fstar_ = 0.0;
  double max_component_L_ = 0.0;
  SmoothnessConstants constants_;
};

/// Reference-solve controls for problems without a closed-form minimizer.
struct ReferenceSolveOptions {
  double grad_tol = 1e-12;
  std::int64_t max_iterations = 2'000'000;
};

/// F(x) = (1/n) sum_i log(1 + exp(-y_i a_i^T x)) + ridge/2 |x|^2, y_i in {-1, +1}.
class LogisticL2Problem {
 public:
  LogisticL2Problem(Matrix rows, Vector labels, double ridge, NoiseModel noise,
                    ReferenceSolveOptions opts = {})
      : rows_(std::move(rows)), labels_(std::move(labels)), ridge_(ridge), noise_(noise) {
    if (rows_.rows() < 1 || rows_.cols() < 1) throw UsageError("logistic: empty data");
    if (labels_.size() != rows_.rows()) throw UsageError("logistic: label count mismatch");
    for (Eigen::Index i = 0; i < labels_.size(); ++i)
      if (labels_[i] != 1.0 && labels_[i] != -1.0)
        throw UsageError("logistic: labels must be -1 or +1");
    if (!(ridge_ > 0.0)) throw UsageError("logistic: ridge must be positive");
    noise_.check();
    const double n = static_cast<double>(rows_.rows());
    constants_.l = ridge_;
    constants_.L = ridge_ + detail::max_eigenvalue(rows_.transpose() * rows_) / (4.0 * n);
    max_component_L_ = ridge_ + 0.25 * rows_.rowwise().squaredNorm().maxCoeff();
    solve_reference(opts);
    set_variance_constants();
  }

  Eigen::Index dim() const { return rows_.cols(); }
  Eigen::Index n_components() const { return rows_.rows(); }
  const Matrix& rows() const { return rows_; }
  const Vector& labels() const { return labels_; }
  double ridge() const { return ridge_; }
  const NoiseModel& noise() const { return noise_; }
  SmoothnessConstants constants() const { return constants_; }
  double max_component_L() const { return max_component_L_; }
  Vector minimizer() const { return xstar_; }
  double fstar() const { return fstar_; }
  double reference_tolerance() const { return 1e-8 * std::max(1.0, std::abs(fstar_)); }
  std::int64_t reference_iterations() const { return reference_iterations_; }

  double value(const Vector& x) const {
    check_dim(x, dim(), "logistic value");
    const Vector margins = (rows_ * x).cwiseProduct(labels_);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) sum += detail::logistic_loss(margins[i]);
    return sum / static_cast<double>(rows_.rows()) + 0.5 * ridge_ * x.squaredNorm();
  }

  double gap(const Vector& x) const { return value(x) - fstar_; }

  Vector full_gradient(const Vector& x) const {
    check_dim(x, dim(), "full_gradient");
    const Vector margins = (rows_ * x).cwiseProduct(labels_);
    Vector coef(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i)
      coef[i] = -labels_[i] * detail::logistic_weight(margins[i]);
    return rows_.transpose() * coef / static_cast<double>(rows_.rows()) + ridge_ * x;
  }

  void component_gradient(Eigen::Index i, const Vector& x, Vector& out) const {
    const double m = labels_[i] * rows_.row(i).dot(x);
    out.noalias() = (-labels_[i] * detail::logistic_weight(m)) * rows_.row(i).transpose();
    out.noalias() += ridge_ * x;
  }

  void stochastic_gradient(const Vector& x, RngStream& rng, Vector& out) const {
    check_dim(x, dim(), "stochastic_gradient");
    out.resize(dim());
    if (noise_.kind == NoiseModel::Kind::additive_gaussian) {
      out = full_gradient(x);
      detail::add_gaussian(out, noise_.sigma, rng);
      return;
    }
    if (noise_.batch == rows_.rows()) {  // full batch: no sampling
      out = full_gradient(x);
      return;
    }
    out.setZero();
    const auto n = static_cast<std::uint64_t>(rows_.rows());
    for (std::int64_t b = 0; b < noise_.batch; ++b) {
      const auto i = static_cast<Eigen::Index>(rng.index(n));
      const double m = labels_[i] * rows_.row(i).dot(x);
      out.noalias() += (-labels_[i] * detail::logistic_weight(m)) * rows_.row(i).transpose();
    }
    out /= static_cast<double>(noise_.batch);
    out.noalias() += ridge_ * x;
  }

 private:
  // Fixed-step gradient descent at 1/L to the requested gradient tolerance,
  // then continued to a 10x tighter tolerance; the two minimum values must
  // agree or the reference is rejected.
  void solve_reference(const ReferenceSolveOptions& opts) {
    Vector x = Vector::Zero(dim());
    const double step = 1.0 / constants_.L;
    std::int64_t it = 0;
    auto descend_to = [&](double tol) {
      for (Vector g = full_gradient(x); g.norm() > tol; g = full_gradient(x)) {
        if (++it > opts.max_iterations)
          throw ConfigError("logistic: reference solve did not reach |grad F| <= " +
                            std::to_string(tol) + " within " +
                            std::to_string(opts.max_iterations) + " iterations");
        x -= step * g;
      }
    };
    descend_to(opts.grad_tol);
    const double coarse = value(x);
    descend_to(opts.grad_tol / 10.0);
    fstar_ = value(x);
    xstar_ = x;
    reference_iterations_ = it;
    if (std::abs(coarse - fstar_) > 1e-10 * std::max(1.0, std::abs(fstar_)))
      throw ConfigError("logistic: reference minimum not stable under tolerance refinement");
  }

  // Same argument as for least squares, with |grad f_i(x) - grad f_i(x*)| <=
  // |a_i|^2 |e| / 4 for the loss part (the ridge part cancels in the variance).
  void set_variance_constants() {
    if (noise_.kind == NoiseModel::Kind::additive_gaussian) {
      constants_.M = noise_.sigma * noise_.sigma * static_cast<double>(dim());
      constants_.M_V = 0.0;
      return;
    }
    const double n = static_cast<double>(rows_.rows());
    double v_star = 0.0;
    double fourth = 0.0;
    Vector g(dim());
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      component_gradient(i, xstar_, g);
      v_star += g.squaredNorm();
      const double sq = rows_.row(i).squaredNorm();
      fourth += sq * sq;
    }
    v_star /= n;
    fourth /= n;
    const double batch = static_cast<double>(noise_.batch);
    constants_.M = 2.0 * v_star / batch;
    constants_.M_V = 2.0 * (fourth / 16.0) / (batch * constants_.l * constants_.l);
  }

  Matrix rows_;
  Vector labels_;
  double ridge_;
  NoiseModel noise_;
  Vector xstar_;
  double fstar_ = 0.0;
  double max_component_L_ = 0.0;
  std::int64_t reference_iterations_ = 0;
  SmoothnessConstants constants_;
};

// --- synthetic generators -------------------------------------------------
//
// All data draws come from RngStream(data_seed, kDataStream), so the data
// seed alone reproduces a problem.

inline constexpr std::uint64_t kDataStream = 0xDA7A'0000'0000'0000ull;

/// Diagonal spectrum evenly spaced on [l, L]; b ~ N(0, I).
inline QuadraticProblem make_quadratic(Eigen::Index dim, double l, double L, NoiseModel noise,
                                       std::uint64_t data_seed) {
  if (dim < 1) throw UsageError("quadratic: dimension must be >= 1");
  if (!(l > 0.0) || !(l <= L)) throw UsageError("quadratic: need 0 < l <= L");
  Vector a = dim == 1 ? Vector(Vector::Constant(1, l)) : Vector(Vector::LinSpaced(dim, l, L));
  RngStream rng(data_seed, kDataStream);
  Vector b(dim);
  rng.fill_normal({b.data(), static_cast<std::size_t>(dim)});
  return QuadraticProblem(std::move(a), std::move(b), noise);
}

/// Gaussian design, targets from a Gaussian planted model plus N(0, 0.25) noise.
inline FiniteSumLeastSquares make_least_squares(Eigen::Index n, Eigen::Index dim, double ridge,
                                                NoiseModel noise, std::uint64_t data_seed) {
  if (n < 1 || dim < 1) throw UsageError("least squares: n and dim must be >= 1");
  RngStream rng(data_seed, kDataStream);
  Matrix rows(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) rows(i, j) = rng.normal();
  Vector planted(dim);
  for (Eigen::Index j = 0; j < dim; ++j) planted[j] = rng.normal();
  Vector targets = rows * planted;
  for (Eigen::Index i = 0; i < n; ++i) targets[i] += 0.5 * rng.normal();
  return FiniteSumLeastSquares(std::move(rows), std::move(targets), ridge, noise);
}

/// Gaussian design, labels drawn from the logistic model of a planted vector.
inline LogisticL2Problem make_logistic(Eigen::Index n, Eigen::Index dim, double ridge,
                                       NoiseModel noise, std::uint64_t data_seed) {
  if (n < 1 || dim < 1) throw UsageError("logistic: n and dim must be >= 1");
  RngStream rng(data_seed, kDataStream);
  Matrix rows(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) rows(i, j) = rng.normal();
  Vector planted(dim);
  for (Eigen::Index j = 0; j < dim; ++j) planted[j] = rng.normal();
  Vector labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-rows.row(i).dot(planted)));
    labels[i] = rng.uniform() < p ? 1.0 : -1.0;
  }
  return LogisticL2Problem(std::move(rows), std::move(labels), ridge, noise);
}

/// Runtime-selected problem, used by the experiment runner.
using AnyProblem = std::variant<QuadraticProblem, FiniteSumLeastSquares, LogisticL2Problem>;

/// Adapts AnyProblem to the Objective contract.
class Problem {
  template <typename F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), p_);
  }

 public:
  explicit Problem(AnyProblem p) : p_(std::move(p)) {}

  const AnyProblem& variant() const { return p_; }

  std::string kind() const {
    return std::visit(
        [](const auto& p) -> std::string {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, QuadraticProblem>) return "quadratic";
          else if constexpr (std::is_same_v<T, FiniteSumLeastSquares>) return "least_squares";
          else return "logistic";
        },
        p_);
  }

  std::optional<Eigen::Index> n_components() const {
    return std::visit(
        [](const auto& p) -> std::optional<Eigen::Index> {
          if constexpr (FiniteSumObjective<std::decay_t<decltype(p)>>) return p.n_components();
          else return std::nullopt;
        },
        p_);
  }

  Eigen::Index dim() const { return visit([](const auto& p) { return p.dim(); }); }
  double value(const Vector& x) const { return visit([&](const auto& p) { return p.value(x); }); }
  double gap(const Vector& x) const { return visit([&](const auto& p) { return p.gap(x); }); }
  Vector full_gradient(const Vector& x) const {
    return visit([&](const auto& p) { return p.full_gradient(x); });
  }
  void stochastic_gradient(const Vector& x, RngStream& rng, Vector& out) const {
    visit([&](const auto& p) { p.stochastic_gradient(x, rng, out); });
  }
  SmoothnessConstants constants() const { return visit([](const auto& p) { return p.constants(); }); }
  Vector minimizer() const { return visit([](const auto& p) { return p.minimizer(); }); }
  double fstar() const { return visit([](const auto& p) { return p.fstar(); }); }
  double reference_tolerance() const {
    return visit([](const auto& p) { return p.reference_tolerance(); });
  }

 private:
  AnyProblem p_;
};

}  // namespace gavg

#endif  // GAVG_OBJECTIVES_HPP
