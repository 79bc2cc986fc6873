/**
 * @file core.hpp
 * @brief Split autonomous ODE problems U' = f(U) + g(U) and Jacobian utilities.
 *
 * f is the non-stiff part (treated explicitly by the semi-implicit schemes),
 * g the stiff part. Every problem carries analytic Jacobians of both parts.
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace taylor_ode {

inline constexpr int Dynamic = Eigen::Dynamic;

template <int Dim = Dynamic>
using Vector = Eigen::Matrix<double, Dim, 1>;

template <int Dim = Dynamic>
using Matrix = Eigen::Matrix<double, Dim, Dim>;

/// Raised when an argument violates a documented precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a user function returns NaN/Inf.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::ptrdiff_t component)
      : std::runtime_error(what), component_(component) {}
  [[nodiscard]] std::ptrdiff_t component() const noexcept { return component_; }

 private:
  std::ptrdiff_t component_;
};

template <class Derived>
[[nodiscard]] bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

namespace detail {

template <class Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v.derived().coeff(i))) {
      std::ostringstream os;
      os << what << ": non-finite value in component " << i;
      throw EvaluationError(os.str(), static_cast<std::ptrdiff_t>(i));
    }
  }
}

template <class Derived>
void require_size(const Eigen::MatrixBase<Derived>& v, Eigen::Index d, const char* what) {
  if (v.size() != d) {
    std::ostringstream os;
    os << what << ": expected length " << d << ", got " << v.size();
    throw ContractError(os.str());
  }
}

}  // namespace detail

/**
 * Right-hand side pair (f, g) with Jacobians.
 *
 * Dim is the compile-time dimension (Dynamic for runtime-sized problems).
 * Instances are immutable after construction; the stored callables must be
 * reentrant so a problem can be shared across threads.
 */
template <int Dim = Dynamic>
struct SplitProblem {
  using VectorType = Vector<Dim>;
  using MatrixType = Matrix<Dim>;
  using Field = std::function<VectorType(const VectorType&)>;
  using JacobianField = std::function<MatrixType(const VectorType&)>;

  int dimension = Dim == Dynamic ? 0 : Dim;
  Field f;
  Field g;
  JacobianField jac_f;
  JacobianField jac_g;
  std::string label;
};

template <int Dim = Dynamic>
struct IvpSpec {
  SplitProblem<Dim> problem;
  double t0 = 0.0;
  double t_end = 1.0;
  Vector<Dim> u0;
};

template <int Dim>
void validate(const IvpSpec<Dim>& ivp) {
  if (!(ivp.t_end >= ivp.t0)) {
    throw ContractError("IvpSpec: t_end must not precede t0");
  }
  detail::require_size(ivp.u0, ivp.problem.dimension, "IvpSpec.u0");
  detail::require_finite(ivp.u0, "IvpSpec.u0");
}

/// f(u) + g(u), with dimension and finiteness checks.
template <int Dim>
[[nodiscard]] Vector<Dim> eval_rhs(const SplitProblem<Dim>& problem, const Vector<Dim>& u) {
  detail::require_size(u, problem.dimension, "eval_rhs");
  Vector<Dim> out = problem.f(u) + problem.g(u);
  detail::require_finite(out, "eval_rhs");
  return out;
}

/// U'' = (J_f + J_g)(f + g).
template <int Dim>
[[nodiscard]] Vector<Dim> second_derivative(const SplitProblem<Dim>& problem,
                                            const Vector<Dim>& u) {
  detail::require_size(u, problem.dimension, "second_derivative");
  const Vector<Dim> rhs = problem.f(u) + problem.g(u);
  Vector<Dim> out = (problem.jac_f(u) + problem.jac_g(u)) * rhs;
  detail::require_finite(out, "second_derivative");
  return out;
}

/**
 * Central-difference Jacobian of `fun` at `u`, column by column, with step
 * h_i = h_rel * (1 + |u_i|).
 */
template <int Dim, class Fun>
[[nodiscard]] Matrix<Dim> finite_difference_jacobian(Fun&& fun, const Vector<Dim>& u,
                                                     double h_rel = 1e-6) {
  if (!(h_rel > 0.0)) {
    throw ContractError("finite_difference_jacobian: h_rel must be positive");
  }
  const Eigen::Index d = u.size();
  Matrix<Dim> jac(d, d);
  Vector<Dim> probe = u;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = h_rel * (1.0 + std::abs(u[j]));
    probe[j] = u[j] + h;
    const Vector<Dim> plus = fun(probe);
    probe[j] = u[j] - h;
    const Vector<Dim> minus = fun(probe);
    probe[j] = u[j];
    detail::require_finite(plus, "finite_difference_jacobian");
    detail::require_finite(minus, "finite_difference_jacobian");
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

/// Largest entrywise violation of |a - b| <= atol + rtol * |b|, as a ratio (<= 1 passes).
template <int Dim>
[[nodiscard]] double jacobian_mismatch(const Matrix<Dim>& analytic, const Matrix<Dim>& numeric,
                                       double atol = 1e-4, double rtol = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      const double bound = atol + rtol * std::abs(numeric(i, j));
      worst = std::max(worst, std::abs(analytic(i, j) - numeric(i, j)) / bound);
    }
  }
  return worst;
}

}  // namespace taylor_ode
