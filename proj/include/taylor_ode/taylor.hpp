/**
 * @file taylor.hpp
 * @brief One-step Taylor schemes of order 1 and 2: explicit, semi-implicit, implicit.
 *
 * Every stepper is a pure map (u_n, dt) -> u_{n+1}. The semi-implicit schemes
 * freeze f, J_f and J_g at u_n and put only the stiff terms at the new level;
 * the implicit schemes evaluate everything at the new level.
 */
#pragma once

#include "taylor_ode/core.hpp"
#include "taylor_ode/newton.hpp"
#include "taylor_ode/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

namespace taylor_ode {

/// Raised when a step produces non-finite values.
class StepFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <int Dim>
struct StepResult {
  Vector<Dim> u_main;
  Vector<Dim> u_companion;
  std::optional<NewtonReport> newton_report;
  int p = 0;
  int q = 0;

  [[nodiscard]] bool converged() const { return !newton_report || newton_report->converged; }
};

namespace detail {

inline void require_positive_dt(double dt) {
  if (!(dt > 0.0)) throw ContractError("step: dt must be positive");
}

template <int Dim>
Vector<Dim> checked(Vector<Dim> v, const char* scheme) {
  if (!v.allFinite()) {
    throw StepFailure(std::string(scheme) + ": non-finite result");
  }
  return v;
}

inline NewtonReport merge(const NewtonReport& a, const NewtonReport& b) {
  return {a.converged && b.converged, a.iterations + b.iterations,
          std::max(a.final_residual_norm, b.final_residual_norm)};
}

template <int Dim>
using JacobianFn = std::function<Matrix<Dim>(const Vector<Dim>&)>;

template <int Dim>
Matrix<Dim> identity_like(const Vector<Dim>& u) {
  return Matrix<Dim>::Identity(u.size(), u.size());
}

/// Whichever of the explicit predictor and u_n has the smaller residual.
/// The explicit predictor is useless once dt |J_g| >> 1.
template <int Dim, class Residual>
Vector<Dim> pick_guess(Residual& residual, const Vector<Dim>& predictor, const Vector<Dim>& u_n) {
  const double rp = residual(predictor).cwiseAbs().maxCoeff();
  const double rn = residual(u_n).cwiseAbs().maxCoeff();
  return rn < rp || !std::isfinite(rp) ? u_n : predictor;
}

}  // namespace detail

/// U^{n+1} = U^n + dt (f^n + g^n).
template <int Dim>
[[nodiscard]] Vector<Dim> step_expl_t1(const SplitProblem<Dim>& problem, const Vector<Dim>& u_n,
                                       double dt) {
  detail::require_positive_dt(dt);
  detail::require_size(u_n, problem.dimension, "step_expl_t1");
  return detail::checked<Dim>(u_n + dt * (problem.f(u_n) + problem.g(u_n)), "EXPL_T1");
}

/// U^{n+1} = U^n + dt (f^n + g^n) + dt^2/2 (J_f^n + J_g^n)(f^n + g^n).
template <int Dim>
[[nodiscard]] Vector<Dim> step_expl_t2(const SplitProblem<Dim>& problem, const Vector<Dim>& u_n,
                                       double dt) {
  detail::require_positive_dt(dt);
  detail::require_size(u_n, problem.dimension, "step_expl_t2");
  const Vector<Dim> rhs = problem.f(u_n) + problem.g(u_n);
  const Matrix<Dim> jac = problem.jac_f(u_n) + problem.jac_g(u_n);
  return detail::checked<Dim>(u_n + dt * rhs + (0.5 * dt * dt) * (jac * rhs), "EXPL_T2");
}

/// Root of U - u_n - dt (f(u_n) + g(U)).
template <int Dim>
[[nodiscard]] NewtonResult<Dim> step_si_t1(const SplitProblem<Dim>& problem,
                                           const Vector<Dim>& u_n, double dt,
                                           const NewtonConfig& newton = {}) {
  const Vector<Dim> predictor = step_expl_t1(problem, u_n, dt);
  const Vector<Dim> base = u_n + dt * problem.f(u_n);
  auto residual = [&](const Vector<Dim>& u) -> Vector<Dim> {
    return u - base - dt * problem.g(u);
  };
  const detail::JacobianFn<Dim> jacobian = [&](const Vector<Dim>& u) -> Matrix<Dim> {
    return detail::identity_like<Dim>(u) - dt * problem.jac_g(u);
  };
  const Vector<Dim> guess = detail::pick_guess<Dim>(residual, predictor, u_n);
  auto out = newton_solve<Dim>(residual, jacobian, guess, newton);
  if (out.report.converged) detail::checked<Dim>(out.x, "SI_T1");
  return out;
}

/**
 * Second-order semi-implicit step: root of
 *
 *   U - u_n - dt (f^n + g(U)) - dt^2/2 [J_f^n (f^n + g^n) - J_g^n (f(U) + g(U))].
 *
 * On u' = lambda u + nu u this is (1 + z + (z^2 + z w)/2) / (1 - w + (z w + w^2)/2),
 * the same amplification factor as step_si_t2_printed, and it stays second
 * order when J_f and J_g do not commute.
 */
template <int Dim>
[[nodiscard]] NewtonResult<Dim> step_si_t2(const SplitProblem<Dim>& problem,
                                           const Vector<Dim>& u_n, double dt,
                                           const NewtonConfig& newton = {}) {
  const Vector<Dim> predictor = step_expl_t2(problem, u_n, dt);
  const Vector<Dim> f_n = problem.f(u_n);
  const Vector<Dim> rhs_n = f_n + problem.g(u_n);
  const Matrix<Dim> jf_n = problem.jac_f(u_n);
  const Matrix<Dim> jg_n = problem.jac_g(u_n);
  const double half_dt2 = 0.5 * dt * dt;
  const Vector<Dim> base = u_n + dt * f_n + half_dt2 * (jf_n * rhs_n);
  auto residual = [&](const Vector<Dim>& u) -> Vector<Dim> {
    const Vector<Dim> g = problem.g(u);
    return u - base - dt * g + half_dt2 * (jg_n * (problem.f(u) + g));
  };
  const detail::JacobianFn<Dim> jacobian = [&](const Vector<Dim>& u) -> Matrix<Dim> {
    const Matrix<Dim> jg = problem.jac_g(u);
    return detail::identity_like<Dim>(u) - dt * jg + half_dt2 * (jg_n * (problem.jac_f(u) + jg));
  };
  const Vector<Dim> guess = detail::pick_guess<Dim>(residual, predictor, u_n);
  auto out = newton_solve<Dim>(residual, jacobian, guess, newton);
  if (out.report.converged) detail::checked<Dim>(out.x, "SI_T2");
  return out;
}

/**
 * Literal form: root of
 *
 *   U - u_n - dt (f^n + g(U)) - dt^2/2 (J_f^n + J_g^n)(f^n - g(U)).
 *
 * Shares step_si_t2's scalar amplification factor but differs from the
 * explicit second-order step by dt^2 (J_g f - J_f g), so it is only first
 * order on systems whose Jacobians do not commute (Van der Pol, for one).
 * Not used by the drivers.
 */
template <int Dim>
[[nodiscard]] NewtonResult<Dim> step_si_t2_printed(const SplitProblem<Dim>& problem,
                                                   const Vector<Dim>& u_n, double dt,
                                                   const NewtonConfig& newton = {}) {
  const Vector<Dim> predictor = step_expl_t2(problem, u_n, dt);
  const Vector<Dim> f_n = problem.f(u_n);
  const Matrix<Dim> jac_n = problem.jac_f(u_n) + problem.jac_g(u_n);
  const double half_dt2 = 0.5 * dt * dt;
  const Vector<Dim> base = u_n + dt * f_n + half_dt2 * (jac_n * f_n);
  auto residual = [&](const Vector<Dim>& u) -> Vector<Dim> {
    const Vector<Dim> g = problem.g(u);
    return u - base - dt * g + half_dt2 * (jac_n * g);
  };
  const detail::JacobianFn<Dim> jacobian = [&](const Vector<Dim>& u) -> Matrix<Dim> {
    const Matrix<Dim> jg = problem.jac_g(u);
    return detail::identity_like<Dim>(u) - dt * jg + half_dt2 * (jac_n * jg);
  };
  const Vector<Dim> guess = detail::pick_guess<Dim>(residual, predictor, u_n);
  auto out = newton_solve<Dim>(residual, jacobian, guess, newton);
  if (out.report.converged) detail::checked<Dim>(out.x, "SI_T2 (printed)");
  return out;
}

/// Root of U - u_n - dt (f(U) + g(U)).
template <int Dim>
[[nodiscard]] NewtonResult<Dim> step_i_t1(const SplitProblem<Dim>& problem,
                                          const Vector<Dim>& u_n, double dt,
                                          const NewtonConfig& newton = {}) {
  const Vector<Dim> predictor = step_expl_t1(problem, u_n, dt);
  auto residual = [&](const Vector<Dim>& u) -> Vector<Dim> {
    return u - u_n - dt * (problem.f(u) + problem.g(u));
  };
  const detail::JacobianFn<Dim> jacobian = [&](const Vector<Dim>& u) -> Matrix<Dim> {
    return detail::identity_like<Dim>(u) - dt * (problem.jac_f(u) + problem.jac_g(u));
  };
  const Vector<Dim> guess = detail::pick_guess<Dim>(residual, predictor, u_n);
  auto out = newton_solve<Dim>(residual, jacobian, guess, newton);
  if (out.report.converged) detail::checked<Dim>(out.x, "I_T1");
  return out;
}

/**
 * Root of U - u_n - dt (f(U) + g(U)) + dt^2/2 (J_f(U) + J_g(U))(f(U) + g(U)).
 *
 * The exact residual Jacobian needs second derivatives of f and g, so the
 * Newton matrix is always built by finite differences of the residual.
 */
template <int Dim>
[[nodiscard]] NewtonResult<Dim> step_i_t2(const SplitProblem<Dim>& problem,
                                          const Vector<Dim>& u_n, double dt,
                                          const NewtonConfig& newton = {}) {
  const Vector<Dim> predictor = step_expl_t2(problem, u_n, dt);
  const double half_dt2 = 0.5 * dt * dt;
  auto residual = [&](const Vector<Dim>& u) -> Vector<Dim> {
    const Vector<Dim> rhs = problem.f(u) + problem.g(u);
    return u - u_n - dt * rhs + half_dt2 * ((problem.jac_f(u) + problem.jac_g(u)) * rhs);
  };
  NewtonConfig cfg = newton;
  cfg.jacobian_mode = JacobianMode::FiniteDifferenceResidual;
  const Vector<Dim> guess = detail::pick_guess<Dim>(residual, predictor, u_n);
  auto out = newton_solve<Dim>(residual, detail::JacobianFn<Dim>{}, guess, cfg);
  if (out.report.converged) detail::checked<Dim>(out.x, "I_T2");
  return out;
}

/// Fixed-step advance with any Taylor scheme (no companion).
template <int Dim>
[[nodiscard]] NewtonResult<Dim> step_taylor(SchemeId scheme, const SplitProblem<Dim>& problem,
                                            const Vector<Dim>& u_n, double dt,
                                            const NewtonConfig& newton = {}) {
  switch (scheme) {
    case SchemeId::ExplT1:
      return {step_expl_t1(problem, u_n, dt), NewtonReport{true, 0, 0.0}};
    case SchemeId::ExplT2:
      return {step_expl_t2(problem, u_n, dt), NewtonReport{true, 0, 0.0}};
    case SchemeId::SiT1: return step_si_t1(problem, u_n, dt, newton);
    case SchemeId::SiT2: return step_si_t2(problem, u_n, dt, newton);
    case SchemeId::IT1: return step_i_t1(problem, u_n, dt, newton);
    case SchemeId::IT2: return step_i_t2(problem, u_n, dt, newton);
    case SchemeId::ImexRk21: break;
  }
  throw ContractError("step_taylor: IMEX_RK21 is not a Taylor scheme");
}

/**
 * Main and companion solutions for the adaptive driver.
 *
 * The companion is the other-order member of the same family
 * (SI_T1 <-> SI_T2, I_T1 <-> I_T2), computed from the same u_n and dt.
 */
template <int Dim>
[[nodiscard]] StepResult<Dim> embedded_step(SchemeId scheme, const SplitProblem<Dim>& problem,
                                            const Vector<Dim>& u_n, double dt,
                                            const NewtonConfig& newton = {}) {
  SchemeId partner;
  switch (scheme) {
    case SchemeId::SiT1: partner = SchemeId::SiT2; break;
    case SchemeId::SiT2: partner = SchemeId::SiT1; break;
    case SchemeId::IT1: partner = SchemeId::IT2; break;
    case SchemeId::IT2: partner = SchemeId::IT1; break;
    default:
      throw ContractError("embedded_step: scheme has no Taylor companion");
  }
  auto main = step_taylor(scheme, problem, u_n, dt, newton);
  StepResult<Dim> out;
  out.p = nominal_order(scheme);
  out.q = nominal_order(partner);
  if (!main.report.converged) {
    out.u_main = std::move(main.x);
    out.u_companion = out.u_main;
    out.newton_report = main.report;
    return out;
  }
  auto companion = step_taylor(partner, problem, u_n, dt, newton);
  out.u_main = std::move(main.x);
  out.u_companion = std::move(companion.x);
  out.newton_report = detail::merge(main.report, companion.report);
  return out;
}

}  // namespace taylor_ode
