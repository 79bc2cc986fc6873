/**
 * @file imex_rk.hpp
 * @brief Embedded IMEX-RK(2,1): explicit tableau on f, (2,1)-DIRK on g.
 *
 *   implicit (g)            explicit (f)
 *   gamma | gamma    0      gamma | 0      0
 *   1     | 1-gamma  gamma  1     | c      0
 *   ------+--------------   ------+-------------
 *         | 1-gamma  gamma        | 1-gamma  gamma
 *         | 0        1            | 0        1
 *
 * with gamma = 1 - sqrt(2)/2 and c = 1/(2 gamma). The lower weight row is
 * the first-order embedded solution.
 */
#pragma once

#include "taylor_ode/core.hpp"
#include "taylor_ode/newton.hpp"
#include "taylor_ode/taylor.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace taylor_ode {

struct ImexTableau {
  static constexpr int s = 2;
  using Square = std::array<std::array<double, 2>, 2>;
  using Row = std::array<double, 2>;

  double gamma = 0.0;
  double c_coef = 0.0;
  Square a_expl{};
  Square a_impl{};
  Row c_expl{};
  Row c_impl{};
  Row b{};
  Row b_hat{};
};

[[nodiscard]] inline ImexTableau imex_rk21_tableau() {
  ImexTableau t;
  t.gamma = 1.0 - std::sqrt(2.0) / 2.0;
  t.c_coef = 1.0 / (2.0 * t.gamma);
  t.a_impl = {{{t.gamma, 0.0}, {1.0 - t.gamma, t.gamma}}};
  t.a_expl = {{{0.0, 0.0}, {t.c_coef, 0.0}}};
  // Nodes are printed as (gamma, 1) for both parts; autonomous problems never read them.
  t.c_impl = {t.gamma, 1.0};
  t.c_expl = {t.gamma, 1.0};
  t.b = {1.0 - t.gamma, t.gamma};
  t.b_hat = {0.0, 1.0};
  return t;
}

/// Lists every violated structural or order condition; empty means the tableau is sound.
[[nodiscard]] inline std::vector<std::string> validate_tableau(const ImexTableau& t,
                                                               double tol = 1e-14) {
  std::vector<std::string> findings;
  auto near = [tol](double a, double b) { return std::abs(a - b) <= tol; };
  auto report = [&findings](const std::string& what, double got, double want) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": got " << got << ", expected " << want;
    findings.push_back(os.str());
  };

  const double gamma = 1.0 - std::sqrt(2.0) / 2.0;
  if (!near(t.gamma, gamma)) report("gamma != 1 - sqrt(2)/2", t.gamma, gamma);
  if (!near(t.c_coef, 1.0 / (2.0 * gamma))) {
    report("c != 1/(2 gamma)", t.c_coef, 1.0 / (2.0 * gamma));
  }

  if (!near(t.a_impl[0][0], t.gamma) || !near(t.a_impl[1][1], t.gamma)) {
    report("DIRK diagonal != gamma", t.a_impl[1][1], t.gamma);
  }
  if (!near(t.a_impl[0][1], 0.0)) report("A_impl not lower triangular", t.a_impl[0][1], 0.0);
  if (!near(t.a_impl[1][0], 1.0 - t.gamma)) {
    report("A_impl[1][0] != 1 - gamma", t.a_impl[1][0], 1.0 - t.gamma);
  }
  if (!near(t.a_expl[0][0], 0.0) || !near(t.a_expl[0][1], 0.0) || !near(t.a_expl[1][1], 0.0)) {
    report("A_expl not strictly lower triangular", t.a_expl[1][1], 0.0);
  }
  if (!near(t.a_expl[1][0], t.c_coef)) report("A_expl[1][0] != c", t.a_expl[1][0], t.c_coef);

  for (int i = 0; i < 2; ++i) {
    const double row = t.a_impl[i][0] + t.a_impl[i][1];
    if (!near(row, t.c_impl[i])) {
      report("A_impl row " + std::to_string(i) + " sum != c_impl", row, t.c_impl[i]);
    }
  }
  if (!near(t.b[0], 1.0 - t.gamma) || !near(t.b[1], t.gamma)) {
    report("b != (1 - gamma, gamma)", t.b[0], 1.0 - t.gamma);
  }
  if (!near(t.b_hat[0], 0.0) || !near(t.b_hat[1], 1.0)) {
    report("b_hat != (0, 1)", t.b_hat[0], 0.0);
  }

  const double sum_b = t.b[0] + t.b[1];
  if (!near(sum_b, 1.0)) report("sum b != 1", sum_b, 1.0);
  const double bc = t.b[0] * t.c_impl[0] + t.b[1] * t.c_impl[1];
  if (!near(bc, 0.5)) report("b . c_impl != 1/2", bc, 0.5);
  const double sum_b_hat = t.b_hat[0] + t.b_hat[1];
  if (!near(sum_b_hat, 1.0)) report("sum b_hat != 1", sum_b_hat, 1.0);
  return findings;
}

/**
 * One IMEX-RK(2,1) step. u_main is second order, u_companion first order.
 *
 * Stage values are kept and g(U1) is reused in stage 2 and in both weight
 * combinations.
 */
template <int Dim>
[[nodiscard]] StepResult<Dim> step_imex_rk21(const SplitProblem<Dim>& problem,
                                             const Vector<Dim>& u_n, double dt,
                                             const NewtonConfig& newton = {},
                                             const ImexTableau& tab = imex_rk21_tableau()) {
  detail::require_positive_dt(dt);
  detail::require_size(u_n, problem.dimension, "step_imex_rk21");
  const double gdt = tab.a_impl[1][1] * dt;

  const detail::JacobianFn<Dim> jacobian = [&](const Vector<Dim>& u) -> Matrix<Dim> {
    return detail::identity_like<Dim>(u) - gdt * problem.jac_g(u);
  };

  StepResult<Dim> out;
  out.p = 2;
  out.q = 1;

  // Stage 1: U1 = u_n + dt gamma g(U1).
  auto residual1 = [&](const Vector<Dim>& u) -> Vector<Dim> {
    return u - u_n - (tab.a_impl[0][0] * dt) * problem.g(u);
  };
  auto stage1 = newton_solve<Dim>(residual1, jacobian, u_n, newton);
  if (!stage1.report.converged) {
    out.u_main = u_n;
    out.u_companion = u_n;
    out.newton_report = stage1.report;
    return out;
  }
  const Vector<Dim> u1 = std::move(stage1.x);
  const Vector<Dim> f1 = problem.f(u1);
  const Vector<Dim> g1 = problem.g(u1);

  // Stage 2: U2 = u_n + dt c f(U1) + dt (1 - gamma) g(U1) + dt gamma g(U2).
  const Vector<Dim> base2 = u_n + (tab.a_expl[1][0] * dt) * f1 + (tab.a_impl[1][0] * dt) * g1;
  auto residual2 = [&](const Vector<Dim>& u) -> Vector<Dim> {
    return u - base2 - gdt * problem.g(u);
  };
  auto stage2 = newton_solve<Dim>(residual2, jacobian, u1, newton);
  out.newton_report = detail::merge(stage1.report, stage2.report);
  if (!stage2.report.converged) {
    out.u_main = u_n;
    out.u_companion = u_n;
    return out;
  }
  const Vector<Dim>& u2 = stage2.x;
  const Vector<Dim> f2 = problem.f(u2);
  const Vector<Dim> g2 = problem.g(u2);

  out.u_main = u_n + dt * (tab.b[0] * (f1 + g1) + tab.b[1] * (f2 + g2));
  out.u_companion = u_n + dt * (tab.b_hat[0] * (f1 + g1) + tab.b_hat[1] * (f2 + g2));
  detail::checked<Dim>(out.u_main, "IMEX_RK21");
  detail::checked<Dim>(out.u_companion, "IMEX_RK21");
  return out;
}

}  // namespace taylor_ode
