#include "taylor_ode/imex_rk.hpp"
#include "taylor_ode/problems.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>

using namespace taylor_ode;
using Catch::Approx;

namespace {

struct Pair {
  double main, companion;
};

// Scalar two-stage IMEX step on u' = a u + b u, solved in closed form.
Pair dirk_oracle(double a, double b, double dt, double u) {
  const double g = 1.0 - std::sqrt(2.0) / 2.0;
  const double c = 1.0 / (2.0 * g);
  const double u1 = u / (1.0 - dt * g * b);
  const double u2 = (u + dt * c * a * u1 + dt * (1.0 - g) * b * u1) / (1.0 - dt * g * b);
  const double k1 = (a + b) * u1, k2 = (a + b) * u2;
  return {u + dt * ((1.0 - g) * k1 + g * k2), u + dt * k2};
}

IvpSpec<Dynamic> linear(double a, double b) {
  LinearTwoRateConfig cfg;
  cfg.lambda = a;
  cfg.nu = b;
  return make_linear_two_rate(cfg);
}

}  // namespace

TEST_CASE("shipped tableau") {
  const ImexTableau t = imex_rk21_tableau();
  CHECK(validate_tableau(t).empty());
  CHECK(std::abs(t.gamma - (1.0 - std::sqrt(2.0) / 2.0)) <= 1e-15);
  CHECK(std::abs(t.gamma - 0.2928932188134525) <= 1e-15);
  CHECK(std::abs(t.c_coef - 1.7071067811865475) <= 1e-15);
}

TEST_CASE("tableau findings") {
  ImexTableau t = imex_rk21_tableau();
  t.b = {0.5, 0.5};
  const auto f = validate_tableau(t);
  CHECK_FALSE(f.empty());
  bool saw_order = false;
  for (const auto& s : f) saw_order = saw_order || s.find("b . c_impl") != std::string::npos;
  CHECK(saw_order);

  ImexTableau h = imex_rk21_tableau();
  h.gamma = 0.5;
  const auto g = validate_tableau(h);
  bool saw_gamma = false;
  for (const auto& s : g) saw_gamma = saw_gamma || s.find("gamma") != std::string::npos;
  CHECK(saw_gamma);
}

TEST_CASE("zero right-hand side") {
  const auto ivp = linear(0.0, 0.0);
  const auto r = step_imex_rk21(ivp.problem, ivp.u0, 0.7);
  CHECK(r.u_main[0] == 1.0);
  CHECK(r.u_companion[0] == 1.0);
}

TEST_CASE("matches the closed-form two-stage oracle") {
  for (auto [a, b, dt] : {std::tuple{0.0, -1.0, 1.0}, std::tuple{-0.3, -50.0, 0.1},
                          std::tuple{0.4, -2.0, 0.25}, std::tuple{-1.0, -1e6, 1e-2}}) {
    const auto ivp = linear(a, b);
    NewtonConfig tight;
    tight.tol_rel = 1e-15;
    const auto r = step_imex_rk21(ivp.problem, ivp.u0, dt, tight);
    const Pair want = dirk_oracle(a, b, dt, 1.0);
    // the weight sums cancel terms of size dt |a + b| u, so compare on that scale
    const double scale = 1e-13 * (1.0 + dt * std::abs(a + b));
    CHECK(std::abs(r.u_main[0] - want.main) <= scale);
    CHECK(std::abs(r.u_companion[0] - want.companion) <= scale);
  }
}

TEST_CASE("local orders of main and embedded solutions") {
  // |u - e^{z+w}| shrinks 8x (main) and 4x (embedded) per halving
  double prev_main = 0, prev_emb = 0;
  for (int k = 0; k < 4; ++k) {
    const double h = 0.01 * std::ldexp(1.0, -k);
    const auto ivp = linear(-1.0, -1.0);
    const auto r = step_imex_rk21(ivp.problem, ivp.u0, h);
    const double exact = std::exp(-2.0 * h);
    const double em = std::abs(r.u_main[0] - exact), ee = std::abs(r.u_companion[0] - exact);
    if (k > 0) {
      CHECK(std::log2(prev_main / em) == Approx(3.0).margin(0.2));
      CHECK(std::log2(prev_emb / ee) == Approx(2.0).margin(0.2));
    }
    prev_main = em;
    prev_emb = ee;
  }
}

TEST_CASE("implicit part is L-stable") {
  const auto ivp = linear(0.0, -1e8);
  CHECK(std::abs(step_imex_rk21(ivp.problem, ivp.u0, 1.0).u_main[0]) <= 1e-6);
}

TEST_CASE("Van der Pol step agrees with a hand-written stage solve") {
  const auto vdp = make_vdp({.mu = 10.0});
  const Vector<2> u(1.5, -0.2);
  const double dt = 0.05;
  const auto r = step_imex_rk21(vdp.problem, u, dt);
  REQUIRE(r.newton_report);
  CHECK(r.newton_report->converged);
  // stage 1 keeps y and solves a scalar linear equation for z
  const double g = 1.0 - std::sqrt(2.0) / 2.0;
  const double mu = 10.0;
  const double z1 = u[1] / (1.0 - dt * g * mu * (1.0 - u[0] * u[0]));
  const double y1 = u[0];
  const double c = 1.0 / (2.0 * g);
  const double y2 = u[0] + dt * c * z1;
  const double z2 = (u[1] + dt * c * (-y1) + dt * (1.0 - g) * mu * (1.0 - y1 * y1) * z1) /
                    (1.0 - dt * g * mu * (1.0 - y2 * y2));
  const double main_y = u[0] + dt * ((1.0 - g) * z1 + g * z2);
  const double main_z = u[1] + dt * ((1.0 - g) * (-y1 + mu * (1 - y1 * y1) * z1) +
                                     g * (-y2 + mu * (1 - y2 * y2) * z2));
  CHECK(r.u_main[0] == Approx(main_y).epsilon(1e-12));
  CHECK(r.u_main[1] == Approx(main_z).epsilon(1e-10));
  CHECK(r.u_companion[0] == Approx(u[0] + dt * z2).epsilon(1e-12));
}
