#include "taylor_ode/problems.hpp"
#include "taylor_ode/taylor.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

using namespace taylor_ode;
using Catch::Approx;
using cd = std::complex<double>;

namespace {

// one step of size 1 on u' = z u + w u from u = 1
IvpSpec<Dynamic> linear(cd z, cd w) {
  LinearTwoRateConfig cfg;
  cfg.lambda = z;
  cfg.nu = w;
  return make_linear_two_rate(cfg);
}

cd one_step(SchemeId s, cd z, cd w) {
  const auto ivp = linear(z, w);
  NewtonConfig tight;
  tight.tol_abs = 1e-15;
  tight.tol_rel = 1e-15;
  const auto r = step_taylor(s, ivp.problem, ivp.u0, 1.0, tight);
  REQUIRE(r.report.converged);
  return as_complex(r.x);
}

// amplification factors written out by hand
cd r_si1(cd z, cd w) { return (1.0 + z) / (1.0 - w); }
cd r_si2(cd z, cd w) { return (1.0 + z + 0.5 * (z * z + z * w)) / (1.0 - w + 0.5 * (z * w + w * w)); }
cd r_i1(cd z, cd w) { return 1.0 / (1.0 - z - w); }
cd r_i2(cd z, cd w) { return 1.0 / (1.0 - (z + w) * (1.0 - 0.5 * (z + w))); }

SplitProblem<2> no_stiff_vdp() {
  auto p = make_vdp({.mu = 1.0}).problem;
  p.g = [](const Vector<2>&) { return Vector<2>::Zero().eval(); };
  p.jac_g = [](const Vector<2>&) { return Matrix<2>::Zero().eval(); };
  return p;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double a = std::log(x[k]), b = std::log(y[k]);
    sx += a, sy += b, sxx += a * a, sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("explicit Taylor steps") {
  const auto ivp = linear(-0.2, -1.8);
  CHECK(step_expl_t1(ivp.problem, ivp.u0, 0.1)[0] == Approx(0.8).epsilon(1e-15));
  CHECK(one_step(SchemeId::ExplT2, -0.5, -0.5).real() == Approx(0.5).epsilon(1e-15));
  CHECK(one_step(SchemeId::ExplT2, -0.1, -0.1).real() == Approx(0.82).epsilon(1e-15));

  const auto vdp = make_vdp({});
  const Vector<2> u(2.0, -2.0 / 3.0);
  const Vector<2> got = step_expl_t1(vdp.problem, u, 1e-4);
  CHECK(got[0] == Approx(u[0] + 1e-4 * (-2.0 / 3.0)));
  CHECK(got[1] == Approx(u[1] + 1e-4 * 1998.0));
}

TEST_CASE("zero right-hand side leaves the state unchanged") {
  const auto ivp = linear(0.0, 0.0);
  for (SchemeId s : {SchemeId::ExplT1, SchemeId::ExplT2, SchemeId::SiT1, SchemeId::SiT2,
                     SchemeId::IT1, SchemeId::IT2}) {
    CHECK(step_taylor(s, ivp.problem, ivp.u0, 0.3).x[0] == 1.0);
  }
  const auto e = embedded_step(SchemeId::SiT2, ivp.problem, ivp.u0, 0.3);
  CHECK(e.u_main == e.u_companion);
}

TEST_CASE("scalar examples of the implicit steps") {
  CHECK(one_step(SchemeId::SiT1, 0.0, -1.0).real() == Approx(0.5).epsilon(1e-14));
  CHECK(one_step(SchemeId::SiT1, -0.1, -10.0).real() == Approx(0.9 / 11.0).epsilon(1e-14));
  CHECK(one_step(SchemeId::SiT2, -0.1, -1.0).real() == Approx(0.955 / 2.55).epsilon(1e-14));
  CHECK(std::abs(one_step(SchemeId::SiT2, 0.0, -1e8)) <= 1e-6);
  CHECK(one_step(SchemeId::IT1, -1.0, -1.0).real() == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(one_step(SchemeId::IT1, 0.0, -1e8)) <= 1e-7);
  CHECK(one_step(SchemeId::IT2, -1.0, -1.0).real() == Approx(0.2).epsilon(1e-12));
  CHECK(std::abs(one_step(SchemeId::IT2, 0.0, -1e8)) <= 1e-7);
}

TEST_CASE("steps reproduce their amplification factors on a grid") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> re(-10.0, 0.0), im(-10.0, 10.0);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    cd z(re(rng), im(rng)), w(re(rng), im(rng));
    if (std::abs(z) > 10.0 || std::abs(w) > 10.0) continue;
    const std::pair<SchemeId, cd> cases[] = {{SchemeId::SiT1, r_si1(z, w)},
                                             {SchemeId::SiT2, r_si2(z, w)},
                                             {SchemeId::IT1, r_i1(z, w)},
                                             {SchemeId::IT2, r_i2(z, w)}};
    for (const auto& [s, want] : cases) {
      worst = std::max(worst, std::abs(one_step(s, z, w) - want) / std::abs(want));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("semi-implicit steps reduce to explicit ones without a stiff part") {
  const auto p = no_stiff_vdp();
  const Vector<2> u(1.3, -0.4);
  for (double dt : {0.1, 0.01}) {
    const Vector<2> e1 = step_expl_t1(p, u, dt);
    const Vector<2> e2 = step_expl_t2(p, u, dt);
    CHECK((step_si_t1(p, u, dt).x - e1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((step_si_t2(p, u, dt).x - e2).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("embedded pairs") {
  {
    const auto ivp = linear(0.0, -1.0);
    const auto r = embedded_step(SchemeId::SiT2, ivp.problem, ivp.u0, 1.0);
    CHECK(r.u_main[0] == Approx(0.4).epsilon(1e-12));
    CHECK(r.u_companion[0] == Approx(0.5).epsilon(1e-12));
    CHECK(r.p == 2);
    CHECK(r.q == 1);
  }
  {
    const auto ivp = linear(-0.5, -0.5);
    const auto r = embedded_step(SchemeId::IT1, ivp.problem, ivp.u0, 1.0);
    CHECK(r.u_main[0] == Approx(0.5).epsilon(1e-12));
    CHECK(r.u_companion[0] == Approx(0.4).epsilon(1e-10));
  }
  const auto ivp = linear(-1.0, -1.0);
  CHECK_THROWS_AS(embedded_step(SchemeId::ExplT1, ivp.problem, ivp.u0, 0.1), ContractError);
}

TEST_CASE("explicit recovery on Van der Pol") {
  const auto p = make_vdp({.mu = 1.0}).problem;
  const Vector<2> u(2.0, -2.0 / 3.0);
  std::vector<double> dts, d1, d2;
  for (int k = 4; k <= 10; ++k) {
    const double dt = std::ldexp(1.0, -k);
    dts.push_back(dt);
    d1.push_back((step_si_t1(p, u, dt).x - step_expl_t1(p, u, dt)).cwiseAbs().maxCoeff());
    d2.push_back((step_si_t2(p, u, dt).x - step_expl_t2(p, u, dt)).cwiseAbs().maxCoeff());
  }
  CHECK(std::abs(slope(dts, d1) - 2.0) <= 0.3);
  CHECK(std::abs(slope(dts, d2) - 3.0) <= 0.3);
}

TEST_CASE("literal second-order semi-implicit form is first order on Van der Pol") {
  const auto p = make_vdp({.mu = 1.0}).problem;
  const Vector<2> u(2.0, -2.0 / 3.0);
  std::vector<double> dts, dev;
  for (int k = 4; k <= 10; ++k) {
    const double dt = std::ldexp(1.0, -k);
    dts.push_back(dt);
    dev.push_back((step_si_t2_printed(p, u, dt).x - step_expl_t2(p, u, dt)).cwiseAbs().maxCoeff());
  }
  // local deviation O(dt^2), so one order is lost globally
  CHECK(std::abs(slope(dts, dev) - 2.0) <= 0.3);

  // same scalar amplification factor as step_si_t2
  const auto ivp = linear(-0.1, -1.0);
  CHECK(step_si_t2_printed(ivp.problem, ivp.u0, 1.0).x[0] ==
        Approx(0.955 / 2.55).epsilon(1e-12));
}

TEST_CASE("step contract errors") {
  const auto ivp = linear(-1.0, -1.0);
  CHECK_THROWS_AS(step_expl_t1(ivp.problem, ivp.u0, 0.0), ContractError);
  CHECK_THROWS_AS(step_expl_t1(ivp.problem, Vector<>(Vector<>::Zero(3)), 0.1), ContractError);
  CHECK_THROWS_AS(step_taylor(SchemeId::ImexRk21, ivp.problem, ivp.u0, 0.1), ContractError);
}
