#include "taylor_ode/driver.hpp"
#include "taylor_ode/problems.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace taylor_ode;
using Catch::Approx;

namespace {

IvpSpec<Dynamic> linear(double a, double b, double t_end) {
  LinearTwoRateConfig cfg;
  cfg.lambda = a;
  cfg.nu = b;
  cfg.t_end = t_end;
  return make_linear_two_rate(cfg);
}

}  // namespace

TEST_CASE("controller formula") {
  const ControllerConfig cfg;
  // the worked value sits below the default 0.2 dt floor
  ControllerConfig wide = cfg;
  wide.fac_min = 0.05;
  CHECK(propose_next_dt(0.01, 1e-3, wide) == Approx(9e-4).epsilon(1e-14));
  CHECK(propose_next_dt(0.01, 1e-3, cfg) == Approx(0.002).epsilon(1e-14));
  CHECK(propose_next_dt(0.01, cfg.tol, cfg) == Approx(0.009).epsilon(1e-14));
  CHECK(propose_next_dt(0.01, 1e-12, cfg) == Approx(0.05).epsilon(1e-14));
  CHECK(propose_next_dt(0.01, 0.0, cfg) == Approx(0.05).epsilon(1e-14));
  CHECK(propose_next_dt(0.01, 1e-12, cfg, 0.02) == 0.02);

  ControllerConfig q3 = cfg;
  q3.q = 3;
  q3.kappa = 0.8;
  const double want = 0.8 * 0.02 * std::cbrt(1e-5 / 4e-6);
  CHECK(propose_next_dt(0.02, 4e-6, q3) == Approx(want).epsilon(1e-14));
}

TEST_CASE("controller validation") {
  ControllerConfig cfg;
  CHECK_NOTHROW(validate(cfg, 1.0));
  cfg.kappa = 1.0;
  CHECK_THROWS_AS(validate(cfg, 1.0), ContractError);
  cfg = {};
  cfg.tol = 0.0;
  CHECK_THROWS_AS(validate(cfg, 1.0), ContractError);
}

TEST_CASE("zero right-hand side grows steps and lands on t_end") {
  const auto ivp = linear(0.0, 0.0, 10.0);
  ControllerConfig cfg;
  cfg.dt_max = 1.0;
  const auto rec = integrate_adaptive(ivp, SchemeId::SiT2, cfg);
  REQUIRE(rec.ok());
  CHECK(rec.summary.rejected_steps == 0);
  CHECK(rec.t_final == 10.0);
  double prev = 0.0;
  for (std::size_t k = 1; k < rec.rows.size(); ++k) {
    const auto& r = rec.rows[k];
    CHECK(r.delta_norm == 0.0);
    CHECK(r.u[0] == 1.0);
    if (k + 1 < rec.rows.size()) {
      CHECK(r.dt == Approx(std::min(prev == 0.0 ? cfg.dt0 : 5.0 * prev, 1.0)));
    }
    prev = r.dt;
  }
}

TEST_CASE("stiff scalar decay with SI_T1") {
  const auto ivp = linear(-1.0, -1e4, 1.0);
  const auto rec = integrate_adaptive(ivp, SchemeId::SiT1, ControllerConfig{});
  REQUIRE(rec.ok());
  CHECK(std::abs(rec.u_final[0]) <= 5e-4);
  double prev = 1.0;
  for (const auto& r : rec.rows) {
    if (!r.accepted) continue;
    CHECK(r.u[0] >= 0.0);
    CHECK(r.u[0] <= prev);
    prev = r.u[0];
  }
}

TEST_CASE("adaptive invariants on Van der Pol") {
  VdpConfig vdp;
  vdp.mu = 50.0;
  vdp.t_end_multiplier = 1.0;
  vdp.ic = VdpInitialCondition::Unprepared;
  const auto ivp = make_vdp(vdp);
  for (SchemeId s : kAdaptiveSchemes) {
    const ControllerConfig cfg;
    const auto rec = integrate_adaptive(ivp, s, cfg);
    REQUIRE(rec.ok());
    CHECK(std::abs(rec.t_final - ivp.t_end) <= 1e-12 * std::max(1.0, ivp.t_end));
    std::int64_t acc = 0, rej = 0;
    for (std::size_t k = 1; k < rec.rows.size(); ++k) {
      const auto& r = rec.rows[k];
      if (r.accepted) {
        ++acc;
        CHECK(r.delta_norm <= cfg.tol);
      } else {
        ++rej;
        const auto& next = rec.rows[k + 1];
        CHECK(next.dt < r.dt);
      }
    }
    CHECK(acc == rec.summary.accepted_steps);
    CHECK(rej == rec.summary.rejected_steps);
    CHECK(rec.summary.rhs_evaluations > 0);

    // deterministic apart from wall time
    const auto again = integrate_adaptive(ivp, s, cfg);
    REQUIRE(again.rows.size() == rec.rows.size());
    bool same = true;
    for (std::size_t k = 0; k < rec.rows.size(); ++k) {
      same = same && again.rows[k].u == rec.rows[k].u && again.rows[k].t == rec.rows[k].t;
    }
    CHECK(same);
  }
}

TEST_CASE("dt underflow aborts with a record") {
  VdpConfig vdp;
  vdp.ic = VdpInitialCondition::Unprepared;
  const auto ivp = make_vdp(vdp);
  ControllerConfig cfg;
  cfg.tol = 1e-30;
  const auto rec = integrate_adaptive(ivp, SchemeId::IT1, cfg);
  CHECK_FALSE(rec.ok());
  CHECK(rec.summary.status == RunStatus::DtUnderflow);
  CHECK(rec.summary.accepted_steps == 0);
  CHECK_FALSE(rec.summary.message.empty());
}

TEST_CASE("explicit schemes are refused by the adaptive driver") {
  const auto ivp = linear(-1.0, 0.0, 1.0);
  CHECK_THROWS_AS(integrate_adaptive(ivp, SchemeId::ExplT1, ControllerConfig{}), ContractError);
}

TEST_CASE("fixed steps") {
  SECTION("exact step count") {
    const auto ivp = linear(-1.0, 0.0, 1.0);
    const auto rec = integrate_fixed(ivp, SchemeId::ExplT1, 0.1);
    CHECK(rec.rows.size() == 11);
    CHECK(rec.t_final == 1.0);
    CHECK(rec.summary.accepted_steps == 10);
  }
  SECTION("zero right-hand side") {
    const auto ivp = linear(0.0, 0.0, 2.0);
    const auto rec = integrate_fixed(ivp, SchemeId::IT2, 0.25);
    for (const auto& r : rec.rows) CHECK(r.u[0] == 1.0);
  }
  SECTION("powers of the amplification factor") {
    const double a = -0.5, b = -20.0, dt = 0.01;
    const auto ivp = linear(a, b, 100 * dt);
    const double z = a * dt, w = b * dt;
    const double r_i1 = 1.0 / (1.0 - z - w);
    const double r_si1 = (1.0 + z) / (1.0 - w);
    CHECK(integrate_fixed(ivp, SchemeId::IT1, dt).u_final[0] ==
          Approx(std::pow(r_i1, 100)).epsilon(1e-10));
    CHECK(integrate_fixed(ivp, SchemeId::SiT1, dt).u_final[0] ==
          Approx(std::pow(r_si1, 100)).epsilon(1e-10));
  }
  SECTION("companion track only for IMEX") {
    const auto ivp = linear(-1.0, 0.0, 1.0);
    CHECK_THROWS_AS(integrate_fixed(ivp, SchemeId::SiT1, 0.1, {}, {}, FixedTrack::Companion),
                    ContractError);
    CHECK_NOTHROW(integrate_fixed(ivp, SchemeId::ImexRk21, 0.1, {}, {}, FixedTrack::Companion));
  }
}

TEST_CASE("observer sees every row without storage") {
  const auto ivp = linear(-1.0, -10.0, 1.0);
  RecordOptions<Dynamic> opts;
  opts.store_rows = false;
  std::size_t seen = 0;
  opts.observer = [&seen](const TrajectoryRow<Dynamic>&) { ++seen; };
  const auto quiet = integrate_adaptive(ivp, SchemeId::IT2, ControllerConfig{}, {}, opts);
  const auto full = integrate_adaptive(ivp, SchemeId::IT2, ControllerConfig{});
  CHECK(quiet.rows.empty());
  CHECK(seen == full.rows.size());
}
