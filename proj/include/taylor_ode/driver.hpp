/**
 * @file driver.hpp
 * @brief Adaptive (I-controller) and fixed-step integration drivers.
 */
#pragma once

#include "taylor_ode/core.hpp"
#include "taylor_ode/imex_rk.hpp"
#include "taylor_ode/newton.hpp"
#include "taylor_ode/scheme.hpp"
#include "taylor_ode/taylor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace taylor_ode {

struct ControllerConfig {
  double tol = 1e-5;
  double kappa = 0.9;
  int q = 2;
  double dt0 = 1e-2;
  double dt_min = 1e-12;
  std::optional<double> dt_max;  ///< defaults to t_end - t0
  double fac_min = 0.2;
  double fac_max = 5.0;
};

inline void validate(const ControllerConfig& cfg, double span) {
  const double dt_max = cfg.dt_max.value_or(span);
  if (!(cfg.kappa > 0.0 && cfg.kappa < 1.0)) throw ContractError("ControllerConfig: kappa must lie in (0, 1)");
  if (!(cfg.tol > 0.0)) throw ContractError("ControllerConfig: tol must be positive");
  if (cfg.q < 1) throw ContractError("ControllerConfig: q must be at least 1");
  if (!(cfg.dt_min < cfg.dt0 && cfg.dt0 <= dt_max)) {
    throw ContractError("ControllerConfig: need dt_min < dt0 <= dt_max");
  }
  if (!(cfg.fac_min < 1.0 && 1.0 < cfg.fac_max)) {
    throw ContractError("ControllerConfig: need fac_min < 1 < fac_max");
  }
}

/**
 * I-controller: kappa * dt * (tol / delta)^(1/q), delta floored at 1e-300,
 * clamped to [fac_min dt, fac_max dt] and then to [dt_min, dt_max].
 */
[[nodiscard]] inline double propose_next_dt(double dt, double delta_norm,
                                            const ControllerConfig& cfg,
                                            double dt_max = std::numeric_limits<double>::infinity()) {
  const double delta = std::max(delta_norm, 1e-300);
  const double raw = cfg.kappa * dt * std::pow(cfg.tol / delta, 1.0 / cfg.q);
  double next = std::clamp(raw, cfg.fac_min * dt, cfg.fac_max * dt);
  next = std::min(next, cfg.dt_max.value_or(dt_max));
  return std::max(next, cfg.dt_min);
}

template <int Dim>
struct TrajectoryRow {
  double t = 0.0;
  Vector<Dim> u;
  double dt = std::numeric_limits<double>::quiet_NaN();  ///< NaN on the initial-condition row
  bool accepted = true;
  double delta_norm = std::numeric_limits<double>::quiet_NaN();
  int newton_iters = 0;
};

enum class RunStatus {
  Completed,
  DtUnderflow,
  NonFinite,
  NewtonFailure,
};

[[nodiscard]] constexpr const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::DtUnderflow: return "dt-underflow";
    case RunStatus::NonFinite: return "non-finite";
    case RunStatus::NewtonFailure: return "newton-failure";
  }
  return "?";
}

struct RunSummary {
  std::int64_t accepted_steps = 0;
  std::int64_t rejected_steps = 0;
  std::int64_t rhs_evaluations = 0;  ///< calls to f plus calls to g
  double wall_time_s = 0.0;
  double max_newton_residual = 0.0;  ///< over accepted steps
  RunStatus status = RunStatus::Completed;
  std::string message;
};

/**
 * Every attempted step, plus the initial-condition row.
 *
 * For rejected attempts the row carries the start time and state of the
 * attempt. Rows are dropped when the run was configured not to store them;
 * the final state and summary are always kept.
 */
template <int Dim>
struct TrajectoryRecord {
  std::vector<TrajectoryRow<Dim>> rows;
  double t_final = 0.0;
  Vector<Dim> u_final;
  RunSummary summary;

  [[nodiscard]] bool ok() const { return summary.status == RunStatus::Completed; }
};

template <int Dim>
struct RecordOptions {
  bool store_rows = true;
  std::function<void(const TrajectoryRow<Dim>&)> observer;
};

namespace detail {

/// Copy of `problem` whose f and g bump a run-local counter.
template <int Dim>
SplitProblem<Dim> counting(const SplitProblem<Dim>& problem,
                           const std::shared_ptr<std::int64_t>& counter) {
  SplitProblem<Dim> out = problem;
  out.f = [inner = problem.f, counter](const Vector<Dim>& u) {
    ++*counter;
    return inner(u);
  };
  out.g = [inner = problem.g, counter](const Vector<Dim>& u) {
    ++*counter;
    return inner(u);
  };
  return out;
}

template <int Dim>
struct Attempt {
  std::optional<StepResult<Dim>> result;
  bool failed = false;
};

template <int Dim>
Attempt<Dim> attempt_embedded(SchemeId scheme, const SplitProblem<Dim>& problem,
                              const Vector<Dim>& u, double dt, const NewtonConfig& newton) {
  Attempt<Dim> a;
  try {
    a.result = scheme == SchemeId::ImexRk21 ? step_imex_rk21(problem, u, dt, newton)
                                             : embedded_step(scheme, problem, u, dt, newton);
    a.failed = !a.result->converged() || !a.result->u_main.allFinite() ||
               !a.result->u_companion.allFinite();
  } catch (const SingularMatrixError&) {
    a.failed = true;
  } catch (const EvaluationError&) {
    a.failed = true;
  } catch (const StepFailure&) {
    a.failed = true;
  }
  return a;
}

template <int Dim>
void emit(TrajectoryRecord<Dim>& rec, const RecordOptions<Dim>& opts, TrajectoryRow<Dim> row) {
  if (opts.observer) opts.observer(row);
  if (opts.store_rows) rec.rows.push_back(std::move(row));
}

inline double endpoint_slack(double t_end) { return 1e-12 * std::max(1.0, std::abs(t_end)); }

}  // namespace detail

/**
 * Integrates ivp with an embedded scheme under the I-controller.
 *
 * Accepts a step when Newton converged and ||u_main - u_companion||_inf <= tol,
 * then advances with u_main. A rejection retries at propose_next_dt; a Newton
 * failure (or singular/non-finite stage) retries at dt/2. The last step is
 * shortened to land exactly on t_end. Aborts, with the record so far, when the
 * step would drop below dt_min.
 */
template <int Dim>
[[nodiscard]] TrajectoryRecord<Dim> integrate_adaptive(const IvpSpec<Dim>& ivp, SchemeId scheme,
                                                       const ControllerConfig& cfg,
                                                       const NewtonConfig& newton = {},
                                                       const RecordOptions<Dim>& opts = {}) {
  validate(ivp);
  validate(newton);
  if (scheme == SchemeId::ExplT1 || scheme == SchemeId::ExplT2) {
    throw ContractError("integrate_adaptive: explicit Taylor schemes have no embedded companion");
  }
  const auto start = std::chrono::steady_clock::now();
  const double span = ivp.t_end - ivp.t0;

  TrajectoryRecord<Dim> rec;
  rec.t_final = ivp.t0;
  rec.u_final = ivp.u0;
  detail::emit(rec, opts, TrajectoryRow<Dim>{ivp.t0, ivp.u0});
  if (span <= 0.0) return rec;
  validate(cfg, span);

  auto counter = std::make_shared<std::int64_t>(0);
  const SplitProblem<Dim> problem = detail::counting(ivp.problem, counter);
  const double dt_max = cfg.dt_max.value_or(span);
  const double slack = detail::endpoint_slack(ivp.t_end);

  double t = ivp.t0;
  Vector<Dim> u = ivp.u0;
  double dt = std::min(cfg.dt0, dt_max);
  RunSummary& sum = rec.summary;

  while (ivp.t_end - t > slack) {
    double h = dt;
    bool last = false;
    if (t + h >= ivp.t_end - slack) {
      h = ivp.t_end - t;
      last = true;
    }

    auto attempt = detail::attempt_embedded(scheme, problem, u, h, newton);
    TrajectoryRow<Dim> row{t, u, h, false};
    if (attempt.result && attempt.result->newton_report) {
      row.newton_iters = attempt.result->newton_report->iterations;
    }

    double next;
    if (attempt.failed) {
      next = 0.5 * h;
    } else {
      const double delta = (attempt.result->u_main - attempt.result->u_companion).cwiseAbs().maxCoeff();
      row.delta_norm = delta;
      if (delta <= cfg.tol) {
        t = last ? ivp.t_end : t + h;
        u = std::move(attempt.result->u_main);
        row.t = t;
        row.u = u;
        row.accepted = true;
        if (attempt.result->newton_report) {
          sum.max_newton_residual =
              std::max(sum.max_newton_residual, attempt.result->newton_report->final_residual_norm);
        }
        ++sum.accepted_steps;
        detail::emit(rec, opts, std::move(row));
        dt = propose_next_dt(h, delta, cfg, dt_max);
        continue;
      }
      next = propose_next_dt(h, delta, cfg, dt_max);
    }

    ++sum.rejected_steps;
    detail::emit(rec, opts, std::move(row));
    if (!(next < h) || next < cfg.dt_min) {
      sum.status = attempt.failed ? RunStatus::NewtonFailure : RunStatus::DtUnderflow;
      sum.message = "step size fell below dt_min at t = " + std::to_string(t);
      break;
    }
    dt = next;
  }

  rec.t_final = t;
  rec.u_final = u;
  sum.rhs_evaluations = *counter;
  sum.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// Which solution a fixed-step IMEX run advances with.
enum class FixedTrack { Main, Companion };

/**
 * Uniform steps of size dt from t0, the last one shortened to land on t_end.
 * No rejection: a failed Newton solve or non-finite state aborts the run.
 */
template <int Dim>
[[nodiscard]] TrajectoryRecord<Dim> integrate_fixed(const IvpSpec<Dim>& ivp, SchemeId scheme,
                                                    double dt, const NewtonConfig& newton = {},
                                                    const RecordOptions<Dim>& opts = {},
                                                    FixedTrack track = FixedTrack::Main) {
  validate(ivp);
  validate(newton);
  if (!(dt > 0.0)) throw ContractError("integrate_fixed: dt must be positive");
  if (track == FixedTrack::Companion && scheme != SchemeId::ImexRk21) {
    throw ContractError("integrate_fixed: companion track is only defined for IMEX_RK21");
  }
  const auto start = std::chrono::steady_clock::now();
  const double span = ivp.t_end - ivp.t0;

  TrajectoryRecord<Dim> rec;
  rec.t_final = ivp.t0;
  rec.u_final = ivp.u0;
  detail::emit(rec, opts, TrajectoryRow<Dim>{ivp.t0, ivp.u0});
  if (span <= 0.0) return rec;

  auto counter = std::make_shared<std::int64_t>(0);
  const SplitProblem<Dim> problem = detail::counting(ivp.problem, counter);
  const auto n_steps = static_cast<std::int64_t>(std::ceil(span / dt - 1e-9));
  RunSummary& sum = rec.summary;

  double t = ivp.t0;
  Vector<Dim> u = ivp.u0;
  for (std::int64_t k = 0; k < std::max<std::int64_t>(n_steps, 1); ++k) {
    const double t_next = k + 1 >= n_steps ? ivp.t_end : ivp.t0 + static_cast<double>(k + 1) * dt;
    const double h = t_next - t;
    TrajectoryRow<Dim> row{t_next, u, h, true};
    try {
      if (scheme == SchemeId::ImexRk21) {
        auto r = step_imex_rk21(problem, u, h, newton);
        row.newton_iters = r.newton_report ? r.newton_report->iterations : 0;
        if (!r.converged()) {
          sum.status = RunStatus::NewtonFailure;
        } else {
          row.delta_norm = (r.u_main - r.u_companion).cwiseAbs().maxCoeff();
          u = track == FixedTrack::Main ? std::move(r.u_main) : std::move(r.u_companion);
          sum.max_newton_residual =
              std::max(sum.max_newton_residual, r.newton_report->final_residual_norm);
        }
      } else {
        auto r = step_taylor(scheme, problem, u, h, newton);
        row.newton_iters = r.report.iterations;
        if (!r.report.converged) {
          sum.status = RunStatus::NewtonFailure;
        } else {
          u = std::move(r.x);
          sum.max_newton_residual = std::max(sum.max_newton_residual, r.report.final_residual_norm);
        }
      }
    } catch (const SingularMatrixError& e) {
      sum.status = RunStatus::NewtonFailure;
      sum.message = e.what();
    } catch (const EvaluationError& e) {
      sum.status = RunStatus::NonFinite;
      sum.message = e.what();
    } catch (const StepFailure& e) {
      sum.status = RunStatus::NonFinite;
      sum.message = e.what();
    }
    if (sum.status != RunStatus::Completed) {
      if (sum.message.empty()) sum.message = "Newton did not converge at t = " + std::to_string(t);
      break;
    }
    t = t_next;
    row.u = u;
    ++sum.accepted_steps;
    detail::emit(rec, opts, std::move(row));
  }

  rec.t_final = t;
  rec.u_final = u;
  sum.rhs_evaluations = *counter;
  sum.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace taylor_ode
