/**
 * @file newton.hpp
 * @brief Dense LU solves and damped Newton iteration for the implicit stages.
 */
#pragma once

#include "taylor_ode/core.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace taylor_ode {

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class JacobianMode {
  AnalyticResidual,
  FiniteDifferenceResidual,
};

struct NewtonConfig {
  double tol_abs = 1e-12;
  double tol_rel = 1e-10;
  int max_iters = 50;
  JacobianMode jacobian_mode = JacobianMode::AnalyticResidual;
  double fd_step = 1e-7;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double final_residual_norm = 0.0;
};

inline void validate(const NewtonConfig& cfg) {
  if (!(cfg.tol_abs > 0.0) || !(cfg.tol_rel > 0.0)) {
    throw ContractError("NewtonConfig: tolerances must be positive");
  }
  if (cfg.max_iters < 1) {
    throw ContractError("NewtonConfig: max_iters must be at least 1");
  }
  if (!(cfg.fd_step > 0.0)) {
    throw ContractError("NewtonConfig: fd_step must be positive");
  }
}

/// Pivots smaller than this fraction of the original row's max-norm are singular.
inline constexpr double kSingularPivotRatio = 1e-14;

/**
 * Solves A x = b by LU factorisation with partial pivoting.
 *
 * Throws SingularMatrixError when a pivot falls below
 * kSingularPivotRatio * ||row||_inf of the row it came from.
 */
template <int Dim>
[[nodiscard]] Vector<Dim> dense_lu_solve(Matrix<Dim> a, Vector<Dim> b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n) {
    throw ContractError("dense_lu_solve: A must be square and match b");
  }
  Vector<Dim> row_scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    row_scale[i] = a.row(i).cwiseAbs().maxCoeff();
  }

  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    double best = std::abs(a(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > best) {
        best = std::abs(a(i, k));
        p = i;
      }
    }
    if (p != k) {
      a.row(k).swap(a.row(p));
      std::swap(b[k], b[p]);
      std::swap(row_scale[k], row_scale[p]);
    }
    if (!(best >= kSingularPivotRatio * row_scale[k]) || best == 0.0) {
      std::ostringstream os;
      os << "dense_lu_solve: singular matrix (pivot " << best << " at column " << k << ")";
      throw SingularMatrixError(os.str());
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double m = a(i, k) / a(k, k);
      a(i, k) = 0.0;
      for (Eigen::Index j = k + 1; j < n; ++j) {
        a(i, j) -= m * a(k, j);
      }
      b[i] -= m * b[k];
    }
  }

  Vector<Dim> x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      s -= a(i, j) * x[j];
    }
    x[i] = s / a(i, i);
  }
  return x;
}

template <int Dim>
[[nodiscard]] double inf_norm(const Vector<Dim>& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

template <int Dim>
struct NewtonResult {
  Vector<Dim> x;
  NewtonReport report;
};

/**
 * Damped Newton iteration on residual(x) = 0.
 *
 * Converges when ||r(x)||_inf <= tol_abs + tol_rel * ||r(guess)||_inf. A full
 * step that does not reduce the residual is halved up to 8 times. Running out
 * of iterations is reported (converged = false) with the best iterate, never
 * thrown; a singular iteration matrix throws SingularMatrixError.
 *
 * `residual_jacobian` may be empty only when cfg.jacobian_mode is
 * FiniteDifferenceResidual; in that mode it is ignored.
 */
template <int Dim, class Residual>
[[nodiscard]] NewtonResult<Dim> newton_solve(
    Residual&& residual,
    const std::function<Matrix<Dim>(const Vector<Dim>&)>& residual_jacobian,
    const Vector<Dim>& guess, const NewtonConfig& cfg) {
  const bool use_fd = cfg.jacobian_mode == JacobianMode::FiniteDifferenceResidual;
  if (!use_fd && !residual_jacobian) {
    throw ContractError("newton_solve: no residual Jacobian and finite differences disabled");
  }

  Vector<Dim> x = guess;
  Vector<Dim> r = residual(x);
  double r_norm = inf_norm<Dim>(r);
  const double threshold = cfg.tol_abs + cfg.tol_rel * r_norm;

  Vector<Dim> best_x = x;
  double best_norm = r_norm;
  NewtonResult<Dim> out{x, {}};

  int it = 0;
  while (std::isfinite(r_norm) && r_norm > threshold && it < cfg.max_iters) {
    const Matrix<Dim> jac = use_fd ? finite_difference_jacobian<Dim>(residual, x, cfg.fd_step)
                                   : residual_jacobian(x);
    const Vector<Dim> dx = dense_lu_solve<Dim>(jac, Vector<Dim>(-r));
    ++it;

    double lambda = 1.0;
    Vector<Dim> trial = x + dx;
    Vector<Dim> r_trial = residual(trial);
    double trial_norm = inf_norm<Dim>(r_trial);
    for (int halving = 0; halving < 8 && !(trial_norm < r_norm); ++halving) {
      lambda *= 0.5;
      trial = x + lambda * dx;
      r_trial = residual(trial);
      trial_norm = inf_norm<Dim>(r_trial);
    }
    x = std::move(trial);
    r = std::move(r_trial);
    r_norm = trial_norm;
    if (r_norm < best_norm || !std::isfinite(best_norm)) {
      best_x = x;
      best_norm = r_norm;
    }
  }

  out.report.iterations = it;
  if (std::isfinite(r_norm) && r_norm <= threshold) {
    out.x = x;
    out.report.converged = true;
    out.report.final_residual_norm = r_norm;
  } else {
    out.x = best_x;
    out.report.converged = false;
    out.report.final_residual_norm = best_norm;
  }
  return out;
}

}  // namespace taylor_ode
