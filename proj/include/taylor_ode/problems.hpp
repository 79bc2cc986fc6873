/**
 * @file problems.hpp
 * @brief Test problems: Van der Pol with the stiff factor in g, and the two-rate linear equation.
 */
#pragma once

#include "taylor_ode/core.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

namespace taylor_ode {

enum class VdpInitialCondition {
  WellPrepared,  ///< z(0) = y(0) / (1 - y(0)^2)
  Unprepared,    ///< z(0) = 0
};

[[nodiscard]] constexpr const char* to_string(VdpInitialCondition ic) {
  return ic == VdpInitialCondition::WellPrepared ? "well-prepared" : "unprepared";
}

struct VdpConfig {
  double mu = 1e3;
  VdpInitialCondition ic = VdpInitialCondition::WellPrepared;
  double t_end_multiplier = 3.0;
  double y0 = 2.0;
};

/// Boundary layers of the relaxation oscillation sit near these multiples of mu.
inline constexpr std::array<double, 3> kVdpLayerFractions = {0.8, 1.6, 2.4};

/**
 * y' = z, z' = mu (1 - y^2) z - y, split as
 * f(U) = (z, -y) and g(U) = mu (0, (1 - y^2) z). U = (y, z), t in [0, t_end_multiplier * mu].
 */
[[nodiscard]] inline IvpSpec<2> make_vdp(const VdpConfig& cfg) {
  if (!(cfg.mu > 0.0)) throw ContractError("make_vdp: mu must be positive");
  if (!(cfg.t_end_multiplier >= 0.0)) {
    throw ContractError("make_vdp: t_end_multiplier must be non-negative");
  }
  const double mu = cfg.mu;
  IvpSpec<2> ivp;
  SplitProblem<2>& p = ivp.problem;
  p.dimension = 2;
  p.label = "vdp";
  p.f = [](const Vector<2>& u) { return Vector<2>(u[1], -u[0]); };
  p.g = [mu](const Vector<2>& u) { return Vector<2>(0.0, mu * (1.0 - u[0] * u[0]) * u[1]); };
  p.jac_f = [](const Vector<2>&) {
    Matrix<2> j;
    j << 0.0, 1.0, -1.0, 0.0;
    return j;
  };
  p.jac_g = [mu](const Vector<2>& u) {
    Matrix<2> j;
    j << 0.0, 0.0, -2.0 * mu * u[0] * u[1], mu * (1.0 - u[0] * u[0]);
    return j;
  };

  double z0 = 0.0;
  if (cfg.ic == VdpInitialCondition::WellPrepared) {
    const double denom = 1.0 - cfg.y0 * cfg.y0;
    if (denom == 0.0) {
      throw ContractError("make_vdp: well-prepared data is singular at y(0) = +-1");
    }
    z0 = cfg.y0 / denom;
  }
  ivp.u0 = Vector<2>(cfg.y0, z0);
  ivp.t0 = 0.0;
  ivp.t_end = cfg.t_end_multiplier * mu;
  return ivp;
}

/**
 * Distance |z - y / (mu (1 - y^2))| from the slow manifold of the split
 * Van der Pol system. For mu = 1 this is the well-prepared relation itself.
 * Returns NaN when |1 - y^2| <= 1e-12 (the manifold folds there).
 */
[[nodiscard]] inline double slow_manifold_distance(const Vector<2>& u, double mu) {
  const double y = u[0];
  const double denom = 1.0 - y * y;
  if (std::abs(denom) <= 1e-12) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(u[1] - y / (mu * denom));
}

struct LinearTwoRateConfig {
  std::complex<double> lambda{0.0, 0.0};  ///< non-stiff rate, goes into f
  std::complex<double> nu{0.0, 0.0};      ///< stiff rate, goes into g
  std::complex<double> u0{1.0, 0.0};
  double t_end = 1.0;
};

/**
 * u' = lambda u + nu u. Real rates and real data give a one-dimensional
 * problem; otherwise the complex scalar is embedded as (Re u, Im u).
 */
[[nodiscard]] inline IvpSpec<Dynamic> make_linear_two_rate(const LinearTwoRateConfig& cfg) {
  const bool real = cfg.lambda.imag() == 0.0 && cfg.nu.imag() == 0.0 && cfg.u0.imag() == 0.0;
  const int d = real ? 1 : 2;
  auto rate_matrix = [d](std::complex<double> r) {
    Matrix<Dynamic> m(d, d);
    if (d == 1) {
      m(0, 0) = r.real();
    } else {
      m << r.real(), -r.imag(), r.imag(), r.real();
    }
    return m;
  };
  const Matrix<Dynamic> lam = rate_matrix(cfg.lambda);
  const Matrix<Dynamic> nu = rate_matrix(cfg.nu);

  IvpSpec<Dynamic> ivp;
  SplitProblem<Dynamic>& p = ivp.problem;
  p.dimension = d;
  p.label = "linear";
  p.f = [lam](const Vector<Dynamic>& u) -> Vector<Dynamic> { return lam * u; };
  p.g = [nu](const Vector<Dynamic>& u) -> Vector<Dynamic> { return nu * u; };
  p.jac_f = [lam](const Vector<Dynamic>&) { return lam; };
  p.jac_g = [nu](const Vector<Dynamic>&) { return nu; };
  ivp.u0 = Vector<Dynamic>(d);
  ivp.u0[0] = cfg.u0.real();
  if (d == 2) ivp.u0[1] = cfg.u0.imag();
  ivp.t0 = 0.0;
  ivp.t_end = cfg.t_end;
  return ivp;
}

/// u0 exp((lambda + nu) t).
[[nodiscard]] inline std::complex<double> linear_two_rate_exact(const LinearTwoRateConfig& cfg,
                                                                double t) {
  return cfg.u0 * std::exp((cfg.lambda + cfg.nu) * t);
}

/// Reads a state of make_linear_two_rate back as a complex number.
[[nodiscard]] inline std::complex<double> as_complex(const Vector<Dynamic>& u) {
  return u.size() == 1 ? std::complex<double>(u[0], 0.0) : std::complex<double>(u[0], u[1]);
}

}  // namespace taylor_ode
