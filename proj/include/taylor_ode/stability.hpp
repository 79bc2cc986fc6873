/**
 * @file stability.hpp
 * @brief Linear stability functions R(z, w) for u' = lambda u + nu u, with z = dt lambda
 *        and w = dt nu, plus L-stability checks and S1 region scans.
 *
 * S1 is the set of z for which |R(z, w)| <= 1 for every w in the closed left
 * half-plane. A scan samples the imaginary axis, w = 0 and a deep-stiff point
 * -w_radius; a pole of R in Re(w) <= 0 puts z outside.
 */
#pragma once

#include "taylor_ode/core.hpp"
#include "taylor_ode/imex_rk.hpp"
#include "taylor_ode/scheme.hpp"
#include "taylor_ode/taylor.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace taylor_ode {

using Complex = std::complex<double>;

struct ComplexPair {
  Complex z;  ///< dt * lambda, non-stiff
  Complex w;  ///< dt * nu, stiff
};

class PoleError : public std::domain_error {
 public:
  PoleError(const std::string& what, ComplexPair where) : std::domain_error(what), where_(where) {}
  [[nodiscard]] ComplexPair where() const noexcept { return where_; }

 private:
  ComplexPair where_;
};

/// Numerator and denominator of a rational amplification factor.
struct Ratio {
  Complex num;
  Complex den;
};

/**
 * IMEX-RK(2,1) amplification factor, recovered from the stepper itself.
 *
 * The two DIRK stages each divide by (1 - gamma w), so
 * P(z, w) = R(z, w) (1 - gamma w)^2 is a polynomial of degree <= 2 in each
 * variable. Its nine tensor coefficients are fitted from nine real
 * evaluations of step_imex_rk21 on the scalar linear problem.
 */
class ImexAmplification {
 public:
  ImexAmplification() : gamma_(imex_rk21_tableau().gamma) {
    static constexpr std::array<double, 3> nodes = {0.0, -0.5, -1.0};
    Matrix<9> vandermonde;
    Vector<9> rhs;
    int row = 0;
    for (double z : nodes) {
      for (double w : nodes) {
        const double d = 1.0 - gamma_ * w;
        rhs[row] = step_scalar(z, w) * d * d;
        int col = 0;
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) {
            vandermonde(row, col++) = std::pow(z, i) * std::pow(w, j);
          }
        }
        ++row;
      }
    }
    const Vector<9> c = vandermonde.fullPivLu().solve(rhs);
    for (int k = 0; k < 9; ++k) coef_[k] = c[k];
  }

  [[nodiscard]] Ratio ratio(Complex z, Complex w) const {
    const std::array<Complex, 3> zp = {1.0, z, z * z};
    const std::array<Complex, 3> wp = {1.0, w, w * w};
    Complex num = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) num += coef_[3 * i + j] * zp[i] * wp[j];
    }
    const Complex d = 1.0 - gamma_ * w;
    return {num, d * d};
  }

  [[nodiscard]] double gamma() const { return gamma_; }

  /// Amplification obtained by one step of size 1 on u' = z u + w u, u(0) = 1.
  [[nodiscard]] static Complex step_complex(Complex z, Complex w) {
    SplitProblem<2> p;
    p.dimension = 2;
    const Matrix<2> lam = embed(z);
    const Matrix<2> nu = embed(w);
    p.f = [lam](const Vector<2>& u) -> Vector<2> { return lam * u; };
    p.g = [nu](const Vector<2>& u) -> Vector<2> { return nu * u; };
    p.jac_f = [lam](const Vector<2>&) { return lam; };
    p.jac_g = [nu](const Vector<2>&) { return nu; };
    NewtonConfig cfg;
    cfg.tol_abs = 1e-15;
    cfg.tol_rel = 1e-15;
    const auto r = step_imex_rk21<2>(p, Vector<2>(1.0, 0.0), 1.0, cfg);
    return {r.u_main[0], r.u_main[1]};
  }

  static Matrix<2> embed(Complex r) {
    Matrix<2> m;
    m << r.real(), -r.imag(), r.imag(), r.real();
    return m;
  }

 private:
  static double step_scalar(double z, double w) { return step_complex(z, w).real(); }

  double gamma_;
  std::array<double, 9> coef_{};
};

[[nodiscard]] inline const ImexAmplification& imex_amplification() {
  static const ImexAmplification instance;
  return instance;
}

/// Numerator/denominator form of each scheme's amplification factor.
[[nodiscard]] inline Ratio stability_ratio(SchemeId scheme, Complex z, Complex w) {
  const Complex s = z + w;
  switch (scheme) {
    case SchemeId::ExplT1: return {1.0 + s, 1.0};
    case SchemeId::ExplT2: return {1.0 + s + 0.5 * s * s, 1.0};
    case SchemeId::SiT1: return {1.0 + z, 1.0 - w};
    case SchemeId::SiT2:
      return {1.0 + z + 0.5 * (z * z + z * w), 1.0 - w + 0.5 * (z * w + w * w)};
    case SchemeId::IT1: return {1.0, 1.0 - s};
    case SchemeId::IT2: return {1.0, 1.0 - s * (1.0 - 0.5 * s)};
    case SchemeId::ImexRk21: return imex_amplification().ratio(z, w);
  }
  return {1.0, 1.0};
}

inline constexpr double kPoleThreshold = 1e-300;

/// R(z, w); throws PoleError when the denominator vanishes.
[[nodiscard]] inline Complex stability_function(SchemeId scheme, ComplexPair zw) {
  const Ratio r = stability_ratio(scheme, zw.z, zw.w);
  if (!(std::abs(r.den) > kPoleThreshold)) {
    std::ostringstream os;
    os << to_string(scheme) << ": pole at z = " << zw.z << ", w = " << zw.w;
    throw PoleError(os.str(), zw);
  }
  return r.num / r.den;
}

/// Heun (explicit RK2) polynomial in zeta = z + w.
[[nodiscard]] inline Complex heun_stability(Complex zeta) { return 1.0 + zeta + 0.5 * zeta * zeta; }

/// Poles of R(z, .) in the w-plane.
[[nodiscard]] inline std::vector<Complex> stability_poles_in_w(SchemeId scheme, Complex z) {
  switch (scheme) {
    case SchemeId::ExplT1:
    case SchemeId::ExplT2: return {};
    case SchemeId::SiT1: return {1.0};
    case SchemeId::SiT2: {
      // w^2/2 + (z/2 - 1) w + 1 = 0
      const Complex b = 0.5 * z - 1.0;
      const Complex disc = std::sqrt(b * b - 2.0);
      return {-b + disc, -b - disc};
    }
    case SchemeId::IT1: return {1.0 - z};
    case SchemeId::IT2: return {Complex(1.0, 1.0) - z, Complex(1.0, -1.0) - z};
    case SchemeId::ImexRk21: return {1.0 / imex_amplification().gamma()};
  }
  return {};
}

/**
 * A scheme as seen by the region scanner: either a two-variable scheme with
 * stiff scan, or a one-variable explicit polynomial evaluated at w = 0.
 */
struct StabilityModel {
  std::string name;
  std::function<Ratio(Complex, Complex)> ratio;
  std::function<std::vector<Complex>(Complex)> poles_in_w;
  bool single_variable = false;
  std::optional<SchemeId> scheme;  ///< lets the scanner call stability_ratio directly

  [[nodiscard]] static StabilityModel of(SchemeId id) {
    return {std::string(to_string(id)),
            [id](Complex z, Complex w) { return stability_ratio(id, z, w); },
            [id](Complex z) { return stability_poles_in_w(id, z); }, false, id};
  }

  [[nodiscard]] static StabilityModel heun() {
    return {"HEUN", [](Complex z, Complex w) { return Ratio{heun_stability(z + w), 1.0}; },
            [](Complex) { return std::vector<Complex>{}; }, true, std::nullopt};
  }
};

/// Looks up a model by scheme name, including "HEUN".
[[nodiscard]] inline std::optional<StabilityModel> stability_model(std::string_view name) {
  std::string upper;
  for (char c : name) upper.push_back(static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c));
  if (upper == "HEUN") return StabilityModel::heun();
  if (auto id = parse_scheme(name)) return StabilityModel::of(*id);
  return std::nullopt;
}

struct LStabilityReport {
  bool passed = true;
  double worst = 0.0;  ///< largest |R| seen
  Complex worst_z;
  Complex worst_w;
};

/// Checks |R(z, -W)| and |R(z, -W (1 + i))| <= 1e-4 for every sampled z.
[[nodiscard]] inline LStabilityReport l_stability_check(SchemeId scheme,
                                                        const std::vector<Complex>& z_samples,
                                                        double w_magnitude,
                                                        double threshold = 1e-4) {
  LStabilityReport rep;
  for (Complex z : z_samples) {
    for (Complex w : {Complex(-w_magnitude, 0.0), Complex(-w_magnitude, -w_magnitude)}) {
      double mag;
      try {
        mag = std::abs(stability_function(scheme, {z, w}));
      } catch (const PoleError&) {
        mag = std::numeric_limits<double>::infinity();
      }
      if (!(mag <= rep.worst)) {
        rep.worst = mag;
        rep.worst_z = z;
        rep.worst_w = w;
      }
      if (!(mag <= threshold)) rep.passed = false;
    }
  }
  return rep;
}

struct RegionGridSpec {
  double re_min = -5.0;
  double re_max = 2.0;
  double im_min = -4.0;
  double im_max = 4.0;
  int nx = 701;
  int ny = 801;

  [[nodiscard]] double re(int i) const { return axis(re_min, re_max, nx, i); }
  [[nodiscard]] double im(int j) const { return axis(im_min, im_max, ny, j); }
  [[nodiscard]] double dx() const { return nx > 1 ? (re_max - re_min) / (nx - 1) : 0.0; }
  [[nodiscard]] double dy() const { return ny > 1 ? (im_max - im_min) / (ny - 1) : 0.0; }

 private:
  /// Symmetric about the interval centre, so a grid centred on 0 mirrors exactly.
  static double axis(double lo, double hi, int n, int k) {
    if (n <= 1) return 0.5 * (lo + hi);
    const double centre = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    return centre + half * static_cast<double>(2 * k - (n - 1)) / static_cast<double>(n - 1);
  }
};

struct RegionGrid {
  RegionGridSpec spec;
  std::vector<std::uint8_t> mask;  ///< nx * ny, index i * ny + j (i along Re z)
  std::string w_scan;
  std::string scheme;

  [[nodiscard]] bool inside(int i, int j) const {
    return mask[static_cast<std::size_t>(i) * spec.ny + j] != 0;
  }
};

/**
 * Stiff samples for the S1 scan: 0, -w_radius and +-i v for v log-spaced in
 * [w_radius * 1e-12, w_radius]. The number of log intervals is the smallest
 * power of two giving at least `w_samples` points, so doubling w_samples
 * refines the set by nesting.
 */
[[nodiscard]] inline std::vector<Complex> s1_w_samples(int w_samples, double w_radius) {
  if (w_samples < 100) throw ContractError("s1_w_samples: need at least 100 samples");
  if (!(w_radius > 0.0)) throw ContractError("s1_w_samples: w_radius must be positive");
  int intervals = 1;
  while (2 * (intervals + 1) + 2 < w_samples) intervals *= 2;
  const double lo = std::log(w_radius * 1e-12);
  const double hi = std::log(w_radius);
  std::vector<Complex> out;
  out.reserve(2 * (intervals + 1) + 2);
  out.emplace_back(0.0, 0.0);
  out.emplace_back(-w_radius, 0.0);
  for (int k = 0; k <= intervals; ++k) {
    const double v = std::exp(lo + (hi - lo) * static_cast<double>(k) / intervals);
    out.emplace_back(0.0, v);
    out.emplace_back(0.0, -v);
  }
  return out;
}

/// True when z lies in S1 for the given stiff sample set.
[[nodiscard]] inline bool s1_contains(const StabilityModel& model, Complex z,
                                      const std::vector<Complex>& w_set) {
  constexpr double bound = (1.0 + 1e-12) * (1.0 + 1e-12);
  if (model.single_variable) {
    const Ratio r = model.ratio(z, 0.0);
    return std::norm(r.num) <= bound * std::norm(r.den);
  }
  for (Complex pole : model.poles_in_w(z)) {
    if (pole.real() <= 0.0) return false;
  }
  auto bounded = [bound](const Ratio& r) {
    const double den = std::norm(r.den);
    return den > kPoleThreshold * kPoleThreshold && std::norm(r.num) <= bound * den;
  };
  if (model.scheme) {
    const SchemeId id = *model.scheme;
    for (Complex w : w_set) {
      if (!bounded(stability_ratio(id, z, w))) return false;
    }
    return true;
  }
  for (Complex w : w_set) {
    if (!bounded(model.ratio(z, w))) return false;
  }
  return true;
}

[[nodiscard]] inline RegionGrid compute_s1_region(const StabilityModel& model,
                                                  const RegionGridSpec& spec, int w_samples = 2001,
                                                  double w_radius = 1e6) {
  if (spec.nx < 1 || spec.ny < 1) throw ContractError("compute_s1_region: empty grid");
  const std::vector<Complex> w_set = s1_w_samples(w_samples, w_radius);
  RegionGrid grid;
  grid.spec = spec;
  grid.scheme = model.name;
  grid.mask.assign(static_cast<std::size_t>(spec.nx) * spec.ny, 0);
  std::ostringstream os;
  if (model.single_variable) {
    os << "w = 0 (single-variable polynomial in z + w)";
  } else {
    os << "w in {0, -" << w_radius << "} U {+-i v : v log-spaced in [" << w_radius * 1e-12
       << ", " << w_radius << "], " << (w_set.size() - 2) / 2 << " per side}";
  }
  grid.w_scan = os.str();
  // R has real coefficients and w_set is closed under conjugation, so a grid
  // symmetric about the real axis only needs its upper half scanned.
  const bool mirror = spec.im_min == -spec.im_max;
  const int j_first = mirror ? spec.ny / 2 : 0;
  for (int i = 0; i < spec.nx; ++i) {
    for (int j = j_first; j < spec.ny; ++j) {
      const std::uint8_t in = s1_contains(model, Complex(spec.re(i), spec.im(j)), w_set) ? 1 : 0;
      grid.mask[static_cast<std::size_t>(i) * spec.ny + j] = in;
      if (mirror) grid.mask[static_cast<std::size_t>(i) * spec.ny + (spec.ny - 1 - j)] = in;
    }
  }
  return grid;
}

[[nodiscard]] inline RegionGrid compute_s1_region(SchemeId scheme, const RegionGridSpec& spec,
                                                  int w_samples = 2001, double w_radius = 1e6) {
  return compute_s1_region(StabilityModel::of(scheme), spec, w_samples, w_radius);
}

}  // namespace taylor_ode
