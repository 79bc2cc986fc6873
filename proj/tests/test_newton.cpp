#include "taylor_ode/newton.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace taylor_ode;
using Catch::Approx;

namespace {

using Fn = std::function<Matrix<1>(const Vector<1>&)>;

Vector<1> v1(double x) { return Vector<1>::Constant(x); }

}  // namespace

TEST_CASE("linear residual converges in one iteration") {
  auto r = [](const Vector<1>& x) { return (x - v1(2.0)).eval(); };
  const Fn j = [](const Vector<1>&) { return Matrix<1>::Identity(); };
  const auto out = newton_solve<1>(r, j, v1(0.0), NewtonConfig{});
  CHECK(out.report.converged);
  CHECK(out.report.iterations == 1);
  CHECK(out.x[0] == Approx(2.0));
}

TEST_CASE("SI-T-1 fixed point on u' = 0.5u") {
  auto r = [](const Vector<1>& x) { return (x - v1(1.0) - 0.5 * x).eval(); };
  const Fn j = [](const Vector<1>&) { return Matrix<1>::Constant(0.5); };
  const auto out = newton_solve<1>(r, j, v1(1.0), NewtonConfig{});
  CHECK(out.report.converged);
  CHECK(out.x[0] == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("quadratic residual converges quadratically") {
  auto r = [](const Vector<1>& x) { return Vector<1>(x[0] * x[0] - 4.0); };
  const Fn j = [](const Vector<1>& x) { return Matrix<1>::Constant(2.0 * x[0]); };
  const auto out = newton_solve<1>(r, j, v1(3.0), NewtonConfig{});
  CHECK(out.report.converged);
  CHECK(std::abs(out.x[0] - 2.0) < 1e-10);
  CHECK(out.report.iterations <= 7);

  NewtonConfig tight;
  tight.tol_abs = 1e-12;
  tight.tol_rel = 1e-12;
  const auto t = newton_solve<1>(r, j, v1(3.0), tight);
  CHECK(t.report.iterations <= 8);
}

TEST_CASE("finite-difference mode needs no Jacobian") {
  auto r = [](const Vector<1>& x) { return Vector<1>(x[0] * x[0] - 4.0); };
  NewtonConfig cfg;
  cfg.jacobian_mode = JacobianMode::FiniteDifferenceResidual;
  const auto out = newton_solve<1>(r, Fn{}, v1(3.0), cfg);
  CHECK(out.report.converged);
  CHECK(std::abs(out.x[0] - 2.0) < 1e-10);
}

TEST_CASE("missing Jacobian in analytic mode is a contract error") {
  auto r = [](const Vector<1>& x) { return x; };
  CHECK_THROWS_AS(newton_solve<1>(r, Fn{}, v1(1.0), NewtonConfig{}), ContractError);
}

TEST_CASE("non-convergence is reported with the best iterate") {
  // x^2 + 1 has no real root
  auto r = [](const Vector<1>& x) { return Vector<1>(x[0] * x[0] + 1.0); };
  const Fn j = [](const Vector<1>& x) { return Matrix<1>::Constant(2.0 * x[0]); };
  NewtonConfig cfg;
  cfg.max_iters = 5;
  const auto out = newton_solve<1>(r, j, v1(0.7), cfg);
  CHECK_FALSE(out.report.converged);
  CHECK(out.report.iterations == 5);
  CHECK(out.report.final_residual_norm >= 1.0);
  CHECK(out.report.final_residual_norm == Approx(out.x[0] * out.x[0] + 1.0));
}

TEST_CASE("converged report respects the tolerance") {
  auto r = [](const Vector<2>& x) {
    return Vector<2>(x[0] * x[0] + x[1] - 11.0, x[0] + x[1] * x[1] - 7.0);
  };
  const std::function<Matrix<2>(const Vector<2>&)> j = [](const Vector<2>& x) {
    Matrix<2> m;
    m << 2 * x[0], 1, 1, 2 * x[1];
    return m;
  };
  const Vector<2> guess(2.5, 1.5);
  const NewtonConfig cfg;
  const auto out = newton_solve<2>(r, j, guess, cfg);
  REQUIRE(out.report.converged);
  CHECK(out.report.final_residual_norm <= cfg.tol_abs + cfg.tol_rel * inf_norm<2>(r(guess)));
  CHECK(out.x[0] == Approx(3.0));
  CHECK(out.x[1] == Approx(2.0));
}

TEST_CASE("dense_lu_solve") {
  SECTION("identity") {
    const Vector<2> x = dense_lu_solve<2>(Matrix<2>::Identity(), Vector<2>(3, 7));
    CHECK(x[0] == 3.0);
    CHECK(x[1] == 7.0);
  }
  SECTION("diagonal") {
    Matrix<2> a;
    a << 2, 0, 0, 4;
    const Vector<2> x = dense_lu_solve<2>(a, Vector<2>(2, 8));
    CHECK(x[0] == Approx(1.0));
    CHECK(x[1] == Approx(2.0));
  }
  SECTION("random 5x5") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      Matrix<> a(5, 5);
      Vector<> xs(5);
      for (int i = 0; i < 5; ++i) {
        xs[i] = dist(rng);
        for (int k = 0; k < 5; ++k) a(i, k) = dist(rng);
      }
      a += 3.0 * Matrix<>::Identity(5, 5);
      const Vector<> b = a * xs;
      const Vector<> x = dense_lu_solve<Dynamic>(a, b);
      CHECK((x - xs).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((a * x - b).cwiseAbs().maxCoeff() <= 1e-10 * b.cwiseAbs().maxCoeff());
    }
  }
  SECTION("pivoting handles a zero leading entry") {
    Matrix<2> a;
    a << 0, 1, 1, 0;
    const Vector<2> x = dense_lu_solve<2>(a, Vector<2>(5, 6));
    CHECK(x[0] == Approx(6.0));
    CHECK(x[1] == Approx(5.0));
  }
  SECTION("singular") {
    Matrix<2> a;
    a << 1, 2, 2, 4;
    CHECK_THROWS_AS(dense_lu_solve<2>(a, Vector<2>(1, 1)), SingularMatrixError);
  }
  SECTION("shape mismatch") {
    CHECK_THROWS_AS(dense_lu_solve<Dynamic>(Matrix<>::Identity(2, 2), Vector<>::Zero(3)),
                    ContractError);
  }
}

TEST_CASE("NewtonConfig validation") {
  NewtonConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.max_iters = 0;
  CHECK_THROWS_AS(validate(cfg), ContractError);
  cfg = {};
  cfg.tol_abs = 0.0;
  CHECK_THROWS_AS(validate(cfg), ContractError);
}
