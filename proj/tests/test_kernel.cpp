#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "nlpcm/errors.hpp"
#include "nlpcm/kernel.hpp"

using namespace nlpcm;

namespace {

// Independent oracle: numeric integration of gamma_delta(|z|) z^beta over the
// ball. 2d flat kernels integrate in Cartesian coordinates; singular kernels
// use numeric radial and angular factors (no closed forms involved).
double moment_oracle(const KernelSpec& k, const MultiIndex& beta) {
  using boost::math::quadrature::gauss_kronrod;
  if (k.dim == 1) {
    boost::math::quadrature::tanh_sinh<double> ts;
    auto half = ts.integrate(
        [&](double r) { return eval_kernel(k, r) * std::pow(r, total_degree(beta)); }, 0.0,
        k.delta);
    const double sign_sum = 1.0 + std::pow(-1.0, beta[0]);
    return sign_sum * half;
  }
  if (k.s == 0.0) {
    auto outer = [&](double x) {
      const double ylim = std::sqrt(std::max(0.0, k.delta * k.delta - x * x));
      auto inner = [&](double y) {
        return eval_kernel(k, std::hypot(x, y)) * std::pow(x, beta[0]) * std::pow(y, beta[1]);
      };
      return gauss_kronrod<double, 31>::integrate(inner, -ylim, ylim, 12, 1e-13);
    };
    return gauss_kronrod<double, 31>::integrate(outer, -k.delta, k.delta, 12, 1e-13);
  }
  // numeric radial x numeric angular
  boost::math::quadrature::tanh_sinh<double> ts;
  const double radial = ts.integrate(
      [&](double r) {
        return eval_kernel(k, r) * std::pow(r, total_degree(beta) + k.dim - 1);
      },
      0.0, k.delta);
  const double angular = gauss_kronrod<double, 31>::integrate(
      [&](double t) {
        return std::pow(std::cos(t), beta[0]) * std::pow(std::sin(t), beta[1]);
      },
      0.0, 2.0 * M_PI, 12, 1e-13);
  return radial * angular;
}

}  // namespace

TEST_CASE("normalization constant closed forms") {
  CHECK(normalization_constant(1, 0.0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(normalization_constant(2, 0.0) == doctest::Approx(4.0 / M_PI).epsilon(1e-14));

  // plugging D0 back reproduces the defining integral to 1e-12 relative
  for (int d : {1, 2}) {
    for (double s : {0.0, 0.3, 0.9}) {
      const KernelSpec k = KernelSpec::make(d, s, 1.0);
      double second = 0.0;
      for (const auto& beta : monomial_basis(d, 2))
        if (total_degree(beta) == 2) second += ball_moment(k, beta);
      CHECK(second == doctest::Approx(d).epsilon(1e-12));
    }
  }
}

TEST_CASE("normalization rejects inadmissible singularity orders") {
  CHECK_THROWS_AS(normalization_constant(1, 1.0), AdmissibilityError);
  CHECK_THROWS_AS(normalization_constant(1, -0.1), AdmissibilityError);
  CHECK_THROWS_AS(normalization_constant(2, 2.5), AdmissibilityError);
}

TEST_CASE("forcing prefactor of the 1d flat kernel") {
  // 2 gamma_delta = 3 / delta^3 when d = 1, s = 0
  for (double delta : {0.38, 1.0}) {
    const KernelSpec k = KernelSpec::make(1, 0.0, delta);
    CHECK(2.0 * eval_kernel(k, 0.5 * delta) ==
          doctest::Approx(3.0 / (delta * delta * delta)).epsilon(1e-14));
  }
}

TEST_CASE("kernel evaluation") {
  const KernelSpec flat = KernelSpec::make(1, 0.0, 1.0);
  CHECK(eval_kernel(flat, 0.5) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(eval_kernel(flat, 1.0) == 0.0);
  CHECK(eval_kernel(flat, 2.0) == 0.0);
  CHECK(eval_kernel(flat, 0.0) == doctest::Approx(1.5).epsilon(1e-14));

  const KernelSpec singular = KernelSpec::make(2, 1.0, 0.5);
  const double expected = (2.0 * 3.0 / (2.0 * M_PI)) / (0.125 * 0.25);
  CHECK(eval_kernel(singular, 0.25) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(eval_kernel(singular, 0.0), SingularEvaluationError);
  CHECK_THROWS_AS(eval_kernel(singular, -1.0), AdmissibilityError);

  // nonincreasing and positive on (0, delta)
  double prev = eval_kernel(singular, 0.01);
  for (double r = 0.02; r < singular.delta; r += 0.01) {
    const double v = eval_kernel(singular, r);
    CHECK(v > 0.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("ball moments: 1d closed forms") {
  const KernelSpec k = KernelSpec::make(1, 0.0, 1.0);
  CHECK(ball_moment(k, {0, 0}) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(ball_moment(k, {2, 0}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ball_moment(k, {1, 0}) == 0.0);
  CHECK(ball_moment(k, {3, 0}) == 0.0);
}

TEST_CASE("ball moments: 2d closed forms and adaptive 2d oracle") {
  const KernelSpec k = KernelSpec::make(2, 0.0, 1.0);
  CHECK(ball_moment(k, {1, 1}) == 0.0);
  CHECK(ball_moment(k, {2, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ball_moment(k, {0, 2}) == doctest::Approx(1.0).epsilon(1e-12));

  for (double delta : {1.0, 0.7}) {
    const KernelSpec kd = KernelSpec::make(2, 0.0, delta);
    for (const MultiIndex beta : {MultiIndex{0, 0}, {2, 0}, {2, 2}, {4, 0}, {0, 2}}) {
      const double closed = ball_moment(kd, beta);
      const double numeric = moment_oracle(kd, beta);
      CHECK(closed == doctest::Approx(numeric).epsilon(1e-10));
    }
  }
}

TEST_CASE("ball moments: singular kernels against the numeric oracle") {
  for (double s : {0.5, 1.0}) {
    const KernelSpec k = KernelSpec::make(2, s, 0.525);
    for (const MultiIndex beta : {MultiIndex{0, 0}, {2, 0}, {2, 2}})
      CHECK(ball_moment(k, beta) == doctest::Approx(moment_oracle(k, beta)).epsilon(1e-10));
  }
  const KernelSpec k1 = KernelSpec::make(1, 0.5, 0.38);
  for (const MultiIndex beta : {MultiIndex{0, 0}, {2, 0}})
    CHECK(ball_moment(k1, beta) == doctest::Approx(moment_oracle(k1, beta)).epsilon(1e-10));
}

TEST_CASE("second-moment normalization holds for every admissible spec") {
  for (int d : {1, 2}) {
    for (double s : {0.0, 0.25, 0.5, 0.99}) {
      if (s >= d) continue;
      for (double delta : {0.1, 0.38, 0.525, 1.0}) {
        const KernelSpec k = KernelSpec::make(d, s, delta);
        double second = 0.0;
        for (const auto& beta : monomial_basis(d, 2))
          if (total_degree(beta) == 2) second += ball_moment(k, beta);
        CHECK(second == doctest::Approx(d).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("moment scaling in the horizon") {
  // the kernel scaling gamma_delta(r) = delta^{-(d+2)} gamma_1(r/delta) gives
  // g_beta(delta) = delta^{|beta|-2} g_beta(1); the second moment is
  // delta-invariant by the normalization
  for (int d : {1, 2}) {
    const KernelSpec unit = KernelSpec::make(d, 0.0, 1.0);
    for (double delta : {0.1, 0.38, 0.525, 1.0}) {
      const KernelSpec k = KernelSpec::make(d, 0.0, delta);
      for (const auto& beta : monomial_basis(d, 4)) {
        const double expect =
            std::pow(delta, total_degree(beta) - 2) * ball_moment(unit, beta);
        CHECK(ball_moment(k, beta) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("odd annihilation and reordering symmetry") {
  const KernelSpec k = KernelSpec::make(2, 0.5, 0.8);
  for (const auto& beta : monomial_basis(2, 5)) {
    if (beta[0] % 2 == 1 || beta[1] % 2 == 1) {
      CHECK(ball_moment(k, beta) == 0.0);
    } else {
      const MultiIndex swapped{beta[1], beta[0]};
      CHECK(ball_moment(k, beta) == doctest::Approx(ball_moment(k, swapped)).epsilon(1e-14));
    }
  }
}

TEST_CASE("monomial basis sizes") {
  CHECK(monomial_basis(1, 3).size() == 4);
  CHECK(monomial_basis(2, 3).size() == 10);
}
