#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nlpcm/cases.hpp"
#include "nlpcm/errors.hpp"
#include "nlpcm/harness.hpp"
#include "nlpcm/local_solver.hpp"

using namespace nlpcm;

TEST_CASE("textbook poisson problem") {
  LocalProblem p;
  p.domain = DomainSpec::interval(-1, 1);
  p.a = [](const Point&) { return 1.0; };
  p.f = [](const Point&) { return 2.0; };
  p.dirichlet = [](const Point&) { return 0.0; };
  p.h = 1.0 / 64;
  const LocalSolution sol = solve_local(p);
  // quadratic solutions are reproduced exactly by the flux scheme
  for (int i = 0; i < sol.nx; ++i) {
    const double x = -1.0 + i * p.h;
    CHECK(sol.values[i] == doctest::Approx(1.0 - x * x).epsilon(1e-9));
  }
}

TEST_CASE("1d heterogeneous closed form at second order") {
  const CaseDef& def = find_case("ac-1d-5p");
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(5);
  std::vector<std::pair<double, double>> errs;
  for (double h : {1.0 / 40, 1.0 / 80, 1.0 / 160}) {
    LocalProblem p;
    p.domain = def.domain;
    p.a = [&](const Point& x) { return def.local_a(x, theta); };
    p.f = [&](const Point& x) { return def.source(x, theta); };
    p.dirichlet = [&](const Point& x) { return def.boundary(x, theta); };
    p.h = h;
    const LocalSolution sol = solve_local(p);
    double worst = 0;
    for (int i = 0; i < sol.nx; ++i) {
      const Point x{-1.0 + i * h, 0.0};
      worst = std::max(worst, std::abs(sol.values[i] - def.exact(x, theta)));
    }
    errs.emplace_back(h, worst);
  }
  CHECK(fit_slope(errs).slope >= 1.9);
  CHECK(errs.back().second <= 1e-5);
}

TEST_CASE("radial disk solver matches the printed local limit") {
  const CaseDef& def = find_case("ac-2d-disk-1p");
  Eigen::VectorXd theta(1);
  theta << 0.0;
  std::vector<std::pair<double, double>> errs;
  for (double h : {1.0 / 32, 1.0 / 64, 1.0 / 128}) {
    LocalProblem p;
    p.domain = def.domain;
    p.a = [&](const Point& x) { return def.local_a(x, theta); };
    p.f = [&](const Point& x) { return def.source(x, theta); };
    p.dirichlet = [&](const Point& x) { return def.boundary(x, theta); };
    p.h = h;
    const LocalSolution sol = solve_local(p);
    double worst = 0;
    for (int i = 0; i < sol.nx; ++i) {
      const Point x{i * h, 0.0};
      worst = std::max(worst, std::abs(sol.values[i] - def.exact(x, theta)));
    }
    errs.emplace_back(h, worst);
  }
  CHECK(fit_slope(errs).slope >= 1.9);
  CHECK(errs.back().second <= 5e-5);
}

TEST_CASE("2d box solve at second order") {
  // a = 1, u = sin(pi x) sin(pi y) on the unit square
  std::vector<std::pair<double, double>> errs;
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    LocalProblem p;
    p.domain = DomainSpec::box(0, 1, 0, 1);
    p.a = [](const Point&) { return 1.0; };
    p.f = [](const Point& x) {
      return 2.0 * M_PI * M_PI * std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
    };
    p.dirichlet = [](const Point&) { return 0.0; };
    p.h = h;
    const LocalSolution sol = solve_local(p);
    double worst = 0;
    for (int j = 0; j < sol.ny; ++j)
      for (int i = 0; i < sol.nx; ++i) {
        const double exact = std::sin(M_PI * i * h) * std::sin(M_PI * j * h);
        worst = std::max(worst, std::abs(sol.values[j * sol.nx + i] - exact));
      }
    errs.emplace_back(h, worst);
  }
  CHECK(fit_slope(errs).slope >= 1.9);
}

TEST_CASE("2d heterogeneous coefficient self-convergence") {
  const CaseDef& def = find_case("ac-2d-box-2p");
  Eigen::VectorXd theta(2);
  theta << 0.07, -0.04;
  auto solve_at = [&](double h) {
    LocalProblem p;
    p.domain = def.domain;
    p.a = [&](const Point& x) { return def.local_a(x, theta); };
    p.f = [&](const Point& x) { return def.source(x, theta); };
    p.dirichlet = [&](const Point& x) { return def.boundary(x, theta); };
    p.h = h;
    return solve_local(p);
  };
  const LocalSolution coarse = solve_at(1.0 / 16);
  const LocalSolution mid = solve_at(1.0 / 32);
  const LocalSolution fine = solve_at(1.0 / 64);
  // compare on the coarse nodes; ratio near 4 indicates second order
  double e1 = 0, e2 = 0;
  for (int j = 0; j < coarse.ny; ++j)
    for (int i = 0; i < coarse.nx; ++i) {
      const Point x{-1.0 + i / 16.0, -1.0 + j / 16.0};
      e1 = std::max(e1, std::abs(coarse.at(x) - fine.at(x)));
      e2 = std::max(e2, std::abs(mid.at(x) - fine.at(x)));
    }
  CHECK(e2 <= 0.35 * e1);
}

TEST_CASE("local maximum principle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const double w = 1.0 + trial * 0.7;
    LocalProblem p;
    p.domain = DomainSpec::box(0, 1, 0, 1);
    p.a = [w](const Point& x) { return 1.5 + std::sin(w * x[0]) * std::cos(x[1]); };
    p.f = [w](const Point& x) { return -(0.1 + std::abs(std::cos(w * x[0] * x[1]))); };
    p.dirichlet = [w](const Point& x) { return std::cos(w * (x[0] - x[1])); };
    p.h = 1.0 / 20;
    const LocalSolution sol = solve_local(p);
    double bmax = -1e300, imax = -1e300;
    for (int j = 0; j < sol.ny; ++j)
      for (int i = 0; i < sol.nx; ++i) {
        const bool boundary = i == 0 || j == 0 || i == sol.nx - 1 || j == sol.ny - 1;
        (boundary ? bmax : imax) = std::max(boundary ? bmax : imax, sol.values[j * sol.nx + i]);
      }
    // f <= 0 puts the maximum on the boundary
    CHECK(imax <= bmax + 1e-12);
  }
}

TEST_CASE("mesh width must divide the domain") {
  LocalProblem p;
  p.domain = DomainSpec::interval(0, 1);
  p.a = [](const Point&) { return 1.0; };
  p.f = [](const Point&) { return 1.0; };
  p.dirichlet = [](const Point&) { return 0.0; };
  p.h = 0.3;
  CHECK_THROWS_AS(solve_local(p), AdmissibilityError);
}
