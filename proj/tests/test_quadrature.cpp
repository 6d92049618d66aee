#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nlpcm/errors.hpp"
#include "nlpcm/harness.hpp"
#include "nlpcm/quadrature.hpp"

using namespace nlpcm;

namespace {

// interior point farthest from the boundary
int center_point(const ParticleGrid& g) {
  int best = g.interior.front();
  double best_d = -1;
  for (int i : g.interior) {
    double d = 1e300;
    if (g.domain.shape == DomainSpec::Shape::Interval)
      d = std::min(g.points[i][0] - g.domain.lo[0], g.domain.hi[0] - g.points[i][0]);
    else if (g.domain.shape == DomainSpec::Shape::Box)
      d = std::min(std::min(g.points[i][0] - g.domain.lo[0], g.domain.hi[0] - g.points[i][0]),
                   std::min(g.points[i][1] - g.domain.lo[1], g.domain.hi[1] - g.points[i][1]));
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double monomial(const Point& x, const Point& y, const MultiIndex& beta) {
  return std::pow(y[0] - x[0], beta[0]) * std::pow(y[1] - x[1], beta[1]);
}

}  // namespace

TEST_CASE("constraint rows: even targets hit, odd targets annihilate") {
  for (int dim : {1, 2}) {
    const auto dom = dim == 1 ? DomainSpec::interval(-1, 1) : DomainSpec::box(-1, 1, -1, 1);
    const double h = dim == 1 ? 0.05 : 0.125;
    const double delta = 3.8 * h;
    const auto g = build_grid(dom, h, delta);
    const auto k = KernelSpec::make(dim, 0.0, delta);
    const auto t = build_quadrature(g, k);
    const double g0 = ball_moment(k, {0, 0});

    for (int i : {g.interior.front(), center_point(g), g.interior.back()}) {
      for (const auto& beta : monomial_basis(dim, 3)) {
        const double target = ball_moment(k, beta);
        const double got = apply_quadrature(g, t, i, [&](const Point& x, const Point& y) {
          return eval_kernel(k, distance(x, y)) * monomial(x, y, beta);
        });
        if (target != 0.0)
          CHECK(got == doctest::Approx(target).epsilon(1e-10));
        else
          CHECK(std::abs(got) <= 1e-10 * g0);
      }
    }
  }
}

TEST_CASE("weight positivity for the ratios used in the studies") {
  for (double ratio : {2.8, 3.8, 7.0}) {
    for (int dim : {1, 2}) {
      const auto dom = dim == 1 ? DomainSpec::interval(-1, 1) : DomainSpec::box(0, 1, 0, 1);
      const double h = dim == 1 ? 0.05 : 0.1;
      const auto g = build_grid(dom, h, ratio * h);
      const auto k = KernelSpec::make(dim, 0.0, ratio * h);
      const auto t = build_quadrature(g, k);
      double minw = 1e300;
      for (const auto& w : t.weights)
        for (double v : w) minw = std::min(minw, v);
      CHECK(minw > 0.0);
    }
  }
}

TEST_CASE("weight symmetry across interior pairs") {
  const auto g = build_grid(DomainSpec::box(0, 1, 0, 1), 0.1, 0.28);
  const auto k = KernelSpec::make(2, 0.0, 0.28);
  const auto t = build_quadrature(g, k);
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const int i = g.interior[r];
    const auto& nbrs = g.neighbor_lists[r];
    for (std::size_t n = 0; n < nbrs.size(); ++n) {
      const int j = nbrs[n];
      const int rj = g.interior_rank[j];
      if (rj < 0) continue;
      const auto& back = g.neighbor_lists[rj];
      const auto it = std::lower_bound(back.begin(), back.end(), i);
      REQUIRE((it != back.end() && *it == i));
      const double wji = t.weights[r][n];
      const double wij = t.weights[rj][static_cast<std::size_t>(it - back.begin())];
      CHECK(wji == doctest::Approx(wij).epsilon(1e-12));
    }
  }
}

TEST_CASE("interior weights approach the cell measure at the lemma rate") {
  // fixed horizon, shrinking h: max_j |omega_j - h^d| = O(h^{min(d+1, 2d-s)})
  SUBCASE("one dimension") {
    // the deviation constant oscillates with frac(delta/h); four dyadic
    // points keep the fit stable
    const double delta = 0.38;
    std::vector<std::pair<double, double>> dev;
    for (double h : {0.1, 0.05, 0.025, 0.0125}) {
      const auto g = build_grid(DomainSpec::interval(-1, 1), h, delta);
      const auto k = KernelSpec::make(1, 0.0, delta);
      const auto w = compute_weights(g, k, center_point(g));
      double worst = 0;
      for (double v : w) {
        CHECK(v > 0.0);
        CHECK(v < 2.0 * h);
        worst = std::max(worst, std::abs(v - h));
      }
      dev.emplace_back(h, worst);
    }
    const auto fit = fit_slope(dev);
    CHECK(fit.slope >= 1.7);  // min(d+1, 2d-s) = 2
  }
  SUBCASE("two dimensions") {
    const double delta = 0.5;
    std::vector<std::pair<double, double>> dev;
    for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}) {
      const auto g = build_grid(DomainSpec::box(-1, 1, -1, 1), h, delta);
      const auto k = KernelSpec::make(2, 0.0, delta);
      const auto w = compute_weights(g, k, center_point(g));
      double worst = 0;
      for (double v : w) worst = std::max(worst, std::abs(v - h * h));
      dev.emplace_back(h, worst);
    }
    const auto fit = fit_slope(dev);
    CHECK(fit.slope >= 2.7);  // min(d+1, 2d-s) = 3
  }
}

TEST_CASE("weight scaling in the horizon for similar stencils") {
  // omega(delta) = delta^d omega(1) when the stencil offsets match
  for (int dim : {1, 2}) {
    const double ratio = 3.8;
    const auto dom = dim == 1 ? DomainSpec::interval(-4, 4) : DomainSpec::box(-4, 4, -4, 4);
    const double h1 = 0.25, hs = 0.0625;
    const auto g1 = build_grid(dom, h1, ratio * h1);
    const auto gs = build_grid(dom, hs, ratio * hs);
    const auto k1 = KernelSpec::make(dim, 0.0, ratio * h1);
    const auto ks = KernelSpec::make(dim, 0.0, ratio * hs);
    const auto w1 = compute_weights(g1, k1, center_point(g1));
    const auto ws = compute_weights(gs, ks, center_point(gs));
    REQUIRE(w1.size() == ws.size());
    const double scale = std::pow(hs / h1, dim);
    for (std::size_t n = 0; n < w1.size(); ++n)
      CHECK(ws[n] == doctest::Approx(w1[n] * scale).epsilon(1e-11));
  }
}

TEST_CASE("degree-4 even moments converge under refinement") {
  const double delta = 0.38;
  const MultiIndex beta{4, 0};
  std::vector<std::pair<double, double>> err;
  for (double h : {0.1, 0.05, 0.025}) {
    const auto g = build_grid(DomainSpec::interval(-1, 1), h, delta);
    const auto k = KernelSpec::make(1, 0.0, delta);
    const auto t = build_quadrature(g, k);
    const int i = center_point(g);
    const double got = apply_quadrature(g, t, i, [&](const Point& x, const Point& y) {
      return eval_kernel(k, distance(x, y)) * monomial(x, y, beta);
    });
    err.emplace_back(h, std::abs(got - ball_moment(k, beta)));
  }
  CHECK(err[1].second < err[0].second);
  CHECK(err[2].second < err[1].second);
}

TEST_CASE("stencil cache collapses identical neighborhoods") {
  const auto g = build_grid(DomainSpec::box(0, 1, 0, 1), 0.1, 0.28);
  const auto k = KernelSpec::make(2, 0.0, 0.28);
  const auto t = build_quadrature(g, k);
  // complete interior balls: one distinct stencil for the whole grid
  CHECK(t.distinct_stencils == 1);
  CHECK(t.max_constraint_residual <= 1e-10);
  CHECK(t.pseudo_inverse_count == 0);
}

TEST_CASE("unisolvency failure reports the offending regime") {
  // delta/h = 1.5 leaves two 1d neighbors for four constraints
  const auto g = build_grid(DomainSpec::interval(-1, 1), 0.1, 0.15);
  const auto k = KernelSpec::make(1, 0.0, 0.15);
  CHECK_THROWS_AS(compute_weights(g, k, center_point(g)), UnisolvencyError);
}

TEST_CASE("singular kernels produce admissible weights") {
  const double h = 0.05, delta = 3.8 * h;
  const auto g = build_grid(DomainSpec::interval(-1, 1), h, delta);
  const auto k = KernelSpec::make(1, 0.5, delta);
  const auto t = build_quadrature(g, k);
  CHECK(t.max_constraint_residual <= 1e-10);
  for (const auto& w : t.weights)
    for (double v : w) CHECK(v > 0.0);
}

TEST_CASE("weights audit dump") {
  const auto g = build_grid(DomainSpec::interval(0, 1), 0.25, 0.7);
  const auto k = KernelSpec::make(1, 0.0, 0.7);
  const auto t = build_quadrature(g, k);
  const std::string path = "/tmp/nlpcm_test_weights.csv";
  dump_weights_csv(g, t, path);
  std::FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f != nullptr);
  char buf[128];
  REQUIRE(std::fgets(buf, sizeof buf, f) != nullptr);
  CHECK(std::string(buf) == "i,j,omega\n");
  std::fclose(f);
  std::remove(path.c_str());
}
