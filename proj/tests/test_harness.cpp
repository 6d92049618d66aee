#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "nlpcm/errors.hpp"
#include "nlpcm/harness.hpp"

using namespace nlpcm;

namespace {

double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

TEST_CASE("slope fitting") {
  SUBCASE("exact first order") {
    std::vector<std::pair<double, double>> pts;
    for (double h : {0.1, 0.05, 0.025, 0.0125, 0.00625}) pts.emplace_back(h, 3.0 * h);
    const SlopeFit fit = fit_slope(pts);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.band <= 1e-10);
  }
  SUBCASE("exact second order in the horizon") {
    std::vector<std::pair<double, double>> pts;
    for (double d : {0.38, 0.19, 0.095, 0.0475}) pts.emplace_back(d, 0.7 * d * d);
    CHECK(fit_slope(pts).slope == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("multiplicative noise stays within the tolerance band") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<std::pair<double, double>> pts;
      for (double h : {0.1, 0.05, 0.025, 0.0125, 0.00625})
        pts.emplace_back(h, 2.0 * std::pow(h, 1.5) * (1.0 + 0.05 * (2 * u01(rng) - 1)));
      CHECK(std::abs(fit_slope(pts).slope - 1.5) <= 0.15);
    }
  }
  SUBCASE("rejects nonpositive errors and short series") {
    CHECK_THROWS_AS(fit_slope({{0.1, 1.0}, {0.05, 0.5}}), AdmissibilityError);
    CHECK_THROWS_AS(fit_slope({{0.1, 1.0}, {0.05, 0.0}, {0.025, 0.1}}), AdmissibilityError);
    CHECK_THROWS_AS(fit_slope({{0.1, 1.0}, {0.05, -0.5}, {0.025, 0.1}}), AdmissibilityError);
  }
}

TEST_CASE("discrete l2 error") {
  const auto g = build_grid(DomainSpec::interval(-1, 1), 0.01, 0.038);
  SUBCASE("identical fields") {
    Eigen::VectorXd u = Eigen::VectorXd::Random(g.size());
    CHECK(discrete_l2_error(g, u, u) == 0.0);
  }
  SUBCASE("constant offset approaches |c| sqrt(2)") {
    const Eigen::VectorXd a = Eigen::VectorXd::Zero(g.size());
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(g.size(), 0.7);
    CHECK(discrete_l2_error(g, a, b) ==
          doctest::Approx(0.7 * std::sqrt(2.0)).epsilon(0.01));
  }
  SUBCASE("matches a trapezoid oracle on smooth differences") {
    auto diff = [](double x) { return std::sin(3.0 * x) + 0.3 * x; };
    Eigen::VectorXd u(g.interior.size());
    for (std::size_t r = 0; r < g.interior.size(); ++r)
      u[r] = diff(g.points[g.interior[r]][0]);
    const double err = discrete_l2_error(g, u, Eigen::VectorXd::Zero(g.interior.size()));
    // independent trapezoid integration of diff^2 over the interval
    double trap = 0;
    const int n = 4000;
    for (int i = 0; i <= n; ++i) {
      const double x = -1.0 + 2.0 * i / n;
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      trap += w * diff(x) * diff(x) * (2.0 / n);
    }
    CHECK(err == doctest::Approx(std::sqrt(trap)).epsilon(0.02));
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS(discrete_l2_error(g, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)),
                    AdmissibilityError);
  }
}

TEST_CASE("config parsing and validation") {
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"case":"x"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                      R"({"case":"consistency-1d-5p","h":[0.1],"eta":[2],"typo":1})"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                      R"({"case":"c","h":[0.1],"eta":[2],"delta":0.38,"delta_ratio":3.8})"),
                  ConfigError);
  const auto cfg = ExperimentConfig::from_json_text(
      R"({"case":"consistency-1d-5p","h":[0.1,0.05],"eta":[2],"seed":7})");
  CHECK(cfg.case_id == "consistency-1d-5p");
  CHECK(cfg.h.size() == 2);
  CHECK(cfg.seed == 7);
}

TEST_CASE("run_case rejects inconsistent horizon settings") {
  ExperimentConfig cfg;
  cfg.case_id = "consistency-1d-5p";
  cfg.h = {0.1};
  cfg.eta = {1};
  cfg.delta_ratio = 3.8;  // case has a fixed manufactured horizon
  CHECK_THROWS_AS(run_case(cfg), ConfigError);

  ExperimentConfig cfg2;
  cfg2.case_id = "ac-1d-5p";
  cfg2.h = {0.1};
  cfg2.eta = {1};
  cfg2.delta = 0.38;  // joint-refinement case wants a ratio
  CHECK_THROWS_AS(run_case(cfg2), ConfigError);

  ExperimentConfig cfg3;
  cfg3.case_id = "unknown-case";
  cfg3.h = {0.1};
  cfg3.eta = {1};
  CHECK_THROWS_AS(run_case(cfg3), ConfigError);

  ExperimentConfig cfg4;
  cfg4.case_id = "ac-1d-5p";
  cfg4.h = {0.1};
  cfg4.eta = {1};
  cfg4.delta_ratio = 2.0;  // below the unisolvency guard
  CHECK_THROWS_AS(run_case(cfg4), ConfigError);

  ExperimentConfig cfg5;
  cfg5.case_id = "ac-2d-box-2p";
  cfg5.h = {0.25};
  cfg5.eta = {1};
  cfg5.distribution = "weibull";  // not offered by this case
  CHECK_THROWS_AS(run_case(cfg5), ConfigError);
}

TEST_CASE("closed-form reference moments against analytic integrals") {
  // E[1/(2+xi)] = 5 log(21/19) and E[1/(2+xi)^2] = 1/(1.9 * 2.1) for U[-0.1,0.1]
  const CaseDef& def = find_case("consistency-2d-1p");
  CaseRunner runner(def, DistVariant::Uniform, 0.25, def.fixed_delta);
  const MomentFields ref = runner.reference_moments(8);
  const double m1 = 5.0 * std::log(21.0 / 19.0);
  const double m2 = 1.0 / (1.9 * 2.1);
  const double sd = std::sqrt(m2 - m1 * m1);
  const auto& g = runner.grid();
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const Point& x = g.points[g.interior[r]];
    const double shape = std::cos(0.3 * x[0]) * std::sin(0.3 * x[1]);
    CHECK(ref.mean[r] == doctest::Approx(shape * m1).epsilon(1e-10));
    CHECK(ref.stddev[r] == doctest::Approx(std::abs(shape) * sd).epsilon(1e-8));
  }
}

TEST_CASE("pcm moments converge to the manufactured reference") {
  const CaseDef& def = find_case("consistency-1d-5p");
  CaseRunner runner(def, DistVariant::Uniform, 0.1, def.fixed_delta);
  const MomentFields ref = runner.reference_moments(6);
  long K = 0;
  const MomentFields m = runner.pcm_moments(2, &K);
  CHECK(K > 1);
  const double em = discrete_l2_error(runner.grid(), m.mean, ref.mean);
  const double es = discrete_l2_error(runner.grid(), m.stddev, ref.stddev);
  // spatial error dominates at h = 1/10; scale of u is ~0.12
  CHECK(em <= 5e-3);
  CHECK(es <= 5e-3);
  CHECK(em > 0);
}

TEST_CASE("monte carlo baseline statistics") {
  SUBCASE("estimator on a known scalar family") {
    // draws through the distribution layer: mean of xi ~ U[-0.1, 0.1]
    const Distribution d = Distribution::uniform(-0.1, 0.1);
    std::mt19937_64 rng(123);
    const long M = 100000;
    double acc = 0;
    for (long i = 0; i < M; ++i) acc += d.sample(u01(rng));
    const double sigma = 0.1 / std::sqrt(3.0);
    CHECK(std::abs(acc / M) <= 3.0 * sigma / std::sqrt(static_cast<double>(M)));
  }
  SUBCASE("pde baseline agrees with collocation within the clt band") {
    const CaseDef& def = find_case("consistency-1d-5p");
    CaseRunner runner(def, DistVariant::Uniform, 0.1, def.fixed_delta);
    const MomentFields pcm = runner.pcm_moments(3);
    const MomentFields mc = runner.mc_moments(2000, 99);
    const auto& g = runner.grid();
    for (std::size_t r = 0; r < g.interior.size(); r += 7) {
      const double band = 4.0 * pcm.stddev[r] / std::sqrt(2000.0) + 1e-12;
      CHECK(std::abs(mc.mean[r] - pcm.mean[r]) <= band);
    }
    // determinism per seed
    const MomentFields mc2 = runner.mc_moments(2000, 99);
    CHECK((mc.mean - mc2.mean).lpNorm<Eigen::Infinity>() == 0.0);
    const MomentFields mc3 = runner.mc_moments(500, 100);
    CHECK((mc.mean - mc3.mean).lpNorm<Eigen::Infinity>() > 0.0);
  }
  SUBCASE("single sample yields zero std by convention") {
    const CaseDef& def = find_case("consistency-1d-5p");
    CaseRunner runner(def, DistVariant::Uniform, 0.1, def.fixed_delta);
    const MomentFields mc = runner.mc_moments(1, 5);
    CHECK(mc.stddev.lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("threaded sample solves match the serial results exactly") {
  const CaseDef& def = find_case("consistency-1d-5p");
  CaseRunner runner(def, DistVariant::Uniform, 0.1, def.fixed_delta);
  const Eigen::MatrixXd thetas = runner.map_nodes(runner.base_plan(2));

  setenv("NLPCM_THREADS", "1", 1);
  const auto serial = runner.solve_batch(thetas);
  setenv("NLPCM_THREADS", "4", 1);
  const auto threaded = runner.solve_batch(thetas);
  unsetenv("NLPCM_THREADS");

  REQUIRE(serial.size() == threaded.size());
  for (std::size_t k = 0; k < serial.size(); ++k)
    CHECK((serial[k] - threaded[k]).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("report csv is deterministic and versioned") {
  ExperimentConfig cfg;
  cfg.case_id = "consistency-1d-5p";
  cfg.h = {0.1, 0.05};
  cfg.eta = {1};
  cfg.reference_eta = 4;
  cfg.mc_samples = 50;
  cfg.seed = 31;
  const ConvergenceReport a = run_case(cfg);
  const ConvergenceReport b = run_case(cfg);
  CHECK(a.csv() == b.csv());
  CHECK(a.csv().rfind("# nlpcm-report v1\n", 0) == 0);
  CHECK(a.rows.size() == 4);  // (2 grids) x (1 level + 1 mc row)
  for (const auto& row : a.rows) {
    CHECK(row.err_mean >= 0.0);
    CHECK(row.err_std >= 0.0);
    CHECK(row.wall_ms == 0.0);  // timings are opt-in to keep reports identical
  }
}

TEST_CASE("h-refinement produces a first-order slope on the consistency case") {
  ExperimentConfig cfg;
  cfg.case_id = "consistency-1d-5p";
  cfg.h = {0.1, 0.05, 0.025};
  cfg.eta = {2};
  cfg.reference_eta = 5;
  const ConvergenceReport rep = run_case(cfg);
  REQUIRE(rep.mean_fit.has_value());
  CHECK(rep.scale == "h");
  CHECK(rep.mean_fit->slope >= 0.8);
  CHECK(rep.mean_fit->slope <= 1.3);
  // errors decrease monotonically
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    CHECK(rep.rows[i].err_mean < rep.rows[i - 1].err_mean);
}

TEST_CASE("reconstructed source is cached to disk when requested") {
  const CaseDef& def = find_case("consistency-2d-1p");
  const std::string dir = "/tmp/nlpcm_cache_test";
  std::remove((dir + "/fsrc_consistency-2d-1p_h0.25_d0.525.csv").c_str());
  std::filesystem::create_directories(dir);
  CaseRunner first(def, DistVariant::Uniform, 0.25, def.fixed_delta, dir);
  const Eigen::VectorXd src1 = first.generated_source();
  std::ifstream probe(dir + "/fsrc_consistency-2d-1p_h0.25_d0.525.csv");
  CHECK(probe.good());
  CaseRunner second(def, DistVariant::Uniform, 0.25, def.fixed_delta, dir);
  CHECK((second.generated_source() - src1).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("gaussian and lognormal variants run through the hermite path") {
  for (const char* dist : {"gaussian", "lognormal"}) {
    ExperimentConfig cfg;
    cfg.case_id = "consistency-1d-5p";
    cfg.h = {0.1};
    cfg.eta = {2};
    cfg.reference_eta = 5;
    cfg.distribution = dist;
    const ConvergenceReport rep = run_case(cfg);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].err_mean > 0.0);
    CHECK(rep.rows[0].err_mean < 1e-2);
    CHECK(rep.rows[0].err_std < 1e-2);
  }
}

TEST_CASE("disk case solves against its printed local limit") {
  ExperimentConfig cfg;
  cfg.case_id = "ac-2d-disk-1p";
  cfg.h = {0.125};
  cfg.eta = {1};
  cfg.reference_eta = 5;
  const ConvergenceReport rep = run_case(cfg);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].delta == doctest::Approx(3.8 * 0.125));
  CHECK(rep.rows[0].err_mean > 0.0);
  CHECK(rep.rows[0].err_mean < 0.05);
  CHECK(rep.rows[0].err_std < 0.05);
}

TEST_CASE("correlated-field case runs end to end") {
  ExperimentConfig cfg;
  cfg.case_id = "kl-2d";
  cfg.h = {0.25};
  cfg.eta = {1};
  cfg.reference_eta = 2;
  cfg.dump_eigs = "/tmp/nlpcm_test_kleigs";
  const ConvergenceReport rep = run_case(cfg);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].K > 1);
  CHECK(rep.rows[0].err_mean > 0.0);
  CHECK(rep.rows[0].err_mean < 0.1);
  std::ifstream eigs("/tmp/nlpcm_test_kleigs_axis1.csv");
  CHECK(eigs.good());
  std::remove("/tmp/nlpcm_test_kleigs_axis1.csv");
  std::remove("/tmp/nlpcm_test_kleigs_axis2.csv");
}

TEST_CASE("local reference restriction aligns the lattices") {
  const CaseDef& def = find_case("ac-2d-box-2p");
  const LocalReferenceMoments ref = local_reference_moments(def, DistVariant::Uniform, 1,
                                                            1.0 / 16);
  CaseRunner runner(def, DistVariant::Uniform, 0.25, 0.7);
  const MomentFields m = ref.restrict_to(runner.grid());
  CHECK(m.mean.size() == static_cast<Eigen::Index>(runner.grid().interior_count()));
  // positive loading, zero boundary: strictly positive inside, zero on the
  // lattice points that sit exactly on the boundary
  const auto& g = runner.grid();
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const Point& x = g.points[g.interior[r]];
    const bool on_boundary = std::abs(x[0]) == 1.0 || std::abs(x[1]) == 1.0;
    if (on_boundary)
      CHECK(m.mean[r] == 0.0);
    else
      CHECK(m.mean[r] > 0.0);
  }
  // symmetry of the domain and loading: the center value is the largest
  double center = -1;
  for (std::size_t r = 0; r < g.interior.size(); ++r)
    if (g.points[g.interior[r]][0] == 0.0 && g.points[g.interior[r]][1] == 0.0)
      center = m.mean[r];
  CHECK(center == doctest::Approx(m.mean.maxCoeff()).epsilon(1e-9));
}
