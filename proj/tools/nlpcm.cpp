// Command line front end: `run` executes an experiment config, `list-cases`
// prints the registered benchmarks, `check` runs the structural invariant
// suite, `slope` fits convergence rates from a report CSV.
// Exit codes: 0 success, 1 config error, 2 invariant violation.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nlpcm/cases.hpp"
#include "nlpcm/errors.hpp"
#include "nlpcm/harness.hpp"
#include "nlpcm/local_solver.hpp"
#include "nlpcm/nonlocal.hpp"
#include "nlpcm/random_field.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const nlpcm::ExperimentConfig cfg = nlpcm::ExperimentConfig::from_file(config_path);
  const nlpcm::ConvergenceReport report = nlpcm::run_case(cfg);
  std::printf("%s", report.csv().c_str());
  if (report.mean_fit) {
    std::printf("# slope(err_mean vs %s) = %.3f +/- %.3f\n", report.scale.c_str(),
                report.mean_fit->slope, report.mean_fit->band);
    std::printf("# slope(err_std  vs %s) = %.3f +/- %.3f\n", report.scale.c_str(),
                report.std_fit->slope, report.std_fit->band);
  }
  if (!cfg.output.empty()) std::fprintf(stderr, "report written to %s\n", cfg.output.c_str());
  return 0;
}

int cmd_list_cases() {
  for (const auto& c : nlpcm::case_registry()) {
    std::printf("%-18s %dd physical, %d random variable%s", c.id.c_str(), c.dim, c.nparam,
                c.nparam == 1 ? "" : "s");
    if (c.fixed_delta > 0)
      std::printf(", delta = %g", c.fixed_delta);
    else
      std::printf(", delta = %g h", c.default_ratio);
    std::printf("\n  %s\n  distributions:", c.summary.c_str());
    for (auto v : c.variants) std::printf(" %s", nlpcm::variant_name(v).c_str());
    std::printf(" (default %s)\n", nlpcm::variant_name(c.default_variant).c_str());
  }
  return 0;
}

void check_true(bool ok, const char* what, int& failures) {
  std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what);
  if (!ok) ++failures;
}

// Quick structural invariant sweep; the full suites live in the tests.
int cmd_check() {
  using namespace nlpcm;
  int failures = 0;

  {  // kernel normalization across admissible parameters
    bool ok = true;
    for (int d : {1, 2})
      for (double s : {0.0, 0.5}) {
        for (double delta : {0.1, 0.38, 1.0}) {
          const KernelSpec k = KernelSpec::make(d, s, delta);
          double second = 0;
          for (const auto& beta : monomial_basis(d, 2))
            if (total_degree(beta) == 2 && beta[0] % 2 == 0 && beta[1] % 2 == 0)
              second += ball_moment(k, beta);
          ok = ok && std::abs(second - d) < 1e-12 * d;
        }
      }
    check_true(ok, "kernel second-moment normalization", failures);
  }

  {  // weight positivity, symmetry, reproduction on a sample grid
    const auto dom = DomainSpec::box(0, 1, 0, 1);
    const double h = 1.0 / 8, delta = 2.8 * h;
    const auto g = build_grid(dom, h, delta);
    const auto k = KernelSpec::make(2, 0.0, delta);
    const auto t = build_quadrature(g, k);
    bool positive = true;
    for (const auto& w : t.weights)
      for (double v : w) positive = positive && v > 0;
    check_true(positive, "quadrature weight positivity (delta/h = 2.8)", failures);
    check_true(t.max_constraint_residual <= 1e-10, "basis reproduction residual", failures);

    bool symmetric = true;
    for (std::size_t r = 0; r < g.interior.size(); ++r) {
      const int i = g.interior[r];
      const auto& nbrs = g.neighbor_lists[r];
      for (std::size_t n = 0; n < nbrs.size(); ++n) {
        const int j = nbrs[n];
        const int rj = g.interior_rank[j];
        if (rj < 0) continue;
        const auto& back = g.neighbor_lists[rj];
        const auto it = std::lower_bound(back.begin(), back.end(), i);
        const double wji = t.weights[r][n];
        const double wij = t.weights[rj][it - back.begin()];
        symmetric = symmetric && std::abs(wji - wij) <= 1e-12 * std::abs(wji);
      }
    }
    check_true(symmetric, "weight symmetry omega_ji = omega_ij", failures);
  }

  {  // Smolyak plan: unit mass and low-degree exactness
    const auto plan = build_sparse_grid(2, 2, RuleFamily::ClenshawCurtis);
    check_true(std::abs(plan.weights.sum() - 1.0) < 1e-12, "sparse-grid unit mass", failures);
    double xi2 = 0;
    for (int k = 0; k < plan.size(); ++k)
      xi2 += plan.weights(k) * plan.nodes(k, 0) * plan.nodes(k, 0);
    check_true(std::abs(xi2 - 1.0 / 3.0) < 1e-12, "sparse-grid degree-2 exactness", failures);
  }

  {  // KL field: truncation and trace identity
    const KLField& f = shared_kl_field();
    check_true(f.n1 == 2 && f.n2 == 2, "KL truncation keeps two modes per axis", failures);
    double sum = 0;
    for (double l : f.axis1.lambda) sum += l;
    check_true(std::abs(sum - f.axis1.trace()) < 5e-3 * f.axis1.trace(),
               "Nystrom trace identity", failures);
  }

  if (failures) {
    std::printf("%d invariant check(s) failed\n", failures);
    return 2;
  }
  std::printf("all invariant checks passed\n");
  return 0;
}

int cmd_slope(const std::string& input, std::string xcol) {
  std::ifstream in(input);
  if (!in) throw nlpcm::ConfigError("slope: cannot open " + input);
  std::string line;
  std::vector<std::array<double, 4>> rows;  // h, delta, K, err_mean / err_std pairs
  std::vector<std::pair<double, double>> pm, ps;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {  // column header
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 7) throw nlpcm::ConfigError("slope: malformed row: " + line);
    const double h = std::stod(cells[1]), delta = std::stod(cells[2]);
    const double K = std::stod(cells[4]);
    const double em = std::stod(cells[5]), es = std::stod(cells[6]);
    double x = 0;
    if (xcol == "h")
      x = h;
    else if (xcol == "delta")
      x = delta;
    else if (xcol == "K")
      x = K;
    else
      throw nlpcm::ConfigError("slope: x must be one of h, delta, K");
    pm.emplace_back(x, em);
    ps.emplace_back(x, es);
  }
  const auto fm = nlpcm::fit_slope(pm);
  const auto fs = nlpcm::fit_slope(ps);
  std::printf("slope(err_mean vs %s) = %.4f +/- %.4f over %d points\n", xcol.c_str(),
              fm.slope, fm.band, fm.n);
  std::printf("slope(err_std  vs %s) = %.4f +/- %.4f over %d points\n", xcol.c_str(),
              fs.slope, fs.band, fs.n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal diffusion with random coefficients: meshfree quadrature + "
               "sparse-grid collocation"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "execute an experiment from a JSON config");
  run->add_option("--config", config_path, "experiment config path")->required();

  app.add_subcommand("list-cases", "print the registered benchmark cases");
  app.add_subcommand("check", "run the quick structural invariant suite");

  std::string slope_input, slope_x = "h";
  auto* slope = app.add_subcommand("slope", "fit log-log convergence rates from a report");
  slope->add_option("--input", slope_input, "report CSV path")->required();
  slope->add_option("--x", slope_x, "scale column: h, delta, or K");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return cmd_run(config_path);
    if (app.got_subcommand("list-cases")) return cmd_list_cases();
    if (app.got_subcommand("check")) return cmd_check();
    if (app.got_subcommand("slope")) return cmd_slope(slope_input, slope_x);
  } catch (const nlpcm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const nlpcm::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
