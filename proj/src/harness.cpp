#include "nlpcm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "nlpcm/errors.hpp"
#include "nlpcm/local_solver.hpp"
#include "nlpcm/parallel.hpp"

namespace nlpcm {

namespace {

using json = nlohmann::json;

double wall_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

// 53-bit uniform draw in [0, 1); keeps Monte Carlo streams platform-independent.
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Solve a list of samples with one thread-private NonlocalSolver per worker.
void for_each_sample(const ParticleGrid& g, const KernelSpec& k, const QuadratureTable& t,
                     long n,
                     const std::function<void(NonlocalSolver&, long)>& body) {
  const long workers = std::min<long>(max_threads(), n);
  if (workers <= 1) {
    NonlocalSolver solver(g, k, t);
    for (long i = 0; i < n; ++i) body(solver, i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    NonlocalSolver solver(g, k, t);
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(solver, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (long w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string format_double_tag(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  static const std::set<std::string> allowed = {
      "case",        "h",           "delta",         "delta_ratio", "eta",
      "distribution", "mc_samples", "output",        "seed",        "report_wall_time",
      "reference_eta", "h_local",   "min_ratio",     "cache_dir",   "dump_grid",
      "dump_weights", "dump_plan",  "dump_solutions", "dump_eigs"};
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ConfigError("config: unknown key '" + item.key() + "'");

  ExperimentConfig cfg;
  try {
    cfg.case_id = j.at("case").get<std::string>();
    cfg.h = j.at("h").get<std::vector<double>>();
    cfg.eta = j.at("eta").get<std::vector<int>>();
    if (j.count("delta")) cfg.delta = j["delta"].get<double>();
    if (j.count("delta_ratio")) cfg.delta_ratio = j["delta_ratio"].get<double>();
    if (j.count("distribution")) cfg.distribution = j["distribution"].get<std::string>();
    if (j.count("mc_samples")) cfg.mc_samples = j["mc_samples"].get<long>();
    if (j.count("output")) cfg.output = j["output"].get<std::string>();
    if (j.count("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.count("report_wall_time")) cfg.report_wall_time = j["report_wall_time"].get<bool>();
    if (j.count("reference_eta")) cfg.reference_eta = j["reference_eta"].get<int>();
    if (j.count("h_local")) cfg.h_local = j["h_local"].get<double>();
    if (j.count("min_ratio")) cfg.min_ratio = j["min_ratio"].get<double>();
    if (j.count("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
    if (j.count("dump_grid")) cfg.dump_grid = j["dump_grid"].get<std::string>();
    if (j.count("dump_weights")) cfg.dump_weights = j["dump_weights"].get<std::string>();
    if (j.count("dump_plan")) cfg.dump_plan = j["dump_plan"].get<std::string>();
    if (j.count("dump_solutions")) cfg.dump_solutions = j["dump_solutions"].get<std::string>();
    if (j.count("dump_eigs")) cfg.dump_eigs = j["dump_eigs"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void ExperimentConfig::validate() const {
  if (case_id.empty()) throw ConfigError("config: 'case' is required");
  if (h.empty()) throw ConfigError("config: 'h' list is empty");
  for (double hv : h)
    if (!(hv > 0) || !(hv < 10)) throw ConfigError("config: grid size out of range");
  if (eta.empty()) throw ConfigError("config: 'eta' list is empty");
  for (int e : eta)
    if (e < 0 || e > 12) throw ConfigError("config: eta must be in 0..12");
  if (delta < 0 || delta_ratio < 0) throw ConfigError("config: negative horizon");
  if (delta > 0 && delta_ratio > 0)
    throw ConfigError("config: give either 'delta' or 'delta_ratio', not both");
  if (mc_samples < 0) throw ConfigError("config: negative mc_samples");
  if (reference_eta > 14) throw ConfigError("config: reference_eta too large");
  if (min_ratio < 1.0) throw ConfigError("config: min_ratio below 1 is never unisolvent");
}

SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw AdmissibilityError("fit_slope: need at least 3 points");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0) || !(y > 0))
      throw AdmissibilityError("fit_slope: scales and errors must be positive");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y) - my);
  }
  if (sxx == 0) throw AdmissibilityError("fit_slope: all scales identical");
  SlopeFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (const auto& [x, y] : points) {
    const double r = std::log(y) - (fit.intercept + fit.slope * std::log(x));
    ss_res += r * r;
  }
  const double dof = std::max(1, n - 2);
  fit.band = 1.96 * std::sqrt(ss_res / dof / sxx);
  return fit;
}

namespace {

Eigen::VectorXd interior_part(const ParticleGrid& g, const Eigen::VectorXd& u,
                              const char* what) {
  if (u.size() == static_cast<Eigen::Index>(g.interior.size())) return u;
  if (u.size() == static_cast<Eigen::Index>(g.size())) {
    Eigen::VectorXd v(g.interior.size());
    for (std::size_t r = 0; r < g.interior.size(); ++r) v[r] = u[g.interior[r]];
    return v;
  }
  throw AdmissibilityError(std::string(what) + ": field size matches neither the grid "
                                               "nor its interior");
}

}  // namespace

double discrete_l2_error(const ParticleGrid& g, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& ref) {
  const Eigen::VectorXd a = interior_part(g, u, "discrete_l2_error");
  const Eigen::VectorXd b = interior_part(g, ref, "discrete_l2_error");
  return std::sqrt(std::pow(g.h, g.dim) * (a - b).squaredNorm());
}

double discrete_l2_error(const ParticleGrid& g, const Eigen::VectorXd& u,
                         const std::function<double(const Point&)>& ref) {
  Eigen::VectorXd r(g.interior.size());
  for (std::size_t i = 0; i < g.interior.size(); ++i) r[i] = ref(g.points[g.interior[i]]);
  return discrete_l2_error(g, u, r);
}

CellQuadrature CellQuadrature::build(const ParticleGrid& g) {
  const bool clip = g.domain.shape != DomainSpec::Shape::Disk;
  CellQuadrature q;
  const double gauss = 1.0 / std::sqrt(3.0);
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const Point& x = g.points[g.interior[r]];
    double lo[2] = {0, 0}, hi[2] = {0, 0};
    for (int d = 0; d < g.dim; ++d) {
      lo[d] = x[d] - g.h / 2;
      hi[d] = x[d] + g.h / 2;
      if (clip) {
        lo[d] = std::max(lo[d], g.domain.lo[d]);
        hi[d] = std::min(hi[d], g.domain.hi[d]);
      }
    }
    if (g.dim == 1) {
      const double half = (hi[0] - lo[0]) / 2, mid = (lo[0] + hi[0]) / 2;
      for (double s : {-gauss, gauss}) {
        q.points.push_back({mid + s * half, 0.0});
        q.measures.push_back(half);
        q.owner.push_back(static_cast<int>(r));
      }
    } else {
      const double hx = (hi[0] - lo[0]) / 2, mx = (lo[0] + hi[0]) / 2;
      const double hy = (hi[1] - lo[1]) / 2, my = (lo[1] + hi[1]) / 2;
      for (double sx : {-gauss, gauss})
        for (double sy : {-gauss, gauss}) {
          q.points.push_back({mx + sx * hx, my + sy * hy});
          q.measures.push_back(hx * hy);
          q.owner.push_back(static_cast<int>(r));
        }
    }
  }
  return q;
}

double pc_l2_error(const CellQuadrature& q, const Eigen::VectorXd& interior_field,
                   const Eigen::VectorXd& ref_at_points) {
  if (ref_at_points.size() != static_cast<Eigen::Index>(q.points.size()))
    throw AdmissibilityError("pc_l2_error: reference sample size mismatch");
  double acc = 0;
  for (std::size_t p = 0; p < q.points.size(); ++p) {
    const double diff = interior_field[q.owner[p]] - ref_at_points[p];
    acc += q.measures[p] * diff * diff;
  }
  return std::sqrt(acc);
}

LocalSampler::LocalSampler(const CaseDef& def, double h) : def_(&def), h_(h) {
  if (def.domain.shape == DomainSpec::Shape::Disk && def.uses_kl)
    throw ConfigError("LocalSampler: KL fields are only set up on boxes");
  nx_ = static_cast<int>(std::lround((def.domain.hi[0] - def.domain.lo[0]) / h)) + 1;
  ny_ = def.dim == 2
            ? static_cast<int>(std::lround((def.domain.hi[1] - def.domain.lo[1]) / h)) + 1
            : 1;
  if (def.uses_kl) {
    const KLField& field = shared_kl_field();
    kl_basis_.resize(static_cast<Eigen::Index>(nx_) * ny_, field.dim_xi());
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i)
        kl_basis_.row(static_cast<Eigen::Index>(j) * nx_ + i) =
            field
                .basis_at(Point{def.domain.lo[0] + i * h,
                                def.dim == 2 ? def.domain.lo[1] + j * h : 0.0})
                .transpose();
  }
}

LocalSolution LocalSampler::solve(const Eigen::VectorXd& theta) const {
  const CaseDef& def = *def_;
  LocalProblem p;
  p.domain = def.domain;
  p.h = h_;
  p.f = [&](const Point& x) { return def.source(x, theta); };
  p.dirichlet = [&](const Point& x) { return def.boundary(x, theta); };
  if (def.uses_kl) {
    Eigen::VectorXd a_nodes = kl_basis_ * theta;
    a_nodes.array() += shared_kl_field().mean_value;
    const double guard = shared_kl_field().guard;
    for (Eigen::Index i = 0; i < a_nodes.size(); ++i)
      if (!(a_nodes[i] > guard))
        throw AdmissibilityError(
            "KL diffusivity at or below the ellipticity guard on the local mesh");
    const double lo0 = def.domain.lo[0], lo1 = def.domain.lo[1], h = h_;
    const int nx = nx_;
    p.a = [a_nodes = std::move(a_nodes), lo0, lo1, h, nx](const Point& x) {
      const int i = static_cast<int>(std::lround((x[0] - lo0) / h));
      const int j = static_cast<int>(std::lround((x[1] - lo1) / h));
      return a_nodes[static_cast<Eigen::Index>(j) * nx + i];
    };
  } else {
    p.a = [&](const Point& x) { return def.local_a(x, theta); };
  }
  return solve_local(p);
}

double odd_reflection_value(const LocalSolution& sol, const DomainSpec& dom,
                            const Point& y) {
  if (dom.shape == DomainSpec::Shape::Interval) {
    double m = y[0];
    int flips = 0;
    if (m > dom.hi[0]) m = 2 * dom.hi[0] - m, ++flips;
    if (m < dom.lo[0]) m = 2 * dom.lo[0] - m, ++flips;
    const double v = sol.at(Point{m, 0});
    return flips % 2 ? -v : v;
  }
  Point m = y;
  int flips = 0;
  for (int d = 0; d < 2; ++d) {
    if (m[d] > dom.hi[d]) m[d] = 2 * dom.hi[d] - m[d], ++flips;
    if (m[d] < dom.lo[d]) m[d] = 2 * dom.lo[d] - m[d], ++flips;
  }
  const double v = sol.at(m);
  return flips % 2 ? -v : v;
}

MomentFields LocalReferenceMoments::restrict_to(const ParticleGrid& g) const {
  MomentFields out;
  out.mean.resize(g.interior.size());
  out.stddev.resize(g.interior.size());
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const Point& x = g.points[g.interior[r]];
    const double ti = (x[0] - domain.lo[0]) / h_loc;
    const int i = static_cast<int>(std::lround(ti));
    int id = i;
    if (domain.dim == 2) {
      const double tj = (x[1] - domain.lo[1]) / h_loc;
      const int j = static_cast<int>(std::lround(tj));
      if (std::abs(tj - j) > 1e-8)
        throw AdmissibilityError("LocalReferenceMoments: grids are not nested");
      id = j * nx + i;
    }
    if (std::abs(ti - i) > 1e-8)
      throw AdmissibilityError("LocalReferenceMoments: grids are not nested");
    out.mean[r] = mean[id];
    out.stddev[r] = stddev[id];
  }
  return out;
}

CaseRunner::CaseRunner(const CaseDef& def, DistVariant variant, double h, double delta,
                       const std::string& source_cache_dir)
    : def_(&def),
      variant_(variant),
      grid_(build_grid(def.domain, h, delta)),
      kernel_(KernelSpec::make(def.dim, 0.0, delta)),
      table_(build_quadrature(grid_, kernel_)),
      cache_dir_(source_cache_dir) {
  if (!def.allows(variant))
    throw ConfigError("case " + def.id + " does not support distribution '" +
                      variant_name(variant) + "'");
  if (def.uses_kl) {
    const KLField& field = shared_kl_field();
    kl_basis_.resize(grid_.size(), field.dim_xi());
    for (std::size_t i = 0; i < grid_.size(); ++i)
      kl_basis_.row(i) = field.basis_at(grid_.points[i]).transpose();
  }
  if (def.collar_from_local) collar_sampler_.emplace(def, h / 2.0);
  if (!def.source) {
    // reconstruct the loading from the manufactured solution once per grid
    if (!def.source_theta_independent)
      throw ConfigError("case " + def.id + " needs a per-sample reconstructed source; "
                        "not supported");
    const std::string cache_path =
        cache_dir_.empty() ? ""
                           : cache_dir_ + "/fsrc_" + def.id + "_h" + format_double_tag(h) +
                                 "_d" + format_double_tag(delta) + ".csv";
    if (!cache_path.empty()) {
      std::ifstream in(cache_path);
      if (in) {
        std::vector<double> vals;
        double v;
        while (in >> v) vals.push_back(v);
        if (vals.size() == grid_.interior.size()) {
          generated_source_ =
              Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
          source_ready_ = true;
        }
      }
    }
    if (!source_ready_) {
      const Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(def.nparam);
      auto pair_coeff = [&](const Point& x, const Point& y) {
        return def.coeff ? def.coeff(x, y, theta0)
                         : harmonic_pair(def.local_a(x, theta0), def.local_a(y, theta0));
      };
      auto u_exact = [&](const Point& x) { return def.exact(x, theta0); };
      generated_source_.resize(grid_.interior.size());
      parallel_for(grid_.interior.size(), [&](std::size_t r) {
        generated_source_[r] =
            reference_operator(kernel_, pair_coeff, u_exact, grid_.points[grid_.interior[r]]);
      });
      source_ready_ = true;
      if (!cache_path.empty()) {
        std::FILE* f = std::fopen(cache_path.c_str(), "w");
        if (f) {
          for (Eigen::Index i = 0; i < generated_source_.size(); ++i)
            std::fprintf(f, "%.17g\n", generated_source_[i]);
          std::fclose(f);
        }
      }
    }
  }
}

Distribution CaseRunner::distribution() const {
  return variant_distribution(variant_, def_->weibull_rescale);
}

RuleFamily CaseRunner::family() const { return distribution().preferred_family(); }

SparseGridPlan CaseRunner::base_plan(int eta) const {
  return build_sparse_grid(def_->nparam, eta, family());
}

Eigen::MatrixXd CaseRunner::map_nodes(const SparseGridPlan& base) const {
  return map_to_distribution(base, distribution()).nodes;
}

const Eigen::VectorXd& CaseRunner::generated_source() const {
  if (!source_ready_)
    throw ConfigError("CaseRunner: case " + def_->id + " has a closed-form source");
  return generated_source_;
}

Eigen::VectorXd CaseRunner::solve_with(NonlocalSolver& solver,
                                       const Eigen::VectorXd& theta) const {
  const CaseDef& c = *def_;
  // collar data: closed-form extension where available, otherwise the odd
  // reflection of a per-sample local solve at half the particle spacing
  LocalSolution extension;
  if (collar_sampler_) extension = collar_sampler_->solve(theta);
  auto u_d = [&](const Point& x) {
    if (collar_sampler_) return odd_reflection_value(extension, c.domain, x);
    return c.boundary(x, theta);
  };

  Eigen::VectorXd fvec;
  if (c.source)
    fvec = solver.source_at_interior([&](const Point& x) { return c.source(x, theta); });
  else
    fvec = generated_source_;

  StiffnessSystem sys;
  if (c.uses_kl) {
    Eigen::VectorXd a = kl_basis_ * theta;
    a.array() += shared_kl_field().mean_value;
    const double guard = shared_kl_field().guard;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (!(a[i] > guard))
        throw AdmissibilityError("KL diffusivity " + std::to_string(a[i]) +
                                 " at or below the ellipticity guard");
    sys = solver.assemble_from_node_values(a, fvec, u_d);
  } else if (c.local_a && !c.coeff) {
    Eigen::VectorXd a(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i)
      a[i] = c.local_a(grid_.points[i], theta);
    sys = solver.assemble_from_node_values(a, fvec, u_d);
  } else {
    CoefficientField coeff = CoefficientField::from_two_point(c.coeff);
    sys = solver.assemble(coeff, theta, fvec, u_d);
  }
  return solver.solve(sys);
}

Eigen::VectorXd CaseRunner::solve(const Eigen::VectorXd& theta) const {
  NonlocalSolver solver(grid_, kernel_, table_);
  return solve_with(solver, theta);
}

std::vector<Eigen::VectorXd> CaseRunner::solve_batch(const Eigen::MatrixXd& thetas) const {
  std::vector<Eigen::VectorXd> out(thetas.rows());
  for_each_sample(grid_, kernel_, table_, thetas.rows(), [&](NonlocalSolver& solver, long k) {
    const Eigen::VectorXd full = solve_with(solver, thetas.row(k).transpose());
    Eigen::VectorXd inner(grid_.interior.size());
    for (std::size_t r = 0; r < grid_.interior.size(); ++r) inner[r] = full[grid_.interior[r]];
    out[k] = std::move(inner);
  });
  return out;
}

MomentFields CaseRunner::pcm_moments(int eta, long* K_out) const {
  const SparseGridPlan base = base_plan(eta);
  if (K_out) *K_out = base.size();
  const Eigen::MatrixXd thetas = map_nodes(base);
  return moment_estimates(base, solve_batch(thetas));
}

MomentFields CaseRunner::mc_moments(long samples, std::uint64_t seed) const {
  if (samples < 1) throw ConfigError("mc_moments: need at least one sample");
  const Distribution dist = distribution();
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd thetas(samples, def_->nparam);
  for (long k = 0; k < samples; ++k)
    for (int d = 0; d < def_->nparam; ++d) thetas(k, d) = dist.sample(u01(rng));

  const Eigen::Index n = grid_.interior.size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n);
  const long chunk = 512;
  std::vector<Eigen::VectorXd> buffer;
  for (long start = 0; start < samples; start += chunk) {
    const long count = std::min(chunk, samples - start);
    buffer.assign(count, Eigen::VectorXd());
    for_each_sample(grid_, kernel_, table_, count, [&](NonlocalSolver& solver, long k) {
      const Eigen::VectorXd full = solve_with(solver, thetas.row(start + k).transpose());
      Eigen::VectorXd inner(n);
      for (Eigen::Index r = 0; r < n; ++r) inner[r] = full[grid_.interior[r]];
      buffer[k] = std::move(inner);
    });
    for (long k = 0; k < count; ++k) {  // deterministic order
      mean += buffer[k];
      m2 += buffer[k].cwiseProduct(buffer[k]);
    }
  }
  mean /= static_cast<double>(samples);
  m2 /= static_cast<double>(samples);

  MomentFields out;
  out.mean = mean;
  out.stddev.resize(n);
  if (samples == 1) {
    std::fprintf(stderr, "nlpcm: warning: Monte Carlo std with one sample is zero by "
                         "convention\n");
    out.stddev.setZero();
    return out;
  }
  const double bessel = static_cast<double>(samples) / static_cast<double>(samples - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double var = (m2[i] - mean[i] * mean[i]) * bessel;
    if (var < 0) {
      var = 0;
      ++out.clamped;
    }
    out.stddev[i] = std::sqrt(var);
  }
  return out;
}

MomentFields CaseRunner::closed_moments_at(const std::vector<Point>& pts,
                                           int eta_ref) const {
  const CaseDef& c = *def_;
  if (!c.exact)
    throw ConfigError("closed_moments_at: case " + c.id + " has no closed form");
  const SparseGridPlan base = base_plan(eta_ref);
  const Eigen::MatrixXd thetas = map_nodes(base);
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd u(n);
  for (int k = 0; k < base.size(); ++k) {
    const Eigen::VectorXd theta = thetas.row(k).transpose();
    for (Eigen::Index r = 0; r < n; ++r) u[r] = c.exact(pts[r], theta);
    mean += base.weights(k) * u;
    m2 += base.weights(k) * u.cwiseProduct(u);
  }
  MomentFields out;
  out.mean = mean;
  out.stddev.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double var = m2[i] - mean[i] * mean[i];
    if (var < 0) {
      var = 0;
      ++out.clamped;
    }
    out.stddev[i] = std::sqrt(var);
  }
  return out;
}

MomentFields CaseRunner::reference_moments(int eta_ref,
                                           const LocalReferenceMoments* local) const {
  const CaseDef& c = *def_;
  if (c.reference == CaseDef::Reference::LocalSolve) {
    if (!local)
      throw ConfigError("reference_moments: case " + c.id +
                        " needs a precomputed local reference");
    return local->restrict_to(grid_);
  }
  std::vector<Point> pts;
  pts.reserve(grid_.interior.size());
  for (int i : grid_.interior) pts.push_back(grid_.points[i]);
  return closed_moments_at(pts, eta_ref);
}

LocalReferenceMoments local_reference_moments(const CaseDef& def, DistVariant variant,
                                              int eta_ref, double h_loc) {
  if (def.reference != CaseDef::Reference::LocalSolve)
    throw ConfigError("local_reference_moments: case " + def.id +
                      " has a closed-form reference");
  const Distribution dist = variant_distribution(variant, def.weibull_rescale);
  const SparseGridPlan base = build_sparse_grid(def.nparam, eta_ref, dist.preferred_family());
  const SparseGridPlan mapped = map_to_distribution(base, dist);

  LocalReferenceMoments ref;
  ref.domain = def.domain;
  ref.h_loc = h_loc;
  ref.nx = static_cast<int>(std::lround((def.domain.hi[0] - def.domain.lo[0]) / h_loc)) + 1;
  ref.ny = def.dim == 2
               ? static_cast<int>(std::lround((def.domain.hi[1] - def.domain.lo[1]) / h_loc)) + 1
               : 1;
  const Eigen::Index nn = static_cast<Eigen::Index>(ref.nx) * ref.ny;

  const LocalSampler sampler(def, h_loc);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(nn);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(nn);
  const int K = mapped.size();
  const long chunk = 64;
  std::vector<Eigen::VectorXd> buffer;
  for (int start = 0; start < K; start += chunk) {
    const int count = std::min<long>(chunk, K - start);
    buffer.assign(count, Eigen::VectorXd());
    parallel_for(count, [&](std::size_t k) {
      buffer[k] =
          sampler.solve(mapped.nodes.row(start + static_cast<int>(k)).transpose()).values;
    });
    for (int k = 0; k < count; ++k) {
      mean += base.weights(start + k) * buffer[k];
      m2 += base.weights(start + k) * buffer[k].cwiseProduct(buffer[k]);
    }
  }
  ref.mean = mean;
  ref.stddev.resize(nn);
  for (Eigen::Index i = 0; i < nn; ++i)
    ref.stddev[i] = std::sqrt(std::max(0.0, m2[i] - mean[i] * mean[i]));
  return ref;
}

std::string ConvergenceReport::csv() const {
  std::string out = "# nlpcm-report v1\ncase,h,delta,eta,K,err_mean,err_std,wall_ms\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%.12e,%.12e,%d,%ld,%.12e,%.12e,%.3f\n",
                  r.case_id.c_str(), r.h, r.delta, r.eta, r.K, r.err_mean, r.err_std,
                  r.wall_ms);
    out += line;
  }
  return out;
}

void ConvergenceReport::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("report: cannot open " + path);
  out << csv();
}

ConvergenceReport run_case(const ExperimentConfig& cfg) {
  cfg.validate();
  const CaseDef& def = find_case(cfg.case_id);
  const DistVariant variant = cfg.distribution.empty()
                                  ? def.default_variant
                                  : variant_from_name(cfg.distribution);
  if (!def.allows(variant))
    throw ConfigError("case " + def.id + " does not support distribution '" +
                      variant_name(variant) + "'");

  double ratio = 0;
  if (def.fixed_delta > 0) {
    if (cfg.delta_ratio > 0)
      throw ConfigError("case " + def.id + " has a fixed horizon " +
                        std::to_string(def.fixed_delta) + "; delta_ratio does not apply");
    if (cfg.delta > 0 && std::abs(cfg.delta - def.fixed_delta) > 1e-12)
      throw ConfigError("case " + def.id + " manufactures its data at delta = " +
                        std::to_string(def.fixed_delta));
  } else {
    if (cfg.delta > 0)
      throw ConfigError("case " + def.id + " refines delta with h; use delta_ratio");
    ratio = cfg.delta_ratio > 0 ? cfg.delta_ratio : def.default_ratio;
  }

  const int max_eta = *std::max_element(cfg.eta.begin(), cfg.eta.end());
  ConvergenceReport report;

  if (!cfg.dump_eigs.empty() && def.uses_kl) {
    dump_eigenpairs_csv(shared_kl_field().axis1, cfg.dump_eigs + "_axis1.csv");
    dump_eigenpairs_csv(shared_kl_field().axis2, cfg.dump_eigs + "_axis2.csv");
  }

  std::optional<LocalReferenceMoments> localref;
  int eta_ref = cfg.reference_eta;
  if (def.reference == CaseDef::Reference::LocalSolve) {
    if (eta_ref < 0) eta_ref = max_eta + 1;
    const double hmin = *std::min_element(cfg.h.begin(), cfg.h.end());
    const double h_loc = cfg.h_local > 0 ? cfg.h_local : hmin / 8.0;
    localref = local_reference_moments(def, variant, eta_ref, h_loc);
  } else if (eta_ref < 0) {
    eta_ref = max_eta + 4;
  }

  for (double h : cfg.h) {
    const double delta = def.fixed_delta > 0 ? def.fixed_delta : ratio * h;
    if (delta / h < cfg.min_ratio - 1e-9)
      throw ConfigError("unisolvency guard: delta/h = " + std::to_string(delta / h) +
                        " below the configured minimum " + std::to_string(cfg.min_ratio));

    CaseRunner runner(def, variant, h, delta, cfg.cache_dir);
    if (!cfg.dump_grid.empty())
      dump_grid_csv(runner.grid(), cfg.dump_grid + "_h" + format_double_tag(h) + ".csv");
    if (!cfg.dump_weights.empty())
      dump_weights_csv(runner.grid(), runner.table(),
                       cfg.dump_weights + "_h" + format_double_tag(h) + ".csv");

    // Error metric per reference kind: manufactured nonlocal solutions are
    // compared as piecewise-constant fields in L2(Omega), the reading under
    // which the numerical solution is defined; local-limit references are
    // compared nodally, matching the discrete norms of the compatibility
    // estimates.
    const bool pc_metric = def.reference == CaseDef::Reference::ClosedNonlocal;
    CellQuadrature cellq;
    MomentFields ref_pc, ref_nodal;
    if (pc_metric) {
      cellq = CellQuadrature::build(runner.grid());
      ref_pc = runner.closed_moments_at(cellq.points, eta_ref);
    } else {
      ref_nodal = runner.reference_moments(eta_ref, localref ? &*localref : nullptr);
    }
    auto case_error = [&](const MomentFields& m) {
      if (pc_metric)
        return std::make_pair(pc_l2_error(cellq, m.mean, ref_pc.mean),
                              pc_l2_error(cellq, m.stddev, ref_pc.stddev));
      return std::make_pair(discrete_l2_error(runner.grid(), m.mean, ref_nodal.mean),
                            discrete_l2_error(runner.grid(), m.stddev, ref_nodal.stddev));
    };

    for (int eta : cfg.eta) {
      const auto t0 = std::chrono::steady_clock::now();
      long K = 0;
      const SparseGridPlan base = runner.base_plan(eta);
      K = base.size();
      if (!cfg.dump_plan.empty() && h == cfg.h.front())
        dump_plan_csv(map_to_distribution(base, runner.distribution()),
                      cfg.dump_plan + "_eta" + std::to_string(eta) + ".csv");
      const Eigen::MatrixXd thetas = runner.map_nodes(base);
      const auto sols = runner.solve_batch(thetas);
      if (!cfg.dump_solutions.empty()) {
        for (std::size_t k = 0; k < sols.size(); ++k) {
          Eigen::VectorXd full = Eigen::VectorXd::Zero(runner.grid().size());
          for (std::size_t r = 0; r < runner.grid().interior.size(); ++r)
            full[runner.grid().interior[r]] = sols[k][r];
          dump_solution_csv(runner.grid(), full,
                            cfg.dump_solutions + "_h" + format_double_tag(h) + "_eta" +
                                std::to_string(eta) + "_k" + std::to_string(k) + ".csv");
        }
      }
      const MomentFields m = moment_estimates(base, sols);

      ReportRow row;
      row.case_id = def.id;
      row.h = h;
      row.delta = delta;
      row.eta = eta;
      row.K = K;
      std::tie(row.err_mean, row.err_std) = case_error(m);
      row.wall_ms = cfg.report_wall_time ? wall_since(t0) : 0.0;
      report.rows.push_back(row);
    }

    if (cfg.mc_samples > 0) {
      const auto t0 = std::chrono::steady_clock::now();
      const MomentFields m = runner.mc_moments(cfg.mc_samples, cfg.seed);
      ReportRow row;
      row.case_id = def.id;
      row.h = h;
      row.delta = delta;
      row.eta = -1;
      row.K = cfg.mc_samples;
      std::tie(row.err_mean, row.err_std) = case_error(m);
      row.wall_ms = cfg.report_wall_time ? wall_since(t0) : 0.0;
      report.rows.push_back(row);
    }
  }

  // slope fit: h-refinement series at the largest level, or level series at
  // fixed h with the sample count as the scale
  std::vector<std::pair<double, double>> pm, ps;
  if (cfg.h.size() >= 3) {
    report.scale = def.fixed_delta > 0 ? "h" : "delta";
    for (const auto& r : report.rows) {
      if (r.eta != max_eta) continue;
      const double x = def.fixed_delta > 0 ? r.h : r.delta;
      pm.emplace_back(x, r.err_mean);
      ps.emplace_back(x, r.err_std);
    }
  } else if (cfg.h.size() == 1 && cfg.eta.size() >= 3) {
    report.scale = "K";
    for (const auto& r : report.rows) {
      if (r.eta < 0) continue;
      pm.emplace_back(static_cast<double>(r.K), r.err_mean);
      ps.emplace_back(static_cast<double>(r.K), r.err_std);
    }
  }
  if (pm.size() >= 3) {
    bool positive = true;
    for (const auto& [x, y] : pm) positive = positive && y > 0;
    for (const auto& [x, y] : ps) positive = positive && y > 0;
    if (positive) {
      report.mean_fit = fit_slope(pm);
      report.std_fit = fit_slope(ps);
    }
  }

  if (!cfg.output.empty()) report.write(cfg.output);
  return report;
}

}  // namespace nlpcm
