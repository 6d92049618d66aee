#include "nlpcm/sparse_grid.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <cstdio>
#include <functional>

#include "nlpcm/errors.hpp"

namespace nlpcm {

namespace {

constexpr double kMergeTol = 1e-13;

// Nodes and weights of a symmetric Jacobi (tridiagonal) matrix via
// Golub-Welsch; mass is the measure's total weight.
Rule1D golub_welsch(RuleFamily family, const std::vector<double>& offdiag, double mass) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = offdiag[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success) throw SolverError("golub_welsch: eigensolve failed");

  Rule1D rule;
  rule.family = family;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = mass * v0 * v0;
  }
  // enforce exact symmetry so that shared nodes across levels merge bit-exactly
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

Rule1D clenshaw_curtis(int npoints) {
  Rule1D rule;
  rule.family = RuleFamily::ClenshawCurtis;
  if (npoints == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  const int n = npoints - 1;  // even for the nested growth
  rule.nodes.resize(npoints);
  rule.weights.resize(npoints);
  for (int j = 0; j <= n; ++j) {
    double w = 1.0;
    for (int k = 1; k <= n / 2; ++k) {
      const double bk = (2 * k == n) ? 1.0 : 2.0;
      w -= bk * std::cos(2.0 * k * j * M_PI / n) / (4.0 * k * k - 1.0);
    }
    const double cj = (j == 0 || j == n) ? 1.0 : 2.0;
    // ascending nodes; weight normalized to the uniform probability measure
    rule.nodes[n - j] = std::cos(j * M_PI / n);
    rule.weights[n - j] = cj * w / (2.0 * n);
  }
  for (int i = 0; i < npoints / 2; ++i) {
    rule.nodes[i] = -rule.nodes[npoints - 1 - i];
    rule.weights[i] = rule.weights[npoints - 1 - i];
  }
  if (npoints % 2 == 1) rule.nodes[npoints / 2] = 0.0;
  return rule;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_quantile(double u) { return std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0); }

long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long b = 1;
  for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
  return b;
}

struct PlanEntry {
  std::array<double, 8> node;
  double weight;
};

SparseGridPlan merge_entries(std::vector<PlanEntry>& entries, int dim) {
  std::sort(entries.begin(), entries.end(), [dim](const PlanEntry& a, const PlanEntry& b) {
    for (int d = 0; d < dim; ++d) {
      if (a.node[d] < b.node[d]) return true;
      if (a.node[d] > b.node[d]) return false;
    }
    return false;
  });
  std::vector<PlanEntry> merged;
  for (const auto& e : entries) {
    bool same = !merged.empty();
    if (same)
      for (int d = 0; d < dim; ++d)
        if (std::abs(e.node[d] - merged.back().node[d]) > kMergeTol) {
          same = false;
          break;
        }
    if (same)
      merged.back().weight += e.weight;
    else
      merged.push_back(e);
  }
  SparseGridPlan plan;
  plan.dim = dim;
  plan.nodes.resize(static_cast<Eigen::Index>(merged.size()), dim);
  plan.weights.resize(static_cast<Eigen::Index>(merged.size()));
  for (std::size_t r = 0; r < merged.size(); ++r) {
    for (int d = 0; d < dim; ++d) plan.nodes(r, d) = merged[r].node[d];
    plan.weights(r) = merged[r].weight;
  }
  return plan;
}

}  // namespace

int Rule1D::growth(RuleFamily f, int index) {
  if (index < 1) throw AdmissibilityError("Rule1D::growth: index must be >= 1");
  if (f == RuleFamily::ClenshawCurtis) return index == 1 ? 1 : (1 << (index - 1)) + 1;
  return 2 * index - 1;
}

Rule1D Rule1D::create(RuleFamily f, int npoints) {
  if (npoints < 1) throw AdmissibilityError("Rule1D::create: need at least one node");
  switch (f) {
    case RuleFamily::ClenshawCurtis:
      return clenshaw_curtis(npoints);
    case RuleFamily::GaussLegendre: {
      std::vector<double> off(npoints - 1);
      for (int k = 1; k < npoints; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
      return golub_welsch(f, off, 1.0);
    }
    case RuleFamily::GaussHermite: {
      std::vector<double> off(npoints - 1);
      for (int k = 1; k < npoints; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
      return golub_welsch(f, off, 1.0);
    }
  }
  throw AdmissibilityError("Rule1D::create: unknown family");
}

Distribution Distribution::uniform(double a, double b) {
  if (!(a < b)) throw AdmissibilityError("Distribution::uniform: need a < b");
  Distribution d;
  d.kind = Kind::Uniform;
  d.a = a;
  d.b = b;
  return d;
}

Distribution Distribution::gaussian(double mu, double sigma) {
  if (!(sigma > 0)) throw AdmissibilityError("Distribution::gaussian: sigma > 0");
  Distribution d;
  d.kind = Kind::Gaussian;
  d.mu = mu;
  d.sigma = sigma;
  return d;
}

Distribution Distribution::lognormal(double mu, double sigma) {
  Distribution d = gaussian(mu, sigma);
  d.kind = Kind::Lognormal;
  return d;
}

Distribution Distribution::weibull(double shape, double scale, double rescale) {
  if (!(shape > 0) || !(scale > 0))
    throw AdmissibilityError("Distribution::weibull: shape and scale must be positive");
  Distribution d;
  d.kind = Kind::Weibull;
  d.shape = shape;
  d.scale = scale;
  d.rescale = rescale;
  return d;
}

double Distribution::inv_cdf(double u) const {
  if (kind == Kind::Uniform) {
    if (u < 0.0 || u > 1.0) throw AdmissibilityError("inv_cdf: u outside [0,1]");
    return a + (b - a) * u;
  }
  if (u <= 0.0 || u >= 1.0)
    throw AdmissibilityError(
        "inv_cdf: node mapped to the open support boundary (u = 0 or 1)");
  switch (kind) {
    case Kind::Gaussian:
      return mu + sigma * normal_quantile(u);
    case Kind::Lognormal:
      return std::exp(mu + sigma * normal_quantile(u));
    case Kind::Weibull:
      return rescale * scale * std::pow(-std::log1p(-u), 1.0 / shape);
    default:
      return 0.0;
  }
}

double Distribution::cdf(double x) const {
  switch (kind) {
    case Kind::Uniform:
      return std::clamp((x - a) / (b - a), 0.0, 1.0);
    case Kind::Gaussian:
      return normal_cdf((x - mu) / sigma);
    case Kind::Lognormal:
      return x <= 0.0 ? 0.0 : normal_cdf((std::log(x) - mu) / sigma);
    case Kind::Weibull: {
      const double t = x / (rescale * scale);
      return t <= 0.0 ? 0.0 : -std::expm1(-std::pow(t, shape));
    }
  }
  return 0.0;
}

RuleFamily Distribution::preferred_family() const {
  switch (kind) {
    case Kind::Gaussian:
    case Kind::Lognormal:
      return RuleFamily::GaussHermite;
    case Kind::Weibull:
      return RuleFamily::GaussLegendre;
    case Kind::Uniform:
      return RuleFamily::ClenshawCurtis;
  }
  return RuleFamily::ClenshawCurtis;
}

double Distribution::from_canonical(RuleFamily f, double t) const {
  if (f == RuleFamily::GaussHermite) {
    // t is a standard normal node
    if (kind == Kind::Gaussian) return mu + sigma * t;
    if (kind == Kind::Lognormal) return std::exp(mu + sigma * t);
    return inv_cdf(normal_cdf(t));
  }
  // canonical uniform on [-1, 1]
  if (kind == Kind::Uniform) return a + (b - a) * (t + 1.0) / 2.0;
  return inv_cdf((t + 1.0) / 2.0);
}

double Distribution::sample(double u01) const {
  if (kind == Kind::Uniform) return a + (b - a) * u01;
  return inv_cdf(u01);
}

SparseGridPlan build_tensor_grid(const std::vector<Rule1D>& rules) {
  const int dim = static_cast<int>(rules.size());
  if (dim < 1 || dim > 8) throw AdmissibilityError("build_tensor_grid: dim must be 1..8");
  long K = 1;
  for (const auto& r : rules) {
    if (r.nodes.empty()) throw AdmissibilityError("build_tensor_grid: empty rule");
    K *= static_cast<long>(r.nodes.size());
  }
  SparseGridPlan plan;
  plan.dim = dim;
  plan.level = -1;
  plan.family = rules[0].family;
  plan.nodes.resize(K, dim);
  plan.weights.resize(K);
  std::vector<int> idx(dim, 0);
  for (long k = 0; k < K; ++k) {
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      plan.nodes(k, d) = rules[d].nodes[idx[d]];
      w *= rules[d].weights[idx[d]];
    }
    plan.weights(k) = w;
    for (int d = dim - 1; d >= 0; --d) {
      if (++idx[d] < static_cast<int>(rules[d].nodes.size())) break;
      idx[d] = 0;
    }
  }
  return plan;
}

SparseGridPlan build_sparse_grid(int dim, int level, RuleFamily family) {
  if (dim < 1 || dim > 8) throw AdmissibilityError("build_sparse_grid: dim must be 1..8");
  if (level < 0) throw AdmissibilityError("build_sparse_grid: level must be >= 0");

  const int zeta = dim + level;
  std::vector<Rule1D> rules;  // 1-based level index -> rule
  rules.push_back({});        // unused slot 0
  for (int i = 1; i <= zeta - dim + 1; ++i)
    rules.push_back(Rule1D::create(family, Rule1D::growth(family, i)));

  std::vector<PlanEntry> entries;
  std::vector<int> mi(dim, 1);
  // enumerate multi-indices with max(dim, zeta-dim+1) <= |i|_1 <= zeta
  const int lmin = std::max(dim, zeta - dim + 1);
  std::function<void(int, int)> recurse = [&](int d, int remaining_min) {
    if (d == dim - 1) {
      for (int last = 1; last <= zeta; ++last) {
        mi[d] = last;
        int total = 0;
        for (int q = 0; q < dim; ++q) total += mi[q];
        if (total < lmin || total > zeta) continue;
        const int down = zeta - total;
        const double coeff = ((down % 2) ? -1.0 : 1.0) * binomial(dim - 1, down);
        if (coeff == 0.0) continue;
        // tensor block
        std::vector<int> idx(dim, 0);
        long bk = 1;
        for (int q = 0; q < dim; ++q) bk *= static_cast<long>(rules[mi[q]].nodes.size());
        for (long k = 0; k < bk; ++k) {
          PlanEntry e{};
          double w = coeff;
          for (int q = 0; q < dim; ++q) {
            e.node[q] = rules[mi[q]].nodes[idx[q]];
            w *= rules[mi[q]].weights[idx[q]];
          }
          e.weight = w;
          entries.push_back(e);
          for (int q = dim - 1; q >= 0; --q) {
            if (++idx[q] < static_cast<int>(rules[mi[q]].nodes.size())) break;
            idx[q] = 0;
          }
        }
      }
      return;
    }
    for (int v = 1; v <= zeta; ++v) {
      mi[d] = v;
      recurse(d + 1, remaining_min);
    }
  };
  recurse(0, lmin);

  SparseGridPlan plan = merge_entries(entries, dim);
  plan.level = level;
  plan.family = family;
  return plan;
}

SparseGridPlan map_to_distribution(const SparseGridPlan& plan, const Distribution& dist) {
  if (plan.mapped)
    throw AdmissibilityError("map_to_distribution: plan is already mapped");
  SparseGridPlan out = plan;
  out.mapped = true;
  for (Eigen::Index k = 0; k < plan.nodes.rows(); ++k)
    for (int d = 0; d < plan.dim; ++d)
      out.nodes(k, d) = dist.from_canonical(plan.family, plan.nodes(k, d));
  return out;
}

MomentFields moment_estimates(const SparseGridPlan& plan,
                              const std::vector<Eigen::VectorXd>& samples) {
  if (static_cast<int>(samples.size()) != plan.size())
    throw AdmissibilityError("moment_estimates: sample count " +
                             std::to_string(samples.size()) + " does not match plan size " +
                             std::to_string(plan.size()));
  const Eigen::Index n = samples.empty() ? 0 : samples[0].size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < plan.size(); ++k) {
    if (samples[k].size() != n)
      throw AdmissibilityError("moment_estimates: sample field size mismatch");
    mean += plan.weights(k) * samples[k];
    m2 += plan.weights(k) * samples[k].cwiseProduct(samples[k]);
  }
  MomentFields out;
  out.mean = mean;
  out.stddev.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double var = m2[i] - mean[i] * mean[i];
    if (var < 0.0) {
      const double band = 1e-12 * std::max(1.0, std::abs(m2[i]));
      if (var < -band)
        throw InvariantError("moment_estimates: variance " + std::to_string(var) +
                             " below the cancellation band at entry " + std::to_string(i));
      var = 0.0;
      ++out.clamped;
    }
    out.stddev[i] = std::sqrt(var);
  }
  return out;
}

void dump_plan_csv(const SparseGridPlan& plan, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("dump_plan_csv: cannot open " + path);
  std::fprintf(f, "k");
  for (int d = 0; d < plan.dim; ++d) std::fprintf(f, ",xi%d", d + 1);
  std::fprintf(f, ",mu\n");
  for (int k = 0; k < plan.size(); ++k) {
    std::fprintf(f, "%d", k);
    for (int d = 0; d < plan.dim; ++d) std::fprintf(f, ",%.17g", plan.nodes(k, d));
    std::fprintf(f, ",%.17g\n", plan.weights(k));
  }
  std::fclose(f);
}

}  // namespace nlpcm
