#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace nlpcm {

enum class RuleFamily { ClenshawCurtis, GaussLegendre, GaussHermite };

/// One-dimensional quadrature rule normalized to its canonical probability
/// measure: uniform on [-1,1] for Clenshaw-Curtis and Gauss-Legendre, the
/// standard normal for Gauss-Hermite. Nodes ascending, exactly symmetric.
struct Rule1D {
  RuleFamily family = RuleFamily::ClenshawCurtis;
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Node count at 1-based level index: 1, 3, 5, 9, 17, ... for the nested
  /// Clenshaw-Curtis family, 2i-1 for the Gauss families.
  static int growth(RuleFamily f, int index);
  static Rule1D create(RuleFamily f, int npoints);
};

/// Input distribution of one i.i.d. coordinate, with the inverse-CDF map used
/// to push canonical nodes forward. Unbounded supports reject canonical nodes
/// that land exactly on u = 0 or 1.
struct Distribution {
  enum class Kind { Uniform, Gaussian, Lognormal, Weibull };

  Kind kind = Kind::Uniform;
  double a = -1.0, b = 1.0;                  // uniform support
  double mu = 0.0, sigma = 1.0;              // gaussian / lognormal base
  double shape = 1.0, scale = 1.0, rescale = 1.0;  // weibull

  static Distribution uniform(double a, double b);
  static Distribution gaussian(double mu, double sigma);
  static Distribution lognormal(double mu, double sigma);
  static Distribution weibull(double shape, double scale, double rescale = 1.0);

  double inv_cdf(double u) const;
  double cdf(double x) const;

  /// Canonical rule family this distribution maps from: Gauss-Hermite for
  /// gaussian/lognormal, Gauss-Legendre for weibull (interior nodes), nested
  /// Clenshaw-Curtis for bounded uniform.
  RuleFamily preferred_family() const;
  double from_canonical(RuleFamily f, double t) const;
  /// One pseudo-random draw, for Monte Carlo baselines.
  double sample(double u01) const;
};

/// Collocation nodes and quadrature weights of a Smolyak combination (or a
/// plain tensor product). Weights sum to one; duplicate nodes are merged.
struct SparseGridPlan {
  int dim = 1;
  int level = 0;  // eta = zeta - N; -1 for plain tensor plans
  RuleFamily family = RuleFamily::ClenshawCurtis;
  Eigen::MatrixXd nodes;    // K x dim
  Eigen::VectorXd weights;  // K
  bool mapped = false;

  int size() const { return static_cast<int>(nodes.rows()); }
};

/// Full tensor product of the given 1D rules (dimension = rules.size()).
SparseGridPlan build_tensor_grid(const std::vector<Rule1D>& rules);

/// Smolyak sparse grid of the given level: the combination
///   sum over zeta-N+1 <= |i|_1 <= zeta of (-1)^{zeta-|i|} C(N-1, zeta-|i|)
/// of tensor blocks, node union merged with weights summed. Exact for all
/// polynomials of total degree <= level.
SparseGridPlan build_sparse_grid(int dim, int level, RuleFamily family);

/// Push canonical nodes through the distribution's map (i.i.d. coordinates);
/// probability weights are unchanged.
SparseGridPlan map_to_distribution(const SparseGridPlan& plan, const Distribution& dist);

struct MomentFields {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  int clamped = 0;  // variance entries clamped to zero from cancellation
};

/// Pointwise E[u] = sum_k u(., xi_k) mu_k and the matching standard deviation.
/// Variance entries below the -1e-12 cancellation band are an error.
MomentFields moment_estimates(const SparseGridPlan& plan,
                              const std::vector<Eigen::VectorXd>& samples);

/// Plan export: k, node coordinates, weight.
void dump_plan_csv(const SparseGridPlan& plan, const std::string& path);

}  // namespace nlpcm
