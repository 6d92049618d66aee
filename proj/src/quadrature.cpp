#include "nlpcm/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <unordered_map>

#include "nlpcm/errors.hpp"
#include "nlpcm/parallel.hpp"

namespace nlpcm {

namespace {

constexpr double kResidualTol = 1e-10;
constexpr double kEigCutoff = 1e-12;  // relative to lambda_max

struct StencilKey {
  std::vector<std::int32_t> offsets;  // (d1, d2) pairs in neighbor order
  bool operator==(const StencilKey& o) const { return offsets == o.offsets; }
};

struct StencilHash {
  std::size_t operator()(const StencilKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (auto v : k.offsets) {
      h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(v));
      h *= 1099511628211ull;
    }
    return h;
  }
};

StencilKey stencil_key(const ParticleGrid& g, int point_index) {
  StencilKey key;
  const auto& base = g.lattice[point_index];
  for (int j : g.neighbors(point_index)) {
    key.offsets.push_back(g.lattice[j][0] - base[0]);
    key.offsets.push_back(g.lattice[j][1] - base[1]);
  }
  return key;
}

}  // namespace

const std::vector<double>& QuadratureTable::weights_for(const ParticleGrid& g,
                                                        int point_index) const {
  const int rank = g.interior_rank[point_index];
  if (rank < 0)
    throw AdmissibilityError("QuadratureTable: no weights for collar point " +
                             std::to_string(point_index));
  return weights[rank];
}

std::vector<double> compute_weights(const ParticleGrid& g, const KernelSpec& k,
                                    int point_index, WeightSolveInfo* info) {
  const auto& nbrs = g.neighbors(point_index);
  const int m = static_cast<int>(nbrs.size());
  if (m == 0)
    throw UnisolvencyError("compute_weights: empty neighborhood at point " +
                           std::to_string(point_index));

  const auto basis = monomial_basis(g.dim, 3);
  const int nb = static_cast<int>(basis.size());
  const auto g_target = ball_moments(k, 3);
  const Point& xi = g.points[point_index];

  // Per-neighbor kernel values and monomial powers of the offset up to degree 6
  // (the Gram matrix needs beta + theta).
  Eigen::VectorXd gamma(m);
  Eigen::MatrixXd pw1(m, 7), pw2(m, 7);
  for (int n = 0; n < m; ++n) {
    const Point& xj = g.points[nbrs[n]];
    gamma(n) = eval_kernel(k, distance(xi, xj));
    pw1(n, 0) = pw2(n, 0) = 1.0;
    for (int p = 1; p <= 6; ++p) {
      pw1(n, p) = pw1(n, p - 1) * (xj[0] - xi[0]);
      pw2(n, p) = pw2(n, p - 1) * (xj[1] - xi[1]);
    }
  }

  // Gram matrix of the reproducing constraints: the W^{-1} factor cancels one
  // kernel power, leaving G_{bt} = sum_j gamma_j (x_j - x_i)^{b + t}.
  Eigen::MatrixXd gram(nb, nb);
  for (int b = 0; b < nb; ++b) {
    for (int t = b; t < nb; ++t) {
      const int p1 = basis[b][0] + basis[t][0];
      const int p2 = basis[b][1] + basis[t][1];
      double acc = 0.0;
      for (int n = 0; n < m; ++n) acc += gamma(n) * pw1(n, p1) * pw2(n, p2);
      gram(b, t) = acc;
      gram(t, b) = acc;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success)
    throw SolverError("compute_weights: Gram eigensolve failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double cutoff = kEigCutoff * lam(nb - 1);

  Eigen::VectorXd gvec = Eigen::Map<const Eigen::VectorXd>(g_target.data(), nb);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nb);
  bool pseudo = false;
  for (int e = 0; e < nb; ++e) {
    if (lam(e) <= cutoff) {
      pseudo = true;
      continue;
    }
    const Eigen::VectorXd v = es.eigenvectors().col(e);
    b += v * (v.dot(gvec) / lam(e));
  }

  // omega_j = (W^{-1} H^T b)_j = sum_beta b_beta (x_j - x_i)^beta
  std::vector<double> omega(m);
  for (int n = 0; n < m; ++n) {
    double acc = 0.0;
    for (int e = 0; e < nb; ++e) acc += b(e) * pw1(n, basis[e][0]) * pw2(n, basis[e][1]);
    omega[n] = acc;
  }

  // Constraint residual ||H omega - g||_inf / ||g||_inf.
  double resid = 0.0, gnorm = 0.0;
  for (int e = 0; e < nb; ++e) {
    double acc = 0.0;
    for (int n = 0; n < m; ++n)
      acc += gamma(n) * pw1(n, basis[e][0]) * pw2(n, basis[e][1]) * omega[n];
    resid = std::max(resid, std::abs(acc - gvec(e)));
    gnorm = std::max(gnorm, std::abs(gvec(e)));
  }
  resid /= gnorm;
  if (!(resid <= kResidualTol)) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "compute_weights: constraint residual %.3e exceeds %.1e "
                  "(h/delta = %.4f, %d neighbors)",
                  resid, kResidualTol, g.h / k.delta, m);
    throw UnisolvencyError(msg);
  }
  if (info) {
    info->residual = resid;
    info->used_pseudo_inverse = pseudo;
  }
  return omega;
}

QuadratureTable build_quadrature(const ParticleGrid& g, const KernelSpec& k) {
  QuadratureTable table;
  table.weights.resize(g.interior.size());

  std::unordered_map<StencilKey, std::vector<double>, StencilHash> memo;
  std::mutex memo_mutex;
  std::vector<WeightSolveInfo> infos(g.interior.size());
  std::vector<char> fresh(g.interior.size(), 0);

  parallel_for(g.interior.size(), [&](std::size_t r) {
    const int i = g.interior[r];
    StencilKey key = stencil_key(g, i);
    {
      std::lock_guard<std::mutex> lock(memo_mutex);
      auto it = memo.find(key);
      if (it != memo.end()) {
        table.weights[r] = it->second;
        return;
      }
    }
    table.weights[r] = compute_weights(g, k, i, &infos[r]);
    fresh[r] = 1;
    std::lock_guard<std::mutex> lock(memo_mutex);
    memo.emplace(std::move(key), table.weights[r]);
  });

  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    if (!fresh[r]) continue;
    table.max_constraint_residual =
        std::max(table.max_constraint_residual, infos[r].residual);
    if (infos[r].used_pseudo_inverse) ++table.pseudo_inverse_count;
  }
  table.distinct_stencils = memo.size();
  return table;
}

void dump_weights_csv(const ParticleGrid& g, const QuadratureTable& table,
                      const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("dump_weights_csv: cannot open " + path);
  std::fprintf(f, "i,j,omega\n");
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const auto& nbrs = g.neighbor_lists[r];
    for (std::size_t n = 0; n < nbrs.size(); ++n)
      std::fprintf(f, "%d,%d,%.17g\n", g.interior[r], nbrs[n], table.weights[r][n]);
  }
  std::fclose(f);
}

}  // namespace nlpcm
