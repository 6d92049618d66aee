#pragma once

#include <string>
#include <vector>

#include "nlpcm/grid.hpp"
#include "nlpcm/kernel.hpp"

namespace nlpcm {

/// Diagnostics of one per-particle weight solve.
struct WeightSolveInfo {
  double residual = 0.0;  // relative inf-norm of the constraint residual
  bool used_pseudo_inverse = false;
};

/// Per-particle neighbor weights omega_{j,i}, aligned with the grid's
/// neighbor lists, plus solve metadata.
struct QuadratureTable {
  std::vector<std::vector<double>> weights;  // [interior rank][neighbor slot]
  double max_constraint_residual = 0.0;
  int pseudo_inverse_count = 0;
  std::size_t distinct_stencils = 0;

  const std::vector<double>& weights_for(const ParticleGrid& g, int point_index) const;
};

/// Minimum-norm quadrature weights for the ball around interior point i,
/// reproducing every kernel-weighted polynomial of degree <= 3 exactly:
/// omega = W^{-1} H^T (H W^{-1} H^T)^+ g, with W_kk = gamma_delta(|x_k - x_i|).
/// The pseudo-inverse drops Gram eigenvalues below 1e-12 * lambda_max.
/// Throws UnisolvencyError when the constraint residual exceeds 1e-10.
std::vector<double> compute_weights(const ParticleGrid& g, const KernelSpec& k,
                                    int point_index, WeightSolveInfo* info = nullptr);

/// Weights for every interior point. Identical integer stencils share one
/// solve; the cache is a concurrent memo (duplicate computation permitted,
/// results identical).
QuadratureTable build_quadrature(const ParticleGrid& g, const KernelSpec& k);

/// I_h[f] = sum_j f(x_i, x_j) omega_{j,i} over the neighbors of i.
template <class F>
double apply_quadrature(const ParticleGrid& g, const QuadratureTable& table,
                        int point_index, F&& f) {
  const auto& nbrs = g.neighbors(point_index);
  const auto& w = table.weights_for(g, point_index);
  double acc = 0.0;
  for (std::size_t n = 0; n < nbrs.size(); ++n)
    acc += f(g.points[point_index], g.points[nbrs[n]]) * w[n];
  return acc;
}

/// Audit dump: one row (i, j, omega_ji) per interior point/neighbor pair.
void dump_weights_csv(const ParticleGrid& g, const QuadratureTable& table,
                      const std::string& path);

}  // namespace nlpcm
