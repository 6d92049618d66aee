#pragma once

#include <array>
#include <vector>

namespace nlpcm {

/// Monomial multi-index in up to two variables; the second entry is unused
/// (and zero) in one dimension.
using MultiIndex = std::array<int, 2>;

int total_degree(const MultiIndex& beta);

/// Multi-indices of all monomials with total degree <= max_degree, ordered by
/// total degree and then lexicographically. Size C(dim + max_degree, max_degree).
std::vector<MultiIndex> monomial_basis(int dim, int max_degree);

/// Surface measure of the unit sphere S^{d-1}: 2 in 1d, 2*pi in 2d.
double unit_sphere_measure(int dim);

/// Normalization constant D0 = d*(d+2-s)/omega_{d-1}, chosen so that the
/// second ball moment of the unit-horizon kernel equals the dimension.
/// Rejects s < 0 and s >= d (kernel not admissible).
double normalization_constant(int dim, double s);

/// Compactly supported radial kernel
///   gamma_delta(r) = D0 / (delta^{d+2-s} r^s)  for 0 < r < delta,
/// zero for r >= delta.
struct KernelSpec {
  int dim = 1;
  double s = 0.0;    // singularity order, 0 <= s < dim
  double delta = 1;  // horizon
  double d0 = 0.0;   // derived normalization, not user-set

  static KernelSpec make(int dim, double s, double delta);
  double operator()(double r) const;
};

/// gamma_delta(r). Evaluating at r = 0 with s > 0 is an error: the discrete
/// scheme never evaluates coincident points and a silent infinity would
/// corrupt assembly.
double eval_kernel(const KernelSpec& k, double r);

/// Closed-form ball moment  g_beta = int_{B_delta(0)} gamma_delta(|z|) z^beta dz,
/// via the radial x angular factorization. Zero whenever any component of
/// beta is odd.
double ball_moment(const KernelSpec& k, const MultiIndex& beta);

/// Moments for every entry of monomial_basis(k.dim, max_degree), aligned.
std::vector<double> ball_moments(const KernelSpec& k, int max_degree);

}  // namespace nlpcm
