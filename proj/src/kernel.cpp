#include "nlpcm/kernel.hpp"

#include <cmath>

#include "nlpcm/errors.hpp"

namespace nlpcm {

int total_degree(const MultiIndex& beta) { return beta[0] + beta[1]; }

std::vector<MultiIndex> monomial_basis(int dim, int max_degree) {
  std::vector<MultiIndex> out;
  for (int deg = 0; deg <= max_degree; ++deg) {
    if (dim == 1) {
      out.push_back({deg, 0});
    } else {
      for (int b1 = 0; b1 <= deg; ++b1) out.push_back({b1, deg - b1});
    }
  }
  return out;
}

double unit_sphere_measure(int dim) {
  if (dim == 1) return 2.0;
  if (dim == 2) return 2.0 * M_PI;
  throw AdmissibilityError("unit_sphere_measure: dim must be 1 or 2");
}

double normalization_constant(int dim, double s) {
  if (dim != 1 && dim != 2)
    throw AdmissibilityError("normalization_constant: dim must be 1 or 2");
  if (s < 0.0 || s >= static_cast<double>(dim))
    throw AdmissibilityError("normalization_constant: need 0 <= s < d, got s=" +
                             std::to_string(s) + ", d=" + std::to_string(dim));
  return dim * (dim + 2.0 - s) / unit_sphere_measure(dim);
}

KernelSpec KernelSpec::make(int dim, double s, double delta) {
  if (delta <= 0.0) throw AdmissibilityError("KernelSpec: horizon must be positive");
  KernelSpec k;
  k.dim = dim;
  k.s = s;
  k.delta = delta;
  k.d0 = normalization_constant(dim, s);
  return k;
}

double KernelSpec::operator()(double r) const { return eval_kernel(*this, r); }

double eval_kernel(const KernelSpec& k, double r) {
  if (r < 0.0) throw AdmissibilityError("eval_kernel: negative radius");
  if (r >= k.delta) return 0.0;
  if (r == 0.0) {
    if (k.s > 0.0)
      throw SingularEvaluationError("eval_kernel: r = 0 with s > 0 is singular");
    return k.d0 / std::pow(k.delta, k.dim + 2.0 - k.s);
  }
  return k.d0 / (std::pow(k.delta, k.dim + 2.0 - k.s) * std::pow(r, k.s));
}

namespace {

double double_factorial(int n) {
  // (-1)!! = 0!! = 1
  double p = 1.0;
  for (int k = n; k >= 2; k -= 2) p *= k;
  return p;
}

// int_{S^{d-1}} w^beta dsigma(w); vanishes when any component is odd.
double angular_moment(int dim, const MultiIndex& beta) {
  if (beta[0] % 2 != 0 || beta[1] % 2 != 0) return 0.0;
  if (dim == 1) return 2.0;
  const int p = beta[0], q = beta[1];
  return 2.0 * M_PI * double_factorial(p - 1) * double_factorial(q - 1) /
         double_factorial(p + q);
}

}  // namespace

double ball_moment(const KernelSpec& k, const MultiIndex& beta) {
  const double ang = angular_moment(k.dim, beta);
  if (ang == 0.0) return 0.0;
  const int deg = total_degree(beta);
  // radial factor: D0 * delta^{deg-2} / (d + deg - s)
  return k.d0 * std::pow(k.delta, deg - 2.0) / (k.dim + deg - k.s) * ang;
}

std::vector<double> ball_moments(const KernelSpec& k, int max_degree) {
  std::vector<double> g;
  for (const auto& beta : monomial_basis(k.dim, max_degree))
    g.push_back(ball_moment(k, beta));
  return g;
}

}  // namespace nlpcm
