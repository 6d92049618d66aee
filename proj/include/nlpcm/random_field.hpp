#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nlpcm/grid.hpp"

namespace nlpcm {

/// One axis factor of a separable squared-exponential covariance:
/// amplitude * exp(-|x - y|^2 / corr_length) on [lo, hi].
struct Cov1D {
  double amplitude = 1.0;
  double corr_length = 1.0;
  double lo = -1.0, hi = 1.0;

  double operator()(double x, double y) const;
};

/// Separable 2d covariance  variance * exp(-|x1-y1|^2/eta1 - |x2-y2|^2/eta2).
struct CovarianceSpec {
  double variance = 1.0;
  double eta1 = 1.0;
  double eta2 = 1.0;
};

/// Nystrom discretization of the 1d Fredholm eigenproblem with trapezoid
/// weights. Eigenvalues descending; eigenfunctions orthonormal in the
/// discretized L2 inner product and sign-normalized (positive integral,
/// ties broken by a positive left-endpoint value).
struct EigPairs1D {
  Cov1D cov;
  Eigen::VectorXd nodes;      // m+1 trapezoid nodes
  Eigen::VectorXd qweights;   // trapezoid weights
  std::vector<double> lambda; // full discretized spectrum, descending
  Eigen::MatrixXd phi;        // node values of the leading eigenfunctions

  int stored() const { return static_cast<int>(phi.cols()); }
  /// Discretized trace sum_i w_i Cov(x_i, x_i) = amplitude * (hi - lo).
  double trace() const;
  /// Eigenfunction value off the grid by the kernel-weighted Nystrom
  /// extension (exact at the nodes).
  double eval_phi(int i, double x) const;
};

EigPairs1D eig_decompose_1d(const Cov1D& cov, int panels, int keep = 16);

/// Minimal N with sum_{i<=N} lambda_i >= fraction * total.
int truncate_energy(const std::vector<double>& lambda, double fraction, double total);

/// Truncated tensorized Karhunen-Loeve field
///   a(x, xi) = mean + sum_{i,j} sqrt(lambda_i^(1) lambda_j^(2))
///              phi_i^(1)(x_1) phi_j^(2)(x_2) xi_(i,j),
/// with xi flattened row-major over (i, j). Evaluations at or below
/// `guard` are an ellipticity error.
struct KLField {
  double mean_value = 0.0;
  EigPairs1D axis1, axis2;
  int n1 = 0, n2 = 0;
  double guard = 0.01;

  int dim_xi() const { return n1 * n2; }
  /// The n1*n2 basis products sqrt(lambda lambda) phi phi at x.
  Eigen::VectorXd basis_at(const Point& x) const;
  double eval(const Point& x, const Eigen::VectorXd& xi) const;

  static KLField build(double mean, const CovarianceSpec& cov, double lo, double hi,
                       int panels = 400, double energy_fraction = 0.9);
};

/// Eigenpair export: i, lambda_i, phi_i at the Nystrom nodes.
void dump_eigenpairs_csv(const EigPairs1D& e, const std::string& path);

}  // namespace nlpcm
