#pragma once

#include <Eigen/Dense>
#include <functional>

#include "nlpcm/grid.hpp"

namespace nlpcm {

/// Classical diffusion problem -div(a grad u) = f with Dirichlet data, used
/// as the reference where no closed-form local limit exists. Conservative
/// flux discretization with harmonic face averaging of node values; the disk
/// is solved on a boundary-fitted radial grid (radial a, f only).
struct LocalProblem {
  DomainSpec domain;
  std::function<double(const Point&)> a;         // coefficient, one sample bound
  std::function<double(const Point&)> f;         // source
  std::function<double(const Point&)> dirichlet; // boundary data
  double h = 0;                                  // mesh width
};

struct LocalSolution {
  DomainSpec domain;
  double h = 0;
  int nx = 0, ny = 0;            // node counts per axis, boundary included
  Eigen::VectorXd values;        // row-major nodes; radial profile for disks

  /// Value at a node of the solver grid (throws off-grid); for disks, value
  /// at radius |x - center| by piecewise-linear radial interpolation.
  double at(const Point& x) const;
};

LocalSolution solve_local(const LocalProblem& p);

}  // namespace nlpcm
