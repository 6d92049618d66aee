#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <limits>

#include "nlpcm/grid.hpp"
#include "nlpcm/kernel.hpp"
#include "nlpcm/quadrature.hpp"

namespace nlpcm {

/// Two-point diffusion strength A(x, y, xi), either given directly or lifted
/// from a pointwise coefficient a(x, xi) by the harmonic mean
/// A = 2 / (a(x)^{-1} + a(y)^{-1}). Every evaluation is checked against
/// (check_lower, check_upper); values outside are an admissibility error.
struct CoefficientField {
  std::function<double(const Point&, const Point&, const Eigen::VectorXd&)> two_point;
  std::function<double(const Point&, const Eigen::VectorXd&)> local_a;
  double check_lower = 0.0;
  double check_upper = std::numeric_limits<double>::infinity();

  static CoefficientField from_two_point(
      std::function<double(const Point&, const Point&, const Eigen::VectorXd&)> fn);
  static CoefficientField from_local(
      std::function<double(const Point&, const Eigen::VectorXd&)> a);

  bool has_local() const { return static_cast<bool>(local_a); }
  double eval_pair(const Point& x, const Point& y, const Eigen::VectorXd& xi) const;
  double eval_local(const Point& x, const Eigen::VectorXd& xi) const;
};

double harmonic_pair(double ax, double ay);

/// Assembled linear system for one sample: symmetric interior block, right
/// hand side with collar contributions folded in, and the collar data.
struct StiffnessSystem {
  Eigen::SparseMatrix<double> Q;   // interior x interior
  Eigen::VectorXd rhs;             // size = interior count
  Eigen::VectorXd values;          // size = grid size; collar slots hold u_D
};

/// Discrete nonlocal operator over a fixed (grid, kernel, weights) triple.
/// The sparsity pattern is sample-independent, so the symbolic factorization
/// is computed once and reused across samples.
class NonlocalSolver {
 public:
  NonlocalSolver(const ParticleGrid& g, const KernelSpec& k, const QuadratureTable& t);

  StiffnessSystem assemble(const CoefficientField& coeff, const Eigen::VectorXd& xi,
                           const std::function<double(const Point&)>& f,
                           const std::function<double(const Point&)>& u_d) const;
  StiffnessSystem assemble(const CoefficientField& coeff, const Eigen::VectorXd& xi,
                           const Eigen::VectorXd& f_interior,
                           const std::function<double(const Point&)>& u_d) const;

  /// As above but with the pointwise coefficient already evaluated on every
  /// grid point (harmonic-mean lift applied entrywise).
  StiffnessSystem assemble_from_node_values(
      const Eigen::VectorXd& a_nodes, const Eigen::VectorXd& f_interior,
      const std::function<double(const Point&)>& u_d) const;

  Eigen::VectorXd source_at_interior(const std::function<double(const Point&)>& f) const;

  /// Direct sparse factorization up to 2e5 unknowns, diagonally preconditioned
  /// conjugate gradients above. Fills sys.values at interior slots; relative
  /// residual above 1e-10 or an indefinite factorization is an error.
  Eigen::VectorXd solve(StiffnessSystem& sys);

  Eigen::VectorXd solve_sample(const CoefficientField& coeff, const Eigen::VectorXd& xi,
                               const std::function<double(const Point&)>& f,
                               const std::function<double(const Point&)>& u_d);

  /// -L_h^delta[v] at every interior point, for an arbitrary grid function v
  /// given on all points.
  Eigen::VectorXd apply_operator(const CoefficientField& coeff, const Eigen::VectorXd& xi,
                                 const Eigen::VectorXd& v) const;

  const ParticleGrid& grid() const { return *grid_; }
  const KernelSpec& kernel() const { return kernel_; }

 private:
  StiffnessSystem assemble_impl(const std::function<double(int, int)>& pair_value,
                                const Eigen::VectorXd& f_interior,
                                const std::function<double(const Point&)>& u_d) const;

  const ParticleGrid* grid_;
  KernelSpec kernel_;
  const QuadratureTable* table_;
  std::vector<std::vector<double>> kernel_values_;  // gamma per neighbor slot
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool pattern_ready_ = false;
};

/// High-accuracy -L^delta[u](x) = -2 int_{B_delta(x)} A gamma (u(y) - u(x)) dy
/// by adaptive Gauss-Kronrod (polar in 2d), absolute tolerance abs_tol.
double reference_operator(const KernelSpec& k,
                          const std::function<double(const Point&, const Point&)>& coeff,
                          const std::function<double(const Point&)>& u, const Point& x,
                          double abs_tol = 1e-10);

/// Solution dump: index, coordinates, value.
void dump_solution_csv(const ParticleGrid& g, const Eigen::VectorXd& values,
                       const std::string& path);

}  // namespace nlpcm
