#include "nlpcm/nonlocal.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/trapezoidal.hpp>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nlpcm/errors.hpp"

namespace nlpcm {

namespace {

constexpr double kSolveTol = 1e-10;
constexpr int kDirectLimit = 200000;

[[noreturn]] void admissibility_failure(const Point& x, const Point& y, double value) {
  std::ostringstream os;
  os << "CoefficientField: inadmissible value " << value << " at x=(" << x[0] << ","
     << x[1] << "), y=(" << y[0] << "," << y[1] << ")";
  throw AdmissibilityError(os.str());
}

}  // namespace

double harmonic_pair(double ax, double ay) { return 2.0 / (1.0 / ax + 1.0 / ay); }

CoefficientField CoefficientField::from_two_point(
    std::function<double(const Point&, const Point&, const Eigen::VectorXd&)> fn) {
  CoefficientField c;
  c.two_point = std::move(fn);
  return c;
}

CoefficientField CoefficientField::from_local(
    std::function<double(const Point&, const Eigen::VectorXd&)> a) {
  CoefficientField c;
  c.local_a = std::move(a);
  return c;
}

double CoefficientField::eval_local(const Point& x, const Eigen::VectorXd& xi) const {
  const double v = local_a(x, xi);
  if (!std::isfinite(v) || !(v > check_lower) || !(v < check_upper))
    admissibility_failure(x, x, v);
  return v;
}

double CoefficientField::eval_pair(const Point& x, const Point& y,
                                   const Eigen::VectorXd& xi) const {
  double v;
  if (two_point)
    v = two_point(x, y, xi);
  else
    v = harmonic_pair(local_a(x, xi), local_a(y, xi));
  if (!std::isfinite(v) || !(v > check_lower) || !(v < check_upper))
    admissibility_failure(x, y, v);
  return v;
}

NonlocalSolver::NonlocalSolver(const ParticleGrid& g, const KernelSpec& k,
                               const QuadratureTable& t)
    : grid_(&g), kernel_(k), table_(&t) {
  kernel_values_.resize(g.interior.size());
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const int i = g.interior[r];
    const auto& nbrs = g.neighbor_lists[r];
    kernel_values_[r].resize(nbrs.size());
    for (std::size_t n = 0; n < nbrs.size(); ++n)
      kernel_values_[r][n] = eval_kernel(k, distance(g.points[i], g.points[nbrs[n]]));
  }
}

StiffnessSystem NonlocalSolver::assemble_impl(
    const std::function<double(int, int)>& pair_value, const Eigen::VectorXd& f_interior,
    const std::function<double(const Point&)>& u_d) const {
  const ParticleGrid& g = *grid_;
  const int nint = static_cast<int>(g.interior.size());
  if (f_interior.size() != nint)
    throw AdmissibilityError("NonlocalSolver: source vector size mismatch");

  StiffnessSystem sys;
  sys.values = Eigen::VectorXd::Zero(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.tags[i] == PointTag::Collar) sys.values[i] = u_d(g.points[i]);

  sys.rhs.resize(nint);
  std::vector<Eigen::Triplet<double>> trip;
  std::size_t nnz = nint;
  for (const auto& nl : g.neighbor_lists) nnz += nl.size();
  trip.reserve(nnz);

  for (int r = 0; r < nint; ++r) {
    const int i = g.interior[r];
    const auto& nbrs = g.neighbor_lists[r];
    const auto& w = table_->weights[r];
    double diag = 0.0;
    double rhs = f_interior[r];
    for (std::size_t n = 0; n < nbrs.size(); ++n) {
      const int j = nbrs[n];
      const double c = 2.0 * pair_value(i, j) * kernel_values_[r][n] * w[n];
      diag += c;
      const int rj = g.interior_rank[j];
      if (rj >= 0)
        trip.emplace_back(r, rj, -c);
      else
        rhs += c * sys.values[j];
    }
    trip.emplace_back(r, r, diag);
    sys.rhs[r] = rhs;
  }
  sys.Q.resize(nint, nint);
  sys.Q.setFromTriplets(trip.begin(), trip.end());
  sys.Q.makeCompressed();
  return sys;
}

Eigen::VectorXd NonlocalSolver::source_at_interior(
    const std::function<double(const Point&)>& f) const {
  Eigen::VectorXd out(grid_->interior.size());
  for (std::size_t r = 0; r < grid_->interior.size(); ++r)
    out[r] = f(grid_->points[grid_->interior[r]]);
  return out;
}

StiffnessSystem NonlocalSolver::assemble(const CoefficientField& coeff,
                                         const Eigen::VectorXd& xi,
                                         const std::function<double(const Point&)>& f,
                                         const std::function<double(const Point&)>& u_d) const {
  return assemble(coeff, xi, source_at_interior(f), u_d);
}

StiffnessSystem NonlocalSolver::assemble(const CoefficientField& coeff,
                                         const Eigen::VectorXd& xi,
                                         const Eigen::VectorXd& f_interior,
                                         const std::function<double(const Point&)>& u_d) const {
  if (coeff.has_local() && !coeff.two_point) {
    Eigen::VectorXd a(grid_->size());
    for (std::size_t i = 0; i < grid_->size(); ++i)
      a[i] = coeff.eval_local(grid_->points[i], xi);
    return assemble_from_node_values(a, f_interior, u_d);
  }
  const ParticleGrid& g = *grid_;
  return assemble_impl(
      [&](int i, int j) { return coeff.eval_pair(g.points[i], g.points[j], xi); },
      f_interior, u_d);
}

StiffnessSystem NonlocalSolver::assemble_from_node_values(
    const Eigen::VectorXd& a_nodes, const Eigen::VectorXd& f_interior,
    const std::function<double(const Point&)>& u_d) const {
  for (Eigen::Index i = 0; i < a_nodes.size(); ++i)
    if (!std::isfinite(a_nodes[i]) || !(a_nodes[i] > 0.0))
      admissibility_failure(grid_->points[i], grid_->points[i], a_nodes[i]);
  return assemble_impl(
      [&](int i, int j) { return harmonic_pair(a_nodes[i], a_nodes[j]); }, f_interior, u_d);
}

Eigen::VectorXd NonlocalSolver::solve(StiffnessSystem& sys) {
  const ParticleGrid& g = *grid_;
  const int nint = static_cast<int>(g.interior.size());
  Eigen::VectorXd u(nint);

  if (nint <= kDirectLimit) {
    if (!pattern_ready_) {
      ldlt_.analyzePattern(sys.Q);
      pattern_ready_ = true;
    }
    ldlt_.factorize(sys.Q);
    if (ldlt_.info() != Eigen::Success)
      throw SolverError("NonlocalSolver: LDLT factorization failed");
    if (ldlt_.vectorD().minCoeff() <= 0.0)
      throw InvariantError(
          "NonlocalSolver: indefinite stiffness matrix; assembly invariant violated");
    u = ldlt_.solve(sys.rhs);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                             Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(20000);
    cg.compute(sys.Q);
    u = cg.solve(sys.rhs);
    if (cg.info() != Eigen::Success) {
      std::ostringstream os;
      os << "NonlocalSolver: CG did not converge, iterations=" << cg.iterations()
         << ", residual=" << cg.error();
      throw SolverError(os.str());
    }
  }

  const double scale = sys.rhs.lpNorm<Eigen::Infinity>() +
                       sys.Q.coeffs().abs().maxCoeff() * u.lpNorm<Eigen::Infinity>() +
                       1e-300;
  const double resid = (sys.Q * u - sys.rhs).lpNorm<Eigen::Infinity>() / scale;
  if (!(resid <= kSolveTol)) {
    std::ostringstream os;
    os << "NonlocalSolver: relative residual " << resid << " exceeds " << kSolveTol;
    throw SolverError(os.str());
  }

  for (int r = 0; r < nint; ++r) sys.values[g.interior[r]] = u[r];
  return sys.values;
}

Eigen::VectorXd NonlocalSolver::solve_sample(const CoefficientField& coeff,
                                             const Eigen::VectorXd& xi,
                                             const std::function<double(const Point&)>& f,
                                             const std::function<double(const Point&)>& u_d) {
  StiffnessSystem sys = assemble(coeff, xi, f, u_d);
  return solve(sys);
}

Eigen::VectorXd NonlocalSolver::apply_operator(const CoefficientField& coeff,
                                               const Eigen::VectorXd& xi,
                                               const Eigen::VectorXd& v) const {
  const ParticleGrid& g = *grid_;
  Eigen::VectorXd out(g.interior.size());
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const int i = g.interior[r];
    const auto& nbrs = g.neighbor_lists[r];
    const auto& w = table_->weights[r];
    double acc = 0.0;
    for (std::size_t n = 0; n < nbrs.size(); ++n) {
      const int j = nbrs[n];
      acc += coeff.eval_pair(g.points[i], g.points[j], xi) * kernel_values_[r][n] *
             w[n] * (v[j] - v[i]);
    }
    out[r] = -2.0 * acc;
  }
  return out;
}

double reference_operator(const KernelSpec& k,
                          const std::function<double(const Point&, const Point&)>& coeff,
                          const std::function<double(const Point&)>& u, const Point& x,
                          double abs_tol) {
  using boost::math::quadrature::gauss_kronrod;
  const double ux = u(x);
  double total = 0.0, err_total = 0.0;

  if (k.dim == 1) {
    auto integrand = [&](double y) {
      const Point py{y, 0.0};
      return coeff(x, py) * eval_kernel(k, std::abs(y - x[0])) * (u(py) - ux);
    };
    for (int side = 0; side < 2; ++side) {
      const double a = side == 0 ? x[0] - k.delta : x[0];
      const double b = side == 0 ? x[0] : x[0] + k.delta;
      double err = 0.0;
      total += gauss_kronrod<double, 15>::integrate(integrand, a, b, 15, 1e-13, &err);
      err_total += err;
    }
  } else {
    auto radial = [&](double rho) {
      auto angular = [&](double theta) {
        const Point py{x[0] + rho * std::cos(theta), x[1] + rho * std::sin(theta)};
        return coeff(x, py) * (u(py) - ux);
      };
      const double ring =
          boost::math::quadrature::trapezoidal(angular, 0.0, 2.0 * M_PI, 1e-12);
      return ring * rho * eval_kernel(k, rho);
    };
    double err = 0.0;
    total = gauss_kronrod<double, 15>::integrate(radial, 0.0, k.delta, 15, 1e-13, &err);
    err_total = err;
  }

  if (!(err_total <= abs_tol)) {
    std::ostringstream os;
    os << "reference_operator: integration error estimate " << err_total
       << " exceeds tolerance " << abs_tol;
    throw SolverError(os.str());
  }
  return -2.0 * total;
}

void dump_solution_csv(const ParticleGrid& g, const Eigen::VectorXd& values,
                       const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("dump_solution_csv: cannot open " + path);
  std::fprintf(f, "index,x,y,u\n");
  for (std::size_t i = 0; i < g.size(); ++i)
    std::fprintf(f, "%zu,%.17g,%.17g,%.17g\n", i, g.points[i][0], g.points[i][1],
                 values[static_cast<Eigen::Index>(i)]);
  std::fclose(f);
}

}  // namespace nlpcm
