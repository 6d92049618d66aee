#include "nlpcm/local_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <vector>

#include "nlpcm/errors.hpp"
#include "nlpcm/nonlocal.hpp"

namespace nlpcm {

namespace {

int node_index(double x, double lo, double h, int n, const char* what) {
  const double t = (x - lo) / h;
  const int i = static_cast<int>(std::lround(t));
  if (i < 0 || i > n || std::abs(t - i) > 1e-8)
    throw AdmissibilityError(std::string(what) + ": point off the solver grid");
  return i;
}

void check_residual(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& rhs) {
  const double scale = rhs.lpNorm<Eigen::Infinity>() +
                       A.coeffs().abs().maxCoeff() * u.lpNorm<Eigen::Infinity>() + 1e-300;
  const double resid = (A * u - rhs).lpNorm<Eigen::Infinity>() / scale;
  if (!(resid <= 1e-10))
    throw SolverError("solve_local: relative residual " + std::to_string(resid));
}

LocalSolution solve_interval(const LocalProblem& p) {
  const double lo = p.domain.lo[0], hi = p.domain.hi[0];
  const int n = static_cast<int>(std::lround((hi - lo) / p.h));
  if (n < 2 || std::abs(lo + n * p.h - hi) > 1e-10 * p.h)
    throw AdmissibilityError("solve_local: h must evenly divide the interval");
  const double h = p.h;

  std::vector<double> an(n + 1);
  for (int i = 0; i <= n; ++i) an[i] = p.a(Point{lo + i * h, 0.0});
  auto face = [&](int i) { return harmonic_pair(an[i], an[i + 1]); };

  // unknowns u_1..u_{n-1}
  Eigen::SparseMatrix<double> A(n - 1, n - 1);
  Eigen::VectorXd rhs(n - 1);
  std::vector<Eigen::Triplet<double>> trip;
  const double uL = p.dirichlet(Point{lo, 0.0});
  const double uR = p.dirichlet(Point{hi, 0.0});
  for (int i = 1; i < n; ++i) {
    const double cw = face(i - 1) / (h * h), ce = face(i) / (h * h);
    trip.emplace_back(i - 1, i - 1, cw + ce);
    rhs[i - 1] = p.f(Point{lo + i * h, 0.0});
    if (i - 2 >= 0)
      trip.emplace_back(i - 1, i - 2, -cw);
    else
      rhs[i - 1] += cw * uL;
    if (i < n - 1)
      trip.emplace_back(i - 1, i, -ce);
    else
      rhs[i - 1] += ce * uR;
  }
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SolverError("solve_local: factorization failed");
  Eigen::VectorXd u = ldlt.solve(rhs);
  check_residual(A, u, rhs);

  LocalSolution sol;
  sol.domain = p.domain;
  sol.h = h;
  sol.nx = n + 1;
  sol.ny = 1;
  sol.values.resize(n + 1);
  sol.values[0] = uL;
  sol.values[n] = uR;
  for (int i = 1; i < n; ++i) sol.values[i] = u[i - 1];
  return sol;
}

LocalSolution solve_box(const LocalProblem& p) {
  const double lx = p.domain.lo[0], ly = p.domain.lo[1];
  const int nx = static_cast<int>(std::lround((p.domain.hi[0] - lx) / p.h));
  const int ny = static_cast<int>(std::lround((p.domain.hi[1] - ly) / p.h));
  if (nx < 2 || ny < 2) throw AdmissibilityError("solve_local: box grid too coarse");
  const double h = p.h;
  auto node = [&](int i, int j) { return Point{lx + i * h, ly + j * h}; };

  Eigen::VectorXd an((nx + 1) * (ny + 1));
  auto nid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) an[nid(i, j)] = p.a(node(i, j));

  // unknowns are the (nx-1)*(ny-1) interior nodes
  auto uid = [&](int i, int j) { return (j - 1) * (nx - 1) + (i - 1); };
  const int nunk = (nx - 1) * (ny - 1);
  Eigen::SparseMatrix<double> A(nunk, nunk);
  Eigen::VectorXd rhs(nunk);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5u * nunk);
  const double ih2 = 1.0 / (h * h);

  for (int j = 1; j < ny; ++j) {
    for (int i = 1; i < nx; ++i) {
      const int row = uid(i, j);
      double diag = 0.0;
      rhs[row] = p.f(node(i, j));
      const int di[4] = {-1, 1, 0, 0};
      const int dj[4] = {0, 0, -1, 1};
      for (int q = 0; q < 4; ++q) {
        const int ii = i + di[q], jj = j + dj[q];
        const double c = harmonic_pair(an[nid(i, j)], an[nid(ii, jj)]) * ih2;
        diag += c;
        if (ii >= 1 && ii <= nx - 1 && jj >= 1 && jj <= ny - 1)
          trip.emplace_back(row, uid(ii, jj), -c);
        else
          rhs[row] += c * p.dirichlet(node(ii, jj));
      }
      trip.emplace_back(row, row, diag);
    }
  }
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SolverError("solve_local: factorization failed");
  Eigen::VectorXd u = ldlt.solve(rhs);
  check_residual(A, u, rhs);

  LocalSolution sol;
  sol.domain = p.domain;
  sol.h = h;
  sol.nx = nx + 1;
  sol.ny = ny + 1;
  sol.values.resize((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      sol.values[nid(i, j)] = (i == 0 || i == nx || j == 0 || j == ny)
                                  ? p.dirichlet(node(i, j))
                                  : u[uid(i, j)];
  return sol;
}

// Radial problem -(1/r)(r a u_r)_r = f on [0, R], u'(0) = 0, u(R) given.
// Finite-volume form; the r = 0 cell uses the half-cell volume h^2/8.
LocalSolution solve_disk(const LocalProblem& p) {
  const double R = p.domain.radius;
  const int n = static_cast<int>(std::lround(R / p.h));
  if (n < 2 || std::abs(n * p.h - R) > 1e-10 * p.h)
    throw AdmissibilityError("solve_local: h must evenly divide the disk radius");
  const double h = p.h;
  const auto& c = p.domain.center;
  auto at_r = [&](double r) { return Point{c[0] + r, c[1]}; };

  std::vector<double> aface(n);  // a at face radii (i + 1/2) h
  for (int i = 0; i < n; ++i) aface[i] = p.a(at_r((i + 0.5) * h));

  // unknowns u_0..u_{n-1}; u_n from boundary data
  Eigen::SparseMatrix<double> A(n, n);
  Eigen::VectorXd rhs(n);
  std::vector<Eigen::Triplet<double>> trip;
  const double uR = p.dirichlet(at_r(R));
  for (int i = 0; i < n; ++i) {
    const double vol = i == 0 ? h * h / 8.0 : i * h * h;
    rhs[i] = vol * p.f(at_r(i * h));
    double diag = 0.0;
    if (i > 0) {
      const double cw = (i - 0.5) * aface[i - 1];  // r_{i-1/2} a_{i-1/2} / h, r in units of h
      diag += cw;
      trip.emplace_back(i, i - 1, -cw);
    }
    const double ce = (i + 0.5) * aface[i];
    diag += ce;
    if (i + 1 < n)
      trip.emplace_back(i, i + 1, -ce);
    else
      rhs[i] += ce * uR;
    trip.emplace_back(i, i, diag);
  }
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SolverError("solve_local: factorization failed");
  Eigen::VectorXd u = ldlt.solve(rhs);
  check_residual(A, u, rhs);

  LocalSolution sol;
  sol.domain = p.domain;
  sol.h = h;
  sol.nx = n + 1;
  sol.ny = 1;
  sol.values.resize(n + 1);
  for (int i = 0; i < n; ++i) sol.values[i] = u[i];
  sol.values[n] = uR;
  return sol;
}

}  // namespace

double LocalSolution::at(const Point& x) const {
  switch (domain.shape) {
    case DomainSpec::Shape::Interval:
      return values[node_index(x[0], domain.lo[0], h, nx - 1, "LocalSolution")];
    case DomainSpec::Shape::Box: {
      const int i = node_index(x[0], domain.lo[0], h, nx - 1, "LocalSolution");
      const int j = node_index(x[1], domain.lo[1], h, ny - 1, "LocalSolution");
      return values[j * nx + i];
    }
    case DomainSpec::Shape::Disk: {
      const double r = distance(x, domain.center);
      if (r > domain.radius + 1e-12)
        throw AdmissibilityError("LocalSolution: point outside the disk");
      const double t = std::min(r / h, static_cast<double>(nx - 1));
      const int i = std::min(static_cast<int>(t), nx - 2);
      const double w = t - i;
      return (1.0 - w) * values[i] + w * values[i + 1];
    }
  }
  throw AdmissibilityError("LocalSolution: unknown domain");
}

LocalSolution solve_local(const LocalProblem& p) {
  if (!(p.h > 0)) throw AdmissibilityError("solve_local: h must be positive");
  switch (p.domain.shape) {
    case DomainSpec::Shape::Interval:
      return solve_interval(p);
    case DomainSpec::Shape::Box:
      return solve_box(p);
    case DomainSpec::Shape::Disk:
      return solve_disk(p);
  }
  throw AdmissibilityError("solve_local: unknown domain");
}

}  // namespace nlpcm
