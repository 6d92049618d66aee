#include "nlpcm/random_field.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>

#include "nlpcm/errors.hpp"

namespace nlpcm {

double Cov1D::operator()(double x, double y) const {
  const double d = x - y;
  return amplitude * std::exp(-d * d / corr_length);
}

double EigPairs1D::trace() const {
  double t = 0.0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i) t += qweights[i] * cov(nodes[i], nodes[i]);
  return t;
}

double EigPairs1D::eval_phi(int i, double x) const {
  if (i < 0 || i >= stored())
    throw AdmissibilityError("EigPairs1D::eval_phi: eigenfunction index out of range");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < nodes.size(); ++j)
    acc += qweights[j] * cov(x, nodes[j]) * phi(j, i);
  return acc / lambda[i];
}

EigPairs1D eig_decompose_1d(const Cov1D& cov, int panels, int keep) {
  if (panels < 200)
    throw AdmissibilityError("eig_decompose_1d: need at least 200 panels");
  const int m = panels + 1;
  EigPairs1D out;
  out.cov = cov;
  out.nodes.resize(m);
  out.qweights.resize(m);
  const double h = (cov.hi - cov.lo) / panels;
  for (int i = 0; i < m; ++i) {
    out.nodes[i] = cov.lo + i * h;
    out.qweights[i] = (i == 0 || i == panels) ? h / 2.0 : h;
  }

  if (cov.amplitude == 0.0) {
    out.lambda.assign(m, 0.0);
    out.phi.resize(m, 0);
    return out;
  }

  // symmetrized kernel B = W^{1/2} K W^{1/2}; eigenvectors map back by W^{-1/2}
  Eigen::MatrixXd B(m, m);
  Eigen::VectorXd sqw = out.qweights.cwiseSqrt();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = sqw[i] * sqw[j] * cov(out.nodes[i], out.nodes[j]);
      B(i, j) = v;
      B(j, i) = v;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
  if (es.info() != Eigen::Success)
    throw SolverError("eig_decompose_1d: symmetric eigensolve failed");

  const double lmax = es.eigenvalues()(m - 1);
  if (es.eigenvalues()(0) < -1e-10 * lmax)
    throw InvariantError("eig_decompose_1d: covariance Gram matrix is not PSD");

  out.lambda.resize(m);
  for (int i = 0; i < m; ++i) out.lambda[i] = es.eigenvalues()(m - 1 - i);

  const int n = std::min(keep, m);
  out.phi.resize(m, n);
  for (int c = 0; c < n; ++c) {
    Eigen::VectorXd v = es.eigenvectors().col(m - 1 - c).cwiseQuotient(sqw);
    double integral = out.qweights.dot(v);
    double sign = 1.0;
    if (std::abs(integral) > 1e-8)
      sign = integral > 0 ? 1.0 : -1.0;
    else
      sign = v[0] >= 0 ? 1.0 : -1.0;
    out.phi.col(c) = sign * v;
  }
  return out;
}

int truncate_energy(const std::vector<double>& lambda, double fraction, double total) {
  if (lambda.empty()) return 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    acc += lambda[i];
    if (acc >= fraction * total) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(lambda.size());
}

Eigen::VectorXd KLField::basis_at(const Point& x) const {
  Eigen::VectorXd b(dim_xi());
  for (int i = 0; i < n1; ++i) {
    const double p1 = std::sqrt(axis1.lambda[i]) * axis1.eval_phi(i, x[0]);
    for (int j = 0; j < n2; ++j)
      b[i * n2 + j] = p1 * std::sqrt(axis2.lambda[j]) * axis2.eval_phi(j, x[1]);
  }
  return b;
}

double KLField::eval(const Point& x, const Eigen::VectorXd& xi) const {
  if (xi.size() != dim_xi())
    throw AdmissibilityError("KLField::eval: xi has size " + std::to_string(xi.size()) +
                             ", expected " + std::to_string(dim_xi()));
  const double v = mean_value + basis_at(x).dot(xi);
  if (!(v > guard))
    throw AdmissibilityError("KLField::eval: field value " + std::to_string(v) +
                             " at or below the ellipticity guard " + std::to_string(guard));
  return v;
}

KLField KLField::build(double mean, const CovarianceSpec& cov, double lo, double hi,
                       int panels, double energy_fraction) {
  const double amp = std::sqrt(cov.variance);
  KLField f;
  f.mean_value = mean;
  f.axis1 = eig_decompose_1d(Cov1D{amp, cov.eta1, lo, hi}, panels);
  f.axis2 = eig_decompose_1d(Cov1D{amp, cov.eta2, lo, hi}, panels);
  f.n1 = truncate_energy(f.axis1.lambda, energy_fraction, f.axis1.trace());
  f.n2 = truncate_energy(f.axis2.lambda, energy_fraction, f.axis2.trace());
  if (f.n1 > f.axis1.stored() || f.n2 > f.axis2.stored())
    throw SolverError("KLField::build: truncation exceeds stored eigenfunctions");
  return f;
}

void dump_eigenpairs_csv(const EigPairs1D& e, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("dump_eigenpairs_csv: cannot open " + path);
  std::fprintf(f, "i,lambda");
  for (Eigen::Index j = 0; j < e.nodes.size(); ++j)
    std::fprintf(f, ",phi(%.6g)", e.nodes[j]);
  std::fprintf(f, "\n");
  for (int i = 0; i < e.stored(); ++i) {
    std::fprintf(f, "%d,%.17g", i, e.lambda[i]);
    for (Eigen::Index j = 0; j < e.nodes.size(); ++j)
      std::fprintf(f, ",%.17g", e.phi(j, i));
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

}  // namespace nlpcm
