#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nlpcm/cases.hpp"
#include "nlpcm/grid.hpp"
#include "nlpcm/kernel.hpp"
#include "nlpcm/local_solver.hpp"
#include "nlpcm/nonlocal.hpp"
#include "nlpcm/quadrature.hpp"
#include "nlpcm/sparse_grid.hpp"

namespace nlpcm {

/// One experiment: a registered case, grid sizes, horizon rule, sparse-grid
/// levels, distribution variant, optional Monte Carlo baseline.
struct ExperimentConfig {
  std::string case_id;
  std::vector<double> h;
  double delta = 0.0;        // fixed-horizon mode (consistency studies)
  double delta_ratio = 0.0;  // joint-refinement mode, delta = ratio * h
  std::vector<int> eta;
  std::string distribution;  // empty: the case default
  long mc_samples = 0;
  std::string output;
  std::uint64_t seed = 0;
  bool report_wall_time = false;  // keeps reports byte-identical by default
  int reference_eta = -1;         // override of the reference plan level
  double h_local = 0.0;           // override of the local reference mesh width
  double min_ratio = 2.8;         // unisolvency guard on delta / h
  std::string cache_dir;          // reconstructed-source cache, empty = in-memory
  std::string dump_grid, dump_weights, dump_plan, dump_solutions, dump_eigs;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  void validate() const;
};

struct ReportRow {
  std::string case_id;
  double h = 0, delta = 0;
  int eta = 0;  // -1 marks Monte Carlo baseline rows
  long K = 0;
  double err_mean = 0, err_std = 0;
  double wall_ms = 0;
};

struct SlopeFit {
  double slope = 0, intercept = 0, band = 0;  // 95% band half-width on the slope
  int n = 0;
};

struct ConvergenceReport {
  std::vector<ReportRow> rows;
  std::string scale;  // "h", "delta", or "K"
  std::optional<SlopeFit> mean_fit, std_fit;

  std::string csv() const;
  void write(const std::string& path) const;
};

/// Least squares on log(scale) vs log(error). Nonpositive entries are an
/// error; the band is 1.96 standard errors of the slope.
SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points);

/// sqrt(h^d sum over interior nodes (u_i - ref_i)^2). Fields may be given on
/// all points or on the interior only.
double discrete_l2_error(const ParticleGrid& g, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& ref);
double discrete_l2_error(const ParticleGrid& g, const Eigen::VectorXd& u,
                         const std::function<double(const Point&)>& ref);

/// Two-point Gauss rule per interior cell (clipped to the domain for
/// interval and box shapes), for L2(Omega) integrals of the
/// piecewise-constant interpolant of a grid field against a smooth function.
struct CellQuadrature {
  std::vector<Point> points;    // 2^d Gauss points per interior cell
  std::vector<double> measures; // integration weight per point
  std::vector<int> owner;       // interior rank of the owning cell

  static CellQuadrature build(const ParticleGrid& g);
};

/// || PC(field) - ref ||_{L2(Omega)} with the reference sampled at the cell
/// Gauss points. This is the norm in which the numerical solution, read as a
/// piecewise-constant field, is compared with a smooth manufactured solution;
/// the interpolant contributes an O(h) term on top of the nodal error.
double pc_l2_error(const CellQuadrature& q, const Eigen::VectorXd& interior_field,
                   const Eigen::VectorXd& ref_at_points);

/// Per-sample local solves of one case on a fixed mesh; Karhunen-Loeve
/// coefficients are bound to a basis table precomputed on that lattice.
class LocalSampler {
 public:
  LocalSampler(const CaseDef& def, double h);
  LocalSolution solve(const Eigen::VectorXd& theta) const;
  double h() const { return h_; }

 private:
  const CaseDef* def_;
  double h_ = 0;
  int nx_ = 0, ny_ = 0;
  Eigen::MatrixXd kl_basis_;
};

/// Odd reflection of a local solution through the zero-valued boundary of a
/// box domain, evaluated at a collar point.
double odd_reflection_value(const LocalSolution& sol, const DomainSpec& dom,
                            const Point& y);

/// Mean and std of the local limit accumulated on one fine reference mesh,
/// restrictable to any coarser lattice-aligned particle grid.
struct LocalReferenceMoments {
  DomainSpec domain;
  double h_loc = 0;
  int nx = 0, ny = 0;
  Eigen::VectorXd mean, stddev;  // fine-grid nodes, row-major

  MomentFields restrict_to(const ParticleGrid& g) const;  // interior nodes
};

/// A case bound to one (h, delta) grid: weight table, per-sample nonlocal
/// solves, collocation and Monte Carlo moments. Sample solves run in
/// parallel with thread-private factorizations.
class CaseRunner {
 public:
  CaseRunner(const CaseDef& def, DistVariant variant, double h, double delta,
             const std::string& source_cache_dir = "");

  const CaseDef& def() const { return *def_; }
  const ParticleGrid& grid() const { return grid_; }
  const KernelSpec& kernel() const { return kernel_; }
  const QuadratureTable& table() const { return table_; }
  DistVariant variant() const { return variant_; }
  Distribution distribution() const;
  RuleFamily family() const;

  /// Base-node plan of the given level in the variant's canonical family.
  SparseGridPlan base_plan(int eta) const;
  /// Transformed model variables for every plan node (K x nparam).
  Eigen::MatrixXd map_nodes(const SparseGridPlan& base) const;

  /// One nonlocal solve; values over all grid points.
  Eigen::VectorXd solve(const Eigen::VectorXd& theta) const;
  /// All samples, parallel; interior-only fields in plan order.
  std::vector<Eigen::VectorXd> solve_batch(const Eigen::MatrixXd& thetas) const;

  MomentFields pcm_moments(int eta, long* K_out = nullptr) const;
  /// Seeded Monte Carlo baseline with the unbiased std estimator.
  MomentFields mc_moments(long samples, std::uint64_t seed) const;

  /// Reference moments on this grid's interior: closed forms integrated by a
  /// level `eta_ref` plan, or a precomputed local reference restricted here.
  MomentFields reference_moments(int eta_ref,
                                 const LocalReferenceMoments* local = nullptr) const;

  /// Closed-form reference moments at arbitrary evaluation points.
  MomentFields closed_moments_at(const std::vector<Point>& pts, int eta_ref) const;

  /// Interior values of the reconstructed source (cases without a printed f).
  const Eigen::VectorXd& generated_source() const;

 private:
  Eigen::VectorXd solve_with(NonlocalSolver& solver, const Eigen::VectorXd& theta) const;

  const CaseDef* def_;
  DistVariant variant_;
  ParticleGrid grid_;
  KernelSpec kernel_;
  QuadratureTable table_;
  Eigen::MatrixXd kl_basis_;  // grid-point KL basis products, kl cases only
  std::optional<LocalSampler> collar_sampler_;  // collar_from_local cases
  mutable Eigen::VectorXd generated_source_;
  mutable bool source_ready_ = false;
  std::string cache_dir_;
};

/// Local-limit reference for cases without closed forms: collocation over a
/// level `eta_ref` plan of local solves at mesh width h_loc.
LocalReferenceMoments local_reference_moments(const CaseDef& def, DistVariant variant,
                                              int eta_ref, double h_loc);

/// Full experiment: offline stage per (h, delta), per-sample online stage,
/// moment postprocessing, error rows, slope fit.
ConvergenceReport run_case(const ExperimentConfig& cfg);

}  // namespace nlpcm
