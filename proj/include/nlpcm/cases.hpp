#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "nlpcm/grid.hpp"
#include "nlpcm/random_field.hpp"
#include "nlpcm/sparse_grid.hpp"

namespace nlpcm {

/// Input-distribution variant of a case. The collocation grid always lives in
/// the base-variable space of the variant's canonical rule family; lognormal
/// and rescaled Weibull are deterministic transforms applied to the base
/// nodes before they reach the model closures.
enum class DistVariant { Uniform, Gaussian, Lognormal, Weibull, GaussianStd };

std::string variant_name(DistVariant v);
DistVariant variant_from_name(const std::string& name);
Distribution variant_distribution(DistVariant v, double weibull_rescale);

/// One registered benchmark problem: domain, closed forms, reference kind.
/// `theta` in the closures holds the transformed model variables.
struct CaseDef {
  enum class Reference { ClosedNonlocal, ClosedLocal, LocalSolve };

  std::string id;
  std::string summary;
  int dim = 1;
  int nparam = 1;
  DomainSpec domain;
  double fixed_delta = 0.0;    // > 0: the horizon is part of the manufactured data
  double default_ratio = 0.0;  // delta/h for joint-refinement cases
  DistVariant default_variant = DistVariant::Uniform;
  std::vector<DistVariant> variants;
  double weibull_rescale = 1.0;

  std::function<double(const Point&, const Point&, const Eigen::VectorXd&)> coeff;
  std::function<double(const Point&, const Eigen::VectorXd&)> local_a;  // harmonic lift
  std::function<double(const Point&, const Eigen::VectorXd&)> source;   // null: generated
  bool source_theta_independent = false;
  std::function<double(const Point&, const Eigen::VectorXd&)> boundary;

  Reference reference = Reference::ClosedNonlocal;
  std::function<double(const Point&, const Eigen::VectorXd&)> exact;  // closed references
  bool uses_kl = false;
  /// Cases without a closed-form solution prescribe collar data as the odd
  /// reflection of a per-sample local solve; a plain zero collar would leave
  /// an O(delta) boundary mismatch against the local limit.
  bool collar_from_local = false;

  bool allows(DistVariant v) const;
};

const std::vector<CaseDef>& case_registry();
const CaseDef& find_case(const std::string& id);

/// Shared diffusivity field of the correlated-coefficient case: constant mean
/// 4, unit variance, unit correlation lengths on [-1,1]^2, two modes per axis.
const KLField& shared_kl_field();

}  // namespace nlpcm
