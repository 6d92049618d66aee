#include "nlpcm/cases.hpp"

#include <algorithm>
#include <cmath>

#include "nlpcm/errors.hpp"

namespace nlpcm {

std::string variant_name(DistVariant v) {
  switch (v) {
    case DistVariant::Uniform:
      return "uniform";
    case DistVariant::Gaussian:
      return "gaussian";
    case DistVariant::Lognormal:
      return "lognormal";
    case DistVariant::Weibull:
      return "weibull";
    case DistVariant::GaussianStd:
      return "gaussian-std";
  }
  return "?";
}

DistVariant variant_from_name(const std::string& name) {
  for (DistVariant v : {DistVariant::Uniform, DistVariant::Gaussian, DistVariant::Lognormal,
                        DistVariant::Weibull, DistVariant::GaussianStd})
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown distribution '" + name + "'");
}

Distribution variant_distribution(DistVariant v, double weibull_rescale) {
  switch (v) {
    case DistVariant::Uniform:
      return Distribution::uniform(-0.1, 0.1);
    case DistVariant::Gaussian:
      return Distribution::gaussian(0.0, 0.1);
    case DistVariant::Lognormal:
      return Distribution::lognormal(0.0, 0.1);
    case DistVariant::Weibull:
      return Distribution::weibull(5.0, 1.0, weibull_rescale);
    case DistVariant::GaussianStd:
      return Distribution::gaussian(0.0, 1.0);
  }
  throw ConfigError("unknown distribution variant");
}

bool CaseDef::allows(DistVariant v) const {
  return std::find(variants.begin(), variants.end(), v) != variants.end();
}

namespace {

CaseDef make_consistency_1d() {
  CaseDef c;
  c.id = "consistency-1d-5p";
  c.summary = "1d interval, 5 random variables, fixed horizon 0.38; "
              "manufactured nonlocal solution cos(x/2)/(5+trig(theta))";
  c.dim = 1;
  c.nparam = 5;
  c.domain = DomainSpec::interval(-1.0, 1.0);
  c.fixed_delta = 0.38;
  c.default_variant = DistVariant::Uniform;
  c.variants = {DistVariant::Uniform, DistVariant::Gaussian, DistVariant::Lognormal};
  c.reference = CaseDef::Reference::ClosedNonlocal;

  auto S = [](const Eigen::VectorXd& t) {
    return 5.0 + std::cos(t[0]) + std::sin(2.0 * t[1]) + std::cos(3.0 * t[2]) +
           std::sin(4.0 * t[3]) + std::cos(5.0 * t[4]);
  };
  c.exact = [S](const Point& x, const Eigen::VectorXd& t) {
    return std::cos(0.5 * x[0]) / S(t);
  };
  c.boundary = c.exact;
  c.coeff = [S](const Point& x, const Point& y, const Eigen::VectorXd& t) {
    return (2.0 + std::cos(0.5 * (x[0] + y[0]))) * S(t);
  };
  const double d = c.fixed_delta;
  c.source = [d](const Point& p, const Eigen::VectorXd&) {
    const double x = p[0];
    const double plus = -2.0 * std::sin(0.5 * (3.0 * x + d)) +
                        std::sin(0.5 * (3.0 * x + 2.0 * d)) - 3.0 * d * std::cos(0.5 * x) +
                        6.0 * std::sin(0.5 * (x + d));
    const double minus = -2.0 * std::sin(0.5 * (3.0 * x - d)) +
                         std::sin(0.5 * (3.0 * x - 2.0 * d)) + 3.0 * d * std::cos(0.5 * x) +
                         6.0 * std::sin(0.5 * (x - d));
    return -3.0 / (d * d * d) * 0.5 * (plus - minus);
  };
  c.source_theta_independent = true;
  return c;
}

CaseDef make_consistency_2d() {
  CaseDef c;
  c.id = "consistency-2d-1p";
  c.summary = "2d unit square, 1 random variable, fixed horizon 0.525; "
              "manufactured nonlocal solution cos(0.3 x1) sin(0.3 x2)/(2+theta)";
  c.dim = 2;
  c.nparam = 1;
  c.domain = DomainSpec::box(0.0, 1.0, 0.0, 1.0);
  c.fixed_delta = 0.525;
  c.default_variant = DistVariant::Uniform;
  c.variants = {DistVariant::Uniform, DistVariant::Gaussian, DistVariant::Lognormal,
                DistVariant::Weibull};
  c.weibull_rescale = 0.5;
  c.reference = CaseDef::Reference::ClosedNonlocal;

  c.exact = [](const Point& x, const Eigen::VectorXd& t) {
    return std::cos(0.3 * x[0]) * std::sin(0.3 * x[1]) / (2.0 + t[0]);
  };
  c.boundary = c.exact;
  const double d4 = std::pow(c.fixed_delta, 4);
  c.coeff = [d4](const Point& x, const Point& y, const Eigen::VectorXd& t) {
    return (2.0 + t[0]) *
           (2.0 + std::cos(0.3 * (x[0] + y[0])) * std::cos(0.3 * (x[1] + y[1]))) / d4;
  };
  // the loading is reconstructed from the solution by the reference operator;
  // the (2+theta) factors cancel, so one evaluation per grid serves all samples
  c.source = nullptr;
  c.source_theta_independent = true;
  return c;
}

CaseDef make_ac_1d() {
  CaseDef c;
  c.id = "ac-1d-5p";
  c.summary = "1d interval, 5 random variables, delta = 3.8 h; local limit "
              "log(12+(1+E)sin x)/(1+E) with loading sin x";
  c.dim = 1;
  c.nparam = 5;
  c.domain = DomainSpec::interval(-1.0, 1.0);
  c.default_ratio = 3.8;
  c.default_variant = DistVariant::Uniform;
  c.variants = {DistVariant::Uniform, DistVariant::Gaussian, DistVariant::Lognormal};
  c.reference = CaseDef::Reference::ClosedLocal;

  auto C = [](const Eigen::VectorXd& t) {
    return 1.0 + std::exp(std::sin(t[0])) + std::cos(t[1]) + std::exp(std::sin(t[2])) +
           std::cos(t[3]) + std::exp(std::sin(2.0 * t[4]));
  };
  c.local_a = [C](const Point& x, const Eigen::VectorXd& t) {
    return 12.0 + C(t) * std::sin(x[0]);
  };
  c.exact = [C](const Point& x, const Eigen::VectorXd& t) {
    const double cc = C(t);
    return std::log(12.0 + cc * std::sin(x[0])) / cc;
  };
  c.boundary = c.exact;
  c.source = [](const Point& x, const Eigen::VectorXd&) { return std::sin(x[0]); };
  return c;
}

CaseDef make_ac_disk() {
  CaseDef c;
  c.id = "ac-2d-disk-1p";
  c.summary = "2d unit disk, 1 random variable, delta = 3.8 h; radial local "
              "limit (2 r^2 - cos(theta) cos(r^2))/4";
  c.dim = 2;
  c.nparam = 1;
  c.domain = DomainSpec::disk(0.0, 0.0, 1.0);
  c.default_ratio = 3.8;
  c.default_variant = DistVariant::Uniform;
  c.variants = {DistVariant::Uniform, DistVariant::Gaussian, DistVariant::Lognormal,
                DistVariant::Weibull};
  c.weibull_rescale = 1.0;
  c.reference = CaseDef::Reference::ClosedLocal;

  c.local_a = [](const Point& x, const Eigen::VectorXd& t) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    return 1.0 / (2.0 + std::cos(t[0]) * std::sin(r2));
  };
  c.exact = [](const Point& x, const Eigen::VectorXd& t) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    return 0.25 * (2.0 * r2 - std::cos(t[0]) * std::cos(r2));
  };
  c.boundary = c.exact;
  // -div(a grad u0) = -1 for this (a, u0) pair
  c.source = [](const Point&, const Eigen::VectorXd&) { return -1.0; };
  return c;
}

CaseDef make_ac_box() {
  CaseDef c;
  c.id = "ac-2d-box-2p";
  c.summary = "2d square [-1,1]^2, 2 random variables, delta = 2.8 h; "
              "oscillatory coefficient, numerically generated local limit";
  c.dim = 2;
  c.nparam = 2;
  c.domain = DomainSpec::box(-1.0, 1.0, -1.0, 1.0);
  c.default_ratio = 2.8;
  c.default_variant = DistVariant::Uniform;
  c.variants = {DistVariant::Uniform};
  c.reference = CaseDef::Reference::LocalSolve;
  c.collar_from_local = true;

  c.local_a = [](const Point& x, const Eigen::VectorXd& t) {
    double a = 3.0;
    for (int k = 1; k <= 2; ++k)
      a += (std::cos(30.0 * t[k - 1]) - 1.0) / (k * k) * std::cos(2.0 * k * x[0]) *
           std::sin(2.0 * k * x[1]);
    return a;
  };
  c.source = [](const Point&, const Eigen::VectorXd&) { return 1.0; };
  c.boundary = [](const Point&, const Eigen::VectorXd&) { return 0.0; };
  return c;
}

CaseDef make_kl_box() {
  CaseDef c;
  c.id = "kl-2d";
  c.summary = "2d square [-1,1]^2, correlated diffusivity via a truncated "
              "Karhunen-Loeve field (4 standard Gaussian variables), delta = 2.8 h";
  c.dim = 2;
  c.nparam = 4;
  c.domain = DomainSpec::box(-1.0, 1.0, -1.0, 1.0);
  c.default_ratio = 2.8;
  c.default_variant = DistVariant::GaussianStd;
  c.variants = {DistVariant::GaussianStd};
  c.reference = CaseDef::Reference::LocalSolve;
  c.collar_from_local = true;
  c.uses_kl = true;

  c.local_a = [](const Point& x, const Eigen::VectorXd& t) {
    return shared_kl_field().eval(x, t);
  };
  c.source = [](const Point&, const Eigen::VectorXd&) { return 1.0; };
  c.boundary = [](const Point&, const Eigen::VectorXd&) { return 0.0; };
  return c;
}

}  // namespace

const std::vector<CaseDef>& case_registry() {
  static const std::vector<CaseDef> cases = {
      make_consistency_1d(), make_consistency_2d(), make_ac_1d(),
      make_ac_disk(),        make_ac_box(),         make_kl_box()};
  return cases;
}

const CaseDef& find_case(const std::string& id) {
  for (const auto& c : case_registry())
    if (c.id == id) return c;
  throw ConfigError("unknown case '" + id + "'; see `nlpcm list-cases`");
}

const KLField& shared_kl_field() {
  static const KLField field =
      KLField::build(4.0, CovarianceSpec{1.0, 1.0, 1.0}, -1.0, 1.0, 400, 0.9);
  return field;
}

}  // namespace nlpcm
