#include "nlpcm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "nlpcm/errors.hpp"

namespace nlpcm {

namespace {

// Relative guard applied to strict ball/collar comparisons so that lattice
// points mathematically at distance exactly delta land on the excluded side
// regardless of rounding in k*h products.
constexpr double kTieGuard = 1.0 - 1e-12;

std::int64_t lattice_key(int k1, int k2) {
  return (static_cast<std::int64_t>(k1) << 32) ^ (static_cast<std::uint32_t>(k2));
}

}  // namespace

double distance(const Point& a, const Point& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

DomainSpec DomainSpec::interval(double a, double b) {
  if (!(a < b)) throw AdmissibilityError("DomainSpec::interval: need a < b");
  DomainSpec d;
  d.shape = Shape::Interval;
  d.dim = 1;
  d.lo = {a, 0};
  d.hi = {b, 0};
  return d;
}

DomainSpec DomainSpec::box(double a1, double b1, double a2, double b2) {
  if (!(a1 < b1) || !(a2 < b2)) throw AdmissibilityError("DomainSpec::box: empty box");
  DomainSpec d;
  d.shape = Shape::Box;
  d.dim = 2;
  d.lo = {a1, a2};
  d.hi = {b1, b2};
  return d;
}

DomainSpec DomainSpec::disk(double cx, double cy, double r) {
  if (!(r > 0)) throw AdmissibilityError("DomainSpec::disk: radius must be positive");
  DomainSpec d;
  d.shape = Shape::Disk;
  d.dim = 2;
  d.center = {cx, cy};
  d.radius = r;
  return d;
}

bool DomainSpec::contains(const Point& x) const {
  switch (shape) {
    case Shape::Interval:
      return x[0] >= lo[0] && x[0] <= hi[0];
    case Shape::Box:
      return x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1];
    case Shape::Disk:
      return distance(x, center) <= radius;
  }
  return false;
}

double DomainSpec::exterior_distance(const Point& x) const {
  switch (shape) {
    case Shape::Interval: {
      if (x[0] < lo[0]) return lo[0] - x[0];
      if (x[0] > hi[0]) return x[0] - hi[0];
      return 0.0;
    }
    case Shape::Box: {
      const double dx = std::max({lo[0] - x[0], 0.0, x[0] - hi[0]});
      const double dy = std::max({lo[1] - x[1], 0.0, x[1] - hi[1]});
      return std::sqrt(dx * dx + dy * dy);
    }
    case Shape::Disk:
      return std::max(distance(x, center) - radius, 0.0);
  }
  return 0.0;
}

const std::vector<int>& ParticleGrid::neighbors(int point_index) const {
  const int rank = interior_rank[point_index];
  if (rank < 0)
    throw AdmissibilityError("ParticleGrid::neighbors: point " +
                             std::to_string(point_index) +
                             " is a collar point; operator rows exist only for "
                             "interior points");
  return neighbor_lists[rank];
}

ParticleGrid build_grid(const DomainSpec& dom, double h, double delta) {
  if (!(h > 0)) throw AdmissibilityError("build_grid: h must be positive");
  if (!(delta > 0)) throw AdmissibilityError("build_grid: delta must be positive");

  ParticleGrid g;
  g.dim = dom.dim;
  g.h = h;
  g.delta = delta;
  g.domain = dom;

  // Bounding box of Omega union Omega_delta, inflated one cell for safety.
  double bx0, bx1, by0 = 0, by1 = 0;
  if (dom.shape == DomainSpec::Shape::Disk) {
    bx0 = dom.center[0] - dom.radius - delta;
    bx1 = dom.center[0] + dom.radius + delta;
    by0 = dom.center[1] - dom.radius - delta;
    by1 = dom.center[1] + dom.radius + delta;
  } else {
    bx0 = dom.lo[0] - delta;
    bx1 = dom.hi[0] + delta;
    if (dom.dim == 2) {
      by0 = dom.lo[1] - delta;
      by1 = dom.hi[1] + delta;
    }
  }
  const int k1lo = static_cast<int>(std::floor(bx0 / h)) - 1;
  const int k1hi = static_cast<int>(std::ceil(bx1 / h)) + 1;
  const int k2lo = dom.dim == 2 ? static_cast<int>(std::floor(by0 / h)) - 1 : 0;
  const int k2hi = dom.dim == 2 ? static_cast<int>(std::ceil(by1 / h)) + 1 : 0;

  std::unordered_map<std::int64_t, int> index_of;
  const double collar_cut = delta * kTieGuard;
  for (int k1 = k1lo; k1 <= k1hi; ++k1) {
    for (int k2 = k2lo; k2 <= k2hi; ++k2) {
      const Point x{k1 * h, dom.dim == 2 ? k2 * h : 0.0};
      PointTag tag;
      if (dom.contains(x)) {
        tag = PointTag::Interior;  // boundary ties are tagged interior
      } else if (dom.exterior_distance(x) < collar_cut) {
        tag = PointTag::Collar;
      } else {
        continue;
      }
      const int idx = static_cast<int>(g.points.size());
      g.points.push_back(x);
      g.lattice.push_back({k1, k2});
      g.tags.push_back(tag);
      index_of.emplace(lattice_key(k1, k2), idx);
      if (tag == PointTag::Interior) g.interior.push_back(idx);
    }
  }
  if (g.interior.empty())
    throw AdmissibilityError("build_grid: no interior lattice points (h too large)");

  g.interior_rank.assign(g.points.size(), -1);
  for (std::size_t r = 0; r < g.interior.size(); ++r)
    g.interior_rank[g.interior[r]] = static_cast<int>(r);

  // Ball neighbors by integer offsets: |dk|^2 < (delta/h)^2 with the tie guard,
  // so that offsets at exactly delta are excluded on every platform.
  const double ratio2 = (delta / h) * (delta / h) * kTieGuard;
  const int span = static_cast<int>(std::ceil(delta / h)) + 1;
  g.neighbor_lists.resize(g.interior.size());
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const auto& k = g.lattice[g.interior[r]];
    auto& nbrs = g.neighbor_lists[r];
    for (int d1 = -span; d1 <= span; ++d1) {
      const int d2hi = dom.dim == 2 ? span : 0;
      for (int d2 = dom.dim == 2 ? -span : 0; d2 <= d2hi; ++d2) {
        if (d1 == 0 && d2 == 0) continue;
        if (d1 * d1 + d2 * d2 >= ratio2) continue;
        const auto it = index_of.find(lattice_key(k[0] + d1, k[1] + d2));
        if (it != index_of.end()) nbrs.push_back(it->second);
      }
    }
    std::sort(nbrs.begin(), nbrs.end());
  }
  return g;
}

void dump_grid_csv(const ParticleGrid& g, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("dump_grid_csv: cannot open " + path);
  std::fprintf(f, "index,x,y,tag\n");
  for (std::size_t i = 0; i < g.points.size(); ++i)
    std::fprintf(f, "%zu,%.17g,%.17g,%s\n", i, g.points[i][0], g.points[i][1],
                 g.tags[i] == PointTag::Interior ? "interior" : "collar");
  std::fclose(f);
}

}  // namespace nlpcm
