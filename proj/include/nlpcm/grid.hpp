#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nlpcm {

/// Coordinates of a particle; the second component is zero in one dimension.
using Point = std::array<double, 2>;

double distance(const Point& a, const Point& b);

/// Interval, axis-aligned box, or disk. Membership in Omega is closed;
/// the collar Omega_delta = { x outside Omega : dist(x, boundary) < delta }
/// is open at distance delta, matching the open interaction ball.
struct DomainSpec {
  enum class Shape { Interval, Box, Disk };

  Shape shape = Shape::Interval;
  int dim = 1;
  std::array<double, 2> lo{{0, 0}};      // interval/box corners
  std::array<double, 2> hi{{0, 0}};
  std::array<double, 2> center{{0, 0}};  // disk
  double radius = 0;

  static DomainSpec interval(double a, double b);
  static DomainSpec box(double a1, double b1, double a2, double b2);
  static DomainSpec disk(double cx, double cy, double r);

  bool contains(const Point& x) const;
  /// Distance from an exterior point to the domain (0 inside).
  double exterior_distance(const Point& x) const;
};

enum class PointTag : std::uint8_t { Interior, Collar };

/// Uniform Cartesian particle set over Omega union Omega_delta with
/// interior/collar tags and per-interior-point ball neighbor lists.
/// Points are ordered lexicographically by integer lattice index, so a given
/// (domain, h, delta) always produces the same grid.
struct ParticleGrid {
  int dim = 1;
  double h = 0;
  double delta = 0;
  DomainSpec domain;

  std::vector<Point> points;
  std::vector<std::array<int, 2>> lattice;  // integer lattice coordinates
  std::vector<PointTag> tags;
  std::vector<int> interior;                // point indices of interior points
  std::vector<int> interior_rank;           // point index -> rank in `interior`, -1 for collar
  std::vector<std::vector<int>> neighbor_lists;  // aligned with `interior`

  std::size_t size() const { return points.size(); }
  std::size_t interior_count() const { return interior.size(); }
  bool is_interior(int i) const { return tags[i] == PointTag::Interior; }

  /// Strict-ball neighbors {j : 0 < |x_j - x_i| < delta} of an interior point.
  /// Asking for a collar point is an error: operator rows exist only for
  /// interior points.
  const std::vector<int>& neighbors(int point_index) const;
};

/// Lattice {k h : k in Z^d} intersected with Omega union Omega_delta.
/// Throws if the interior ends up empty (h too large for the domain).
ParticleGrid build_grid(const DomainSpec& dom, double h, double delta);

/// Debug dump: index, coordinates, tag. One row per point.
void dump_grid_csv(const ParticleGrid& g, const std::string& path);

}  // namespace nlpcm
