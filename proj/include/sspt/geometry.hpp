// SPDX-License-Identifier: Apache-2.0
//
// Unit-sphere discretization, the real even-order spherical-harmonic basis and
// direction sampling primitives shared by the FOD evaluator and the tracker.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sspt/rng.hpp"

namespace sspt {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this / norm(); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Angle in radians between two non-zero vectors, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// 4x4 homogeneous transform, row-major, last row implicitly (0 0 0 1).
class Affine {
public:
  Affine();
  explicit Affine(const std::array<double, 16>& rows);

  static Affine scaling(double sx, double sy, double sz, const Vec3& origin = {});

  Vec3 apply(const Vec3& p) const;
  /// Applies only the 3x3 linear part.
  Vec3 apply_linear(const Vec3& v) const;
  Affine inverse() const;
  double determinant3() const;
  bool invertible() const;
  /// Euclidean norm of each of the three linear columns (voxel sizes in mm).
  std::array<double, 3> column_norms() const;

  double operator()(int r, int c) const { return m_[static_cast<std::size_t>(4 * r + c)]; }
  const std::array<double, 16>& rows() const { return m_; }

private:
  std::array<double, 16> m_;
};

/// Recursively subdivided icosahedron, all vertices on the unit sphere.
///
/// Construction also builds the vertex adjacency and a coarse cube-map table of
/// start vertices so that nearest-vertex queries are a short greedy walk.
class DiscretizedSphere {
public:
  static constexpr int kMaxLevel = 7;

  int level() const { return level_; }
  std::size_t size() const { return vertices_.size(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const Vec3& vertex(std::size_t i) const { return vertices_[i]; }
  const std::vector<std::array<std::uint32_t, 3>>& triangles() const { return triangles_; }
  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {adjacency_.data() + adjacency_offsets_[i], adjacency_.data() + adjacency_offsets_[i + 1]};
  }

  /// Index of the vertex with the largest dot product with `dir`.
  std::uint32_t nearest(const Vec3& dir) const;
  /// Exhaustive argmax, kept as the reference for `nearest`.
  std::uint32_t nearest_exhaustive(const Vec3& dir) const;

  /// Solid angle attributed to each vertex (a third of every incident
  /// spherical triangle); sums to 4*pi.
  std::vector<double> solid_angle_weights() const;

  /// Largest angle between two adjacent vertices, radians.
  double max_edge_angle() const;

private:
  friend DiscretizedSphere subdivide_icosahedron(int level);
  void build_adjacency();
  void build_start_table();
  static std::size_t cube_cell(const Vec3& dir);

  int level_ = 0;
  std::vector<Vec3> vertices_;
  std::vector<std::array<std::uint32_t, 3>> triangles_;
  std::vector<std::uint32_t> adjacency_;
  std::vector<std::size_t> adjacency_offsets_;
  std::vector<std::uint32_t> start_table_;
};

/// Icosahedron subdivided `level` times (0 <= level <= 7); 10*4^level + 2 vertices.
DiscretizedSphere subdivide_icosahedron(int level);

/// Number of real even-order SH coefficients up to order lmax.
constexpr std::size_t sh_count(int lmax) {
  return static_cast<std::size_t>((lmax + 1) * (lmax + 2) / 2);
}
/// Column of coefficient (l, m) in the even-order layout.
constexpr std::size_t sh_index(int l, int m) { return static_cast<std::size_t>(l * (l + 1) / 2 + m); }

/// Evaluates every even-order basis function up to lmax at `dir` into `out`
/// (size sh_count(lmax)). Real "modified" convention: m < 0 columns carry
/// sqrt(2)*Im, m > 0 columns sqrt(2)*Re of the complex harmonic, Condon-Shortley
/// phase included.
void sh_evaluate(int lmax, const Vec3& dir, std::span<double> out);

/// SH basis evaluated at every vertex of a sphere, row-major (vertex, coefficient).
class ShBasis {
public:
  ShBasis(const DiscretizedSphere& sphere, int lmax);

  int lmax() const { return lmax_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t vertex) const {
    return {matrix_.data() + vertex * cols_, cols_};
  }
  double operator()(std::size_t vertex, std::size_t coeff) const { return matrix_[vertex * cols_ + coeff]; }

private:
  int lmax_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> matrix_;
};

/// Throws ParameterError for odd or out-of-range lmax.
ShBasis sh_basis(const DiscretizedSphere& sphere, int lmax);

/// Cone half-angle for a step and radius of curvature: 2*asin(step/radius).
double cone_angle_from_radius(double step_size, double radius);

/// Direction uniform in solid angle over the cap {u : u.axis >= cos(alpha)}.
Vec3 sample_direction_in_cone(const Vec3& axis, double alpha, Rng& rng);

/// Direction uniform over the unit sphere.
Vec3 sample_direction_uniform_sphere(Rng& rng);

inline std::uint32_t nearest_vertex(const DiscretizedSphere& sphere, const Vec3& dir) {
  return sphere.nearest(dir);
}

} // namespace sspt
