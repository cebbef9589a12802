// SPDX-License-Identifier: Apache-2.0
#include "sspt/geometry.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>

#include "sspt/error.hpp"

namespace sspt {

// ---------------------------------------------------------------------------
// Affine

Affine::Affine() : m_{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1} {}

Affine::Affine(const std::array<double, 16>& rows) : m_(rows) {
  m_[12] = 0.0;
  m_[13] = 0.0;
  m_[14] = 0.0;
  m_[15] = 1.0;
}

Affine Affine::scaling(double sx, double sy, double sz, const Vec3& origin) {
  return Affine({sx, 0, 0, origin.x, 0, sy, 0, origin.y, 0, 0, sz, origin.z, 0, 0, 0, 1});
}

Vec3 Affine::apply(const Vec3& p) const {
  return {m_[0] * p.x + m_[1] * p.y + m_[2] * p.z + m_[3],
          m_[4] * p.x + m_[5] * p.y + m_[6] * p.z + m_[7],
          m_[8] * p.x + m_[9] * p.y + m_[10] * p.z + m_[11]};
}

Vec3 Affine::apply_linear(const Vec3& v) const {
  return {m_[0] * v.x + m_[1] * v.y + m_[2] * v.z, m_[4] * v.x + m_[5] * v.y + m_[6] * v.z,
          m_[8] * v.x + m_[9] * v.y + m_[10] * v.z};
}

double Affine::determinant3() const {
  return m_[0] * (m_[5] * m_[10] - m_[6] * m_[9]) - m_[1] * (m_[4] * m_[10] - m_[6] * m_[8]) +
         m_[2] * (m_[4] * m_[9] - m_[5] * m_[8]);
}

bool Affine::invertible() const {
  const double det = determinant3();
  return std::isfinite(det) && std::abs(det) > 1e-12;
}

Affine Affine::inverse() const {
  const double det = determinant3();
  if (!std::isfinite(det) || std::abs(det) <= 1e-12)
    throw ParameterError("affine is not invertible");
  const double inv = 1.0 / det;
  std::array<double, 16> r{};
  r[0] = (m_[5] * m_[10] - m_[6] * m_[9]) * inv;
  r[1] = (m_[2] * m_[9] - m_[1] * m_[10]) * inv;
  r[2] = (m_[1] * m_[6] - m_[2] * m_[5]) * inv;
  r[4] = (m_[6] * m_[8] - m_[4] * m_[10]) * inv;
  r[5] = (m_[0] * m_[10] - m_[2] * m_[8]) * inv;
  r[6] = (m_[2] * m_[4] - m_[0] * m_[6]) * inv;
  r[8] = (m_[4] * m_[9] - m_[5] * m_[8]) * inv;
  r[9] = (m_[1] * m_[8] - m_[0] * m_[9]) * inv;
  r[10] = (m_[0] * m_[5] - m_[1] * m_[4]) * inv;
  for (int row = 0; row < 3; ++row) {
    const auto b = static_cast<std::size_t>(4 * row);
    r[b + 3] = -(r[b] * m_[3] + r[b + 1] * m_[7] + r[b + 2] * m_[11]);
  }
  return Affine(r);
}

std::array<double, 3> Affine::column_norms() const {
  std::array<double, 3> out{};
  for (std::size_t c = 0; c < 3; ++c)
    out[c] = std::sqrt(m_[c] * m_[c] + m_[4 + c] * m_[4 + c] + m_[8 + c] * m_[8 + c]);
  return out;
}

// ---------------------------------------------------------------------------
// Sphere

namespace {

constexpr std::size_t kCubeCells = 8;

} // namespace

DiscretizedSphere subdivide_icosahedron(int level) {
  if (level < 0 || level > DiscretizedSphere::kMaxLevel)
    throw ParameterError("sphere subdivision level must be in [0, 7], got " + std::to_string(level));

  const double phi = std::numbers::phi;
  DiscretizedSphere s;
  s.level_ = level;
  s.vertices_ = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
                 {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : s.vertices_) v = v.normalized();
  s.triangles_ = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
                  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
                  {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int it = 0; it < level; ++it) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto [pos, inserted] = midpoints.try_emplace({key.first, key.second}, 0u);
      if (inserted) {
        pos->second = static_cast<std::uint32_t>(s.vertices_.size());
        s.vertices_.push_back(((s.vertices_[a] + s.vertices_[b]) * 0.5).normalized());
      }
      return pos->second;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(s.triangles_.size() * 4);
    for (const auto& t : s.triangles_) {
      const auto ab = midpoint(t[0], t[1]);
      const auto bc = midpoint(t[1], t[2]);
      const auto ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    s.triangles_ = std::move(next);
  }

  s.build_adjacency();
  s.build_start_table();
  return s;
}

void DiscretizedSphere::build_adjacency() {
  std::vector<std::vector<std::uint32_t>> adj(vertices_.size());
  auto link = [&](std::uint32_t a, std::uint32_t b) {
    if (std::find(adj[a].begin(), adj[a].end(), b) == adj[a].end()) adj[a].push_back(b);
  };
  for (const auto& t : triangles_) {
    for (int e = 0; e < 3; ++e) {
      link(t[e], t[(e + 1) % 3]);
      link(t[(e + 1) % 3], t[e]);
    }
  }
  adjacency_offsets_.assign(1, 0);
  adjacency_.clear();
  for (auto& n : adj) {
    std::sort(n.begin(), n.end());
    adjacency_.insert(adjacency_.end(), n.begin(), n.end());
    adjacency_offsets_.push_back(adjacency_.size());
  }
}

std::size_t DiscretizedSphere::cube_cell(const Vec3& d) {
  const double ax = std::abs(d.x), ay = std::abs(d.y), az = std::abs(d.z);
  std::size_t face;
  double u, v, major;
  if (ax >= ay && ax >= az) {
    face = d.x >= 0 ? 0 : 1;
    major = ax;
    u = d.y;
    v = d.z;
  } else if (ay >= az) {
    face = d.y >= 0 ? 2 : 3;
    major = ay;
    u = d.x;
    v = d.z;
  } else {
    face = d.z >= 0 ? 4 : 5;
    major = az;
    u = d.x;
    v = d.y;
  }
  auto bin = [](double t) {
    auto i = static_cast<std::size_t>(std::max(0.0, (t + 1.0) * 0.5 * static_cast<double>(kCubeCells)));
    return std::min(i, kCubeCells - 1);
  };
  return (face * kCubeCells + bin(u / major)) * kCubeCells + bin(v / major);
}

void DiscretizedSphere::build_start_table() {
  start_table_.assign(6 * kCubeCells * kCubeCells, 0);
  const double h = 1.0 / static_cast<double>(kCubeCells);
  for (std::size_t face = 0; face < 6; ++face) {
    const double sign = (face % 2 == 0) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < kCubeCells; ++i) {
      for (std::size_t j = 0; j < kCubeCells; ++j) {
        const double u = -1.0 + (2.0 * static_cast<double>(i) + 1.0) * h;
        const double v = -1.0 + (2.0 * static_cast<double>(j) + 1.0) * h;
        Vec3 d;
        switch (face / 2) {
        case 0: d = {sign, u, v}; break;
        case 1: d = {u, sign, v}; break;
        default: d = {u, v, sign}; break;
        }
        start_table_[(face * kCubeCells + i) * kCubeCells + j] = nearest_exhaustive(d.normalized());
      }
    }
  }
}

std::uint32_t DiscretizedSphere::nearest_exhaustive(const Vec3& dir) const {
  std::uint32_t best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const double d = vertices_[i].dot(dir);
    if (d > best_dot) {
      best_dot = d;
      best = static_cast<std::uint32_t>(i);
    }
  }
  return best;
}

// The subdivided icosahedron is a convex polyhedron inscribed in the sphere,
// hence the spherical Delaunay triangulation of its vertices; greedy ascent on
// dot product over Delaunay neighbors ends at the global argmax.
std::uint32_t DiscretizedSphere::nearest(const Vec3& dir) const {
  std::uint32_t current = start_table_[cube_cell(dir)];
  double current_dot = vertices_[current].dot(dir);
  for (;;) {
    std::uint32_t best = current;
    for (std::uint32_t n : neighbors(current)) {
      const double d = vertices_[n].dot(dir);
      if (d > current_dot) {
        current_dot = d;
        best = n;
      }
    }
    if (best == current) return current;
    current = best;
  }
}

std::vector<double> DiscretizedSphere::solid_angle_weights() const {
  std::vector<double> w(vertices_.size(), 0.0);
  for (const auto& t : triangles_) {
    const Vec3& a = vertices_[t[0]];
    const Vec3& b = vertices_[t[1]];
    const Vec3& c = vertices_[t[2]];
    const double num = std::abs(a.dot(b.cross(c)));
    const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    const double omega = 2.0 * std::atan2(num, den);
    for (auto v : t) w[v] += omega / 3.0;
  }
  return w;
}

double DiscretizedSphere::max_edge_angle() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i)
    for (auto n : neighbors(i)) worst = std::max(worst, angle_between(vertices_[i], vertices_[n]));
  return worst;
}

// ---------------------------------------------------------------------------
// Spherical harmonics

void sh_evaluate(int lmax, const Vec3& dir, std::span<double> out) {
  const double x = std::clamp(dir.z, -1.0, 1.0);
  const double s = std::hypot(dir.x, dir.y);
  const double azimuth = std::atan2(dir.y, dir.x);

  // Fully normalized associated Legendre functions for a fixed m, l = m..lmax.
  std::array<double, 32> plm{};
  double pmm = 0.5 / std::sqrt(std::numbers::pi);
  for (int m = 0; m <= lmax; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
    plm[static_cast<std::size_t>(m)] = pmm;
    if (m + 1 <= lmax) plm[static_cast<std::size_t>(m + 1)] = x * std::sqrt(2.0 * m + 3.0) * pmm;
    for (int l = m + 2; l <= lmax; ++l) {
      const double l2 = static_cast<double>(l * l);
      const double m2 = static_cast<double>(m * m);
      const double a = std::sqrt((4.0 * l2 - 1.0) / (l2 - m2));
      const double lm1 = static_cast<double>((l - 1) * (l - 1));
      const double b = std::sqrt((lm1 - m2) / (4.0 * lm1 - 1.0));
      const auto li = static_cast<std::size_t>(l);
      plm[li] = a * (x * plm[li - 1] - b * plm[li - 2]);
    }
    const double c = std::cos(m * azimuth);
    const double sn = std::sin(m * azimuth);
    for (int l = (m % 2 == 0 ? m : m + 1); l <= lmax; l += 2) {
      const double p = plm[static_cast<std::size_t>(l)];
      if (m == 0) {
        out[sh_index(l, 0)] = p;
      } else {
        out[sh_index(l, m)] = std::numbers::sqrt2 * p * c;
        out[sh_index(l, -m)] = std::numbers::sqrt2 * p * sn;
      }
    }
  }
}

ShBasis::ShBasis(const DiscretizedSphere& sphere, int lmax)
    : lmax_(lmax), rows_(sphere.size()), cols_(sh_count(lmax)) {
  if (lmax < 0 || lmax > 16 || lmax % 2 != 0)
    throw ParameterError("lmax must be even and in [0, 16], got " + std::to_string(lmax));
  matrix_.resize(rows_ * cols_);
  for (std::size_t v = 0; v < rows_; ++v)
    sh_evaluate(lmax, sphere.vertex(v), {matrix_.data() + v * cols_, cols_});
}

ShBasis sh_basis(const DiscretizedSphere& sphere, int lmax) { return ShBasis(sphere, lmax); }

// ---------------------------------------------------------------------------
// Sampling

double cone_angle_from_radius(double step_size, double radius) {
  if (!(step_size > 0.0))
    throw ParameterError("step size must be positive, got " + std::to_string(step_size));
  if (!(radius >= step_size))
    throw ParameterError("radius of curvature " + std::to_string(radius) + " is below step size " +
                         std::to_string(step_size));
  return 2.0 * std::asin(step_size / radius);
}

namespace {

// Orthonormal pair perpendicular to a unit vector.
std::pair<Vec3, Vec3> frame(const Vec3& axis) {
  const Vec3 helper = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 e1 = axis.cross(helper).normalized();
  return {e1, axis.cross(e1)};
}

} // namespace

Vec3 sample_direction_in_cone(const Vec3& axis, double alpha, Rng& rng) {
  if (alpha <= 0.0) return axis;
  const double half = std::sin(0.5 * std::min(alpha, std::numbers::pi));
  const double one_minus_cos_alpha = 2.0 * half * half;
  const double u = rng.uniform();
  const double azimuth = 2.0 * std::numbers::pi * rng.uniform();
  const double one_minus_cos = u * one_minus_cos_alpha;
  const double cos_t = 1.0 - one_minus_cos;
  const double sin_t = std::sqrt(std::max(0.0, one_minus_cos * (2.0 - one_minus_cos)));
  const auto [e1, e2] = frame(axis);
  const Vec3 d = axis * cos_t + (e1 * std::cos(azimuth) + e2 * std::sin(azimuth)) * sin_t;
  return d.normalized();
}

Vec3 sample_direction_uniform_sphere(Rng& rng) {
  const double z = 2.0 * rng.uniform() - 1.0;
  const double azimuth = 2.0 * std::numbers::pi * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3{r * std::cos(azimuth), r * std::sin(azimuth), z}.normalized();
}

} // namespace sspt
