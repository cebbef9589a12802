// SPDX-License-Identifier: Apache-2.0
//
// Reference computations written independently of the library code paths they
// check, plus small random generators for property tests.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sspt/fod.hpp"
#include "sspt/geometry.hpp"

namespace oracle {

using sspt::Vec3;

/// Unnormalized associated Legendre function P_l^m(x) with the Condon-Shortley
/// phase, from the textbook three-term recurrence in l.
inline double legendre(int l, int m, double x) {
  double pmm = 1.0;
  const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
  for (int i = 1; i <= m; ++i) pmm *= -(2.0 * i - 1.0) * s;
  if (l == m) return pmm;
  double pm1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pm1;
  double pl = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pl = ((2.0 * ll - 1.0) * x * pm1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pm1;
    pm1 = pl;
  }
  return pl;
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// Real even-order SH value, index l(l+1)/2 + m, m<0 sine and m>0 cosine terms.
inline double sh(int l, int m, const Vec3& dir) {
  const Vec3 u = dir.normalized();
  const double theta = std::acos(std::clamp(u.z, -1.0, 1.0));
  const double phi = std::atan2(u.y, u.x);
  const int am = std::abs(m);
  const double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * factorial(l - am) / factorial(l + am));
  const double p = norm * legendre(l, am, std::cos(theta));
  if (m == 0) return p;
  if (m > 0) return std::numbers::sqrt2 * p * std::cos(am * phi);
  return std::numbers::sqrt2 * p * std::sin(am * phi);
}

inline std::vector<double> sh_all(int lmax, const Vec3& dir) {
  std::vector<double> out(static_cast<std::size_t>((lmax + 1) * (lmax + 2) / 2));
  for (int l = 0; l <= lmax; l += 2)
    for (int m = -l; m <= l; ++m) out[static_cast<std::size_t>(l * (l + 1) / 2 + m)] = sh(l, m, dir);
  return out;
}

/// Inverse of the linear part of a row-major 4x4 affine by cofactors, applied
/// to (p - translation).
inline Vec3 world_to_voxel(const sspt::Affine& a, const Vec3& p) {
  const double m00 = a(0, 0), m01 = a(0, 1), m02 = a(0, 2);
  const double m10 = a(1, 0), m11 = a(1, 1), m12 = a(1, 2);
  const double m20 = a(2, 0), m21 = a(2, 1), m22 = a(2, 2);
  const double det = m00 * (m11 * m22 - m12 * m21) - m01 * (m10 * m22 - m12 * m20) + m02 * (m10 * m21 - m11 * m20);
  const Vec3 q{p.x - a(0, 3), p.y - a(1, 3), p.z - a(2, 3)};
  return {((m11 * m22 - m12 * m21) * q.x + (m02 * m21 - m01 * m22) * q.y + (m01 * m12 - m02 * m11) * q.z) / det,
          ((m12 * m20 - m10 * m22) * q.x + (m00 * m22 - m02 * m20) * q.y + (m02 * m10 - m00 * m12) * q.z) / det,
          ((m10 * m21 - m11 * m20) * q.x + (m01 * m20 - m00 * m21) * q.y + (m00 * m11 - m01 * m10) * q.z) / det};
}

/// Trilinear interpolation by explicit eight-corner weighting.
inline std::vector<double> trilinear(const sspt::FodImage& img, const Vec3& pos) {
  const Vec3 v = world_to_voxel(img.affine(), pos);
  const auto d = img.dims();
  std::vector<double> out(img.n_coeffs(), 0.0);
  const double c[3] = {v.x, v.y, v.z};
  for (int ax = 0; ax < 3; ++ax)
    if (!(c[ax] >= 0.0 && c[ax] <= d[static_cast<std::size_t>(ax)] - 1)) return out;
  int lo[3];
  double f[3];
  for (int ax = 0; ax < 3; ++ax) {
    lo[ax] = std::min(static_cast<int>(std::floor(c[ax])), std::max(0, d[static_cast<std::size_t>(ax)] - 2));
    f[ax] = c[ax] - lo[ax];
  }
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const int i = std::min(lo[0] + dx, d[0] - 1), j = std::min(lo[1] + dy, d[1] - 1), k = std::min(lo[2] + dz, d[2] - 1);
    const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
    if (w == 0.0) continue;
    const auto vox = img.voxel(i, j, k);
    for (std::size_t q = 0; q < out.size(); ++q) out[q] += w * vox[q];
  }
  return out;
}

/// Exhaustive nearest vertex.
inline std::size_t nearest(const sspt::DiscretizedSphere& s, const Vec3& dir) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s.vertex(i).dot(dir) > s.vertex(best).dot(dir)) best = i;
  return best;
}

/// FOD amplitude: trilinear coefficients against the oracle SH at the nearest vertex.
inline double eval_fod(const sspt::FodImage& img, const sspt::DiscretizedSphere& s, const Vec3& pos,
                       const Vec3& dir) {
  const auto c = trilinear(img, pos);
  const auto y = sh_all(img.lmax(), s.vertex(nearest(s, dir)));
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) acc += c[i] * y[i];
  return acc;
}

// --- generators -------------------------------------------------------------

struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
  Vec3 direction() {
    std::normal_distribution<double> n;
    for (;;) {
      const Vec3 v{n(eng), n(eng), n(eng)};
      if (v.norm() > 1e-6) return v.normalized();
    }
  }
  Vec3 point(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
};

} // namespace oracle
