// SPDX-License-Identifier: Apache-2.0
//
// Synthetic FOD fields with known fiber geometry: a straight tube, a
// semicircular arc and a 90-degree crossing. The seed region is the core of
// the tracked bundle's central cross-section (within a quarter of the bundle
// radius of its centerline); the two 'and'-inclusion slabs sit at its ends.
#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "sspt/fod.hpp"
#include "sspt/geometry.hpp"
#include "sspt/roi.hpp"

namespace sspt {

enum class PhantomKind { Straight, Arc, Crossing };

std::string_view phantom_kind_name(PhantomKind k);
/// Throws ParameterError for anything but straight, arc, crossing.
PhantomKind phantom_kind_from_name(std::string_view name);

struct PhantomSpec {
  PhantomKind kind = PhantomKind::Straight;
  /// Voxels per axis; all zero selects a size that fits the geometry.
  std::array<int, 3> volume_dims{0, 0, 0};
  double voxel_size = 1.0;     // mm, isotropic
  double bundle_radius = 3.0;  // mm
  double arc_radius = 10.0;    // mm, arc only
  double kappa = 6.0;          // axial kernel concentration
  int lmax = 8;
  double peak_amplitude = 0.5;

  /// Throws ParameterError when the parameters are invalid or the geometry does not fit.
  void validate() const;
  std::array<int, 3> dims() const;
  Affine affine() const { return Affine::scaling(voxel_size, voxel_size, voxel_size); }
};

/// Per-kind defaults: a short wide straight tube (bundle radius 8 mm, 20 mm
/// long), arc and crossing tubes of radius 3 mm, arc radius 10 mm.
PhantomSpec default_phantom(PhantomKind kind);

/// Ground-truth fiber directions at a world position (0, 1 or 2 entries).
std::vector<Vec3> fiber_directions_at(const PhantomSpec& spec, const Vec3& pos);

/// Least-squares projection of the kernel sum
/// peak * sum_i exp(kappa * ((u.f_i)^2 - 1)) sampled at the sphere vertices.
class KernelProjector {
public:
  KernelProjector(const PhantomSpec& spec, const DiscretizedSphere& sphere, const ShBasis& basis);

  std::vector<double> project(std::span<const Vec3> dirs) const;
  std::size_t n_coeffs() const { return n_coeffs_; }

private:
  double kappa_;
  double peak_;
  const DiscretizedSphere& sphere_;
  std::size_t n_coeffs_;
  std::vector<double> pinv_;  // (n_coeffs x vertices), row-major
};

std::vector<double> project_kernel_to_sh(std::span<const Vec3> dirs, const PhantomSpec& spec,
                                         const DiscretizedSphere& sphere, const ShBasis& basis);

struct Phantom {
  FodImage fod;
  RoiSet rois;  // seed slab plus include_and = {end A, end B}
};

/// Parallel voxel-wise generation.
Phantom generate(const PhantomSpec& spec);
/// Single-threaded reference for `generate`.
Phantom generate_serial(const PhantomSpec& spec);

} // namespace sspt
