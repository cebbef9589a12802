// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "sspt/geometry.hpp"

namespace sspt {

/// Even lmax with (lmax+1)(lmax+2)/2 == n; throws FormatError otherwise.
int lmax_from_ncoeffs(std::size_t n);

/// 4-D volume of even-order SH coefficients with a voxel-index -> world-mm affine.
///
/// Coefficients are stored voxel-major (the coefficient index varies fastest),
/// so one voxel's coefficient vector is contiguous.
class FodImage {
public:
  FodImage(std::array<int, 3> dims, std::size_t n_coeffs, const Affine& affine, std::vector<float> coeffs);
  /// Zero-filled image.
  FodImage(std::array<int, 3> dims, std::size_t n_coeffs, const Affine& affine);

  const std::array<int, 3>& dims() const { return dims_; }
  std::size_t n_coeffs() const { return n_coeffs_; }
  int lmax() const { return lmax_; }
  const Affine& affine() const { return affine_; }
  const Affine& inverse_affine() const { return inverse_; }
  std::array<double, 3> voxel_size() const { return affine_.column_norms(); }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
           static_cast<std::size_t>(dims_[2]);
  }

  std::size_t voxel_offset(int i, int j, int k) const {
    return ((static_cast<std::size_t>(k) * static_cast<std::size_t>(dims_[1]) + static_cast<std::size_t>(j)) *
                static_cast<std::size_t>(dims_[0]) +
            static_cast<std::size_t>(i)) *
           n_coeffs_;
  }
  std::span<const float> voxel(int i, int j, int k) const { return {data_.data() + voxel_offset(i, j, k), n_coeffs_}; }
  std::span<float> voxel(int i, int j, int k) { return {data_.data() + voxel_offset(i, j, k), n_coeffs_}; }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

private:
  std::array<int, 3> dims_;
  std::size_t n_coeffs_;
  int lmax_;
  Affine affine_;
  Affine inverse_;
  std::vector<float> data_;
};

/// Trilinear interpolation of every coefficient channel at a world position.
/// Positions whose voxel coordinates fall outside [0, n-1] on any axis give
/// the zero vector. `out` must hold n_coeffs values.
void interpolate_coeffs(const FodImage& img, const Vec3& pos, std::span<double> out);
std::vector<double> interpolate_coeffs(const FodImage& img, const Vec3& pos);

/// Per-vertex amplitudes of one coefficient vector (B * c).
struct AmplitudeTable {
  std::vector<double> amplitudes;
};

AmplitudeTable amplitude_table(const ShBasis& basis, std::span<const double> coeffs);

/// FOD amplitude evaluation on a discretized sphere with a precomputed basis.
///
/// The evaluator only holds references; the image, sphere and basis must
/// outlive it. It is stateless and safe to share across threads.
class FodEvaluator {
public:
  FodEvaluator(const FodImage& img, const DiscretizedSphere& sphere, const ShBasis& basis);

  const FodImage& image() const { return img_; }
  const DiscretizedSphere& sphere() const { return sphere_; }
  const ShBasis& basis() const { return basis_; }

  /// Amplitude at `pos` along the sphere vertex nearest to `dir`.
  double eval(const Vec3& pos, const Vec3& dir) const { return eval_vertex(pos, sphere_.nearest(dir)); }
  /// Amplitude at `pos` along sphere vertex `vertex`.
  double eval_vertex(const Vec3& pos, std::uint32_t vertex) const;
  /// Amplitude of an already-interpolated coefficient vector along `vertex`.
  double project(std::span<const double> coeffs, std::uint32_t vertex) const;

private:
  const FodImage& img_;
  const DiscretizedSphere& sphere_;
  const ShBasis& basis_;
};

/// Free-function form: interpolate at pos, project onto the basis row of the
/// vertex nearest to dir.
inline double eval_fod(const FodEvaluator& fod, const Vec3& pos, const Vec3& dir) { return fod.eval(pos, dir); }

} // namespace sspt
