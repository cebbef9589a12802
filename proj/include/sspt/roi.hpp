// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "sspt/geometry.hpp"
#include "sspt/rng.hpp"

namespace sspt {

/// Binary voxel mask with its own voxel -> world affine.
class BinaryMask {
public:
  BinaryMask(std::array<int, 3> dims, const Affine& affine, std::vector<std::uint8_t> voxels);
  /// All-false mask.
  BinaryMask(std::array<int, 3> dims, const Affine& affine);

  const std::array<int, 3>& dims() const { return dims_; }
  const Affine& affine() const { return affine_; }
  const Affine& inverse_affine() const { return inverse_; }
  std::size_t voxel_count() const { return voxels_.size(); }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims_[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims_[0]) +
           static_cast<std::size_t>(i);
  }
  bool at(int i, int j, int k) const { return voxels_[index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool on);
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
  }

  /// Flat indices of set voxels, ascending.
  const std::vector<std::size_t>& nonzero() const { return nonzero_; }
  const std::vector<std::uint8_t>& voxels() const { return voxels_; }

  /// World position of a voxel center.
  Vec3 voxel_center(int i, int j, int k) const { return affine_.apply({double(i), double(j), double(k)}); }

private:
  void rebuild_nonzero();

  std::array<int, 3> dims_;
  Affine affine_;
  Affine inverse_;
  std::vector<std::uint8_t> voxels_;
  std::vector<std::size_t> nonzero_;
};

/// True iff the nearest voxel to `pos` lies inside the mask and is set.
bool contains(const BinaryMask& mask, const Vec3& pos);

/// Uniform set voxel, then a uniform point within that voxel's cube.
/// Throws ConfigError on an empty mask.
Vec3 sample_seed(const BinaryMask& mask, Rng& rng);

struct RoiSet {
  BinaryMask seed;
  std::vector<BinaryMask> include_and;
  std::vector<BinaryMask> include_or;
  std::vector<BinaryMask> exclude;
  /// Optional region outside which no step may land.
  std::optional<BinaryMask> tracking_mask;
};

struct InclusionStatus {
  std::vector<bool> visited_and;
  bool visited_or_any = false;

  static InclusionStatus empty_for(const RoiSet& rois) {
    return {std::vector<bool>(rois.include_and.size(), false), false};
  }
  bool operator==(const InclusionStatus&) const = default;
};

/// Sets the bit of every inclusion region containing `pos`; never clears bits.
InclusionStatus update_status(InclusionStatus status, const RoiSet& rois, const Vec3& pos);

/// All 'and' regions visited and, when 'or' regions exist, at least one of them.
bool is_satisfied(const InclusionStatus& status, const RoiSet& rois);

bool in_exclusion(const RoiSet& rois, const Vec3& pos);

/// Status accumulated over a whole point list.
InclusionStatus status_of(const RoiSet& rois, const std::vector<Vec3>& points);

} // namespace sspt
