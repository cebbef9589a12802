// SPDX-License-Identifier: Apache-2.0
#include "sspt/roi.hpp"

#include <cmath>
#include <string>

#include "sspt/error.hpp"

namespace sspt {

namespace {

std::size_t volume(const std::array<int, 3>& dims) {
  for (int d : dims)
    if (d < 1) throw FormatError("mask dimensions must be positive");
  return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
}

// Scale of the uniform in-voxel offset; keeps samples strictly inside the
// half-open rounding cell after the affine round trip.
constexpr double kInsideScale = 1.0 - 1e-9;

} // namespace

BinaryMask::BinaryMask(std::array<int, 3> dims, const Affine& affine, std::vector<std::uint8_t> voxels)
    : dims_(dims), affine_(affine), voxels_(std::move(voxels)) {
  if (voxels_.size() != volume(dims_))
    throw FormatError("mask buffer has " + std::to_string(voxels_.size()) + " voxels, expected " +
                      std::to_string(volume(dims_)));
  if (!affine_.invertible()) throw FormatError("mask affine is not invertible");
  inverse_ = affine_.inverse();
  for (auto& v : voxels_) v = v ? 1 : 0;
  rebuild_nonzero();
}

BinaryMask::BinaryMask(std::array<int, 3> dims, const Affine& affine)
    : BinaryMask(dims, affine, std::vector<std::uint8_t>(volume(dims), 0)) {}

void BinaryMask::set(int i, int j, int k, bool on) {
  auto& v = voxels_[index(i, j, k)];
  if ((v != 0) == on) return;
  v = on ? 1 : 0;
  rebuild_nonzero();
}

void BinaryMask::rebuild_nonzero() {
  nonzero_.clear();
  for (std::size_t i = 0; i < voxels_.size(); ++i)
    if (voxels_[i]) nonzero_.push_back(i);
}

bool contains(const BinaryMask& mask, const Vec3& pos) {
  const Vec3 v = mask.inverse_affine().apply(pos);
  const double fi = std::floor(v.x + 0.5);
  const double fj = std::floor(v.y + 0.5);
  const double fk = std::floor(v.z + 0.5);
  const auto& d = mask.dims();
  if (!(fi >= 0 && fj >= 0 && fk >= 0 && fi < d[0] && fj < d[1] && fk < d[2])) return false;
  return mask.at(static_cast<int>(fi), static_cast<int>(fj), static_cast<int>(fk));
}

Vec3 sample_seed(const BinaryMask& mask, Rng& rng) {
  const auto& nz = mask.nonzero();
  if (nz.empty()) throw ConfigError("seed mask has no nonzero voxels");
  const std::size_t flat = nz[rng.index(nz.size())];
  const auto nx = static_cast<std::size_t>(mask.dims()[0]);
  const auto ny = static_cast<std::size_t>(mask.dims()[1]);
  const double i = static_cast<double>(flat % nx);
  const double j = static_cast<double>((flat / nx) % ny);
  const double k = static_cast<double>(flat / (nx * ny));
  const double ox = (rng.uniform() - 0.5) * kInsideScale;
  const double oy = (rng.uniform() - 0.5) * kInsideScale;
  const double oz = (rng.uniform() - 0.5) * kInsideScale;
  return mask.affine().apply({i + ox, j + oy, k + oz});
}

InclusionStatus update_status(InclusionStatus status, const RoiSet& rois, const Vec3& pos) {
  if (status.visited_and.size() != rois.include_and.size()) status.visited_and.resize(rois.include_and.size(), false);
  for (std::size_t i = 0; i < rois.include_and.size(); ++i)
    if (!status.visited_and[i] && contains(rois.include_and[i], pos)) status.visited_and[i] = true;
  if (!status.visited_or_any) {
    for (const auto& m : rois.include_or) {
      if (contains(m, pos)) {
        status.visited_or_any = true;
        break;
      }
    }
  }
  return status;
}

bool is_satisfied(const InclusionStatus& status, const RoiSet& rois) {
  if (status.visited_and.size() < rois.include_and.size()) return false;
  for (std::size_t i = 0; i < rois.include_and.size(); ++i)
    if (!status.visited_and[i]) return false;
  return rois.include_or.empty() || status.visited_or_any;
}

bool in_exclusion(const RoiSet& rois, const Vec3& pos) {
  for (const auto& m : rois.exclude)
    if (contains(m, pos)) return true;
  return false;
}

InclusionStatus status_of(const RoiSet& rois, const std::vector<Vec3>& points) {
  auto s = InclusionStatus::empty_for(rois);
  for (const auto& p : points) s = update_status(std::move(s), rois, p);
  return s;
}

} // namespace sspt
