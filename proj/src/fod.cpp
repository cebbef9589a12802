// SPDX-License-Identifier: Apache-2.0
#include "sspt/fod.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sspt/error.hpp"

namespace sspt {

namespace {

constexpr std::size_t kMaxCoeffs = sh_count(16);
constexpr double kEdgeTolerance = 1e-9;

} // namespace

int lmax_from_ncoeffs(std::size_t n) {
  for (int l = 0; l <= 16; l += 2)
    if (sh_count(l) == n) return l;
  throw FormatError("coefficient count " + std::to_string(n) + " does not match any even lmax");
}

FodImage::FodImage(std::array<int, 3> dims, std::size_t n_coeffs, const Affine& affine, std::vector<float> coeffs)
    : dims_(dims), n_coeffs_(n_coeffs), lmax_(lmax_from_ncoeffs(n_coeffs)), affine_(affine),
      data_(std::move(coeffs)) {
  for (int d : dims_)
    if (d < 1) throw FormatError("FOD image dimensions must be positive");
  if (n_coeffs_ > kMaxCoeffs) throw FormatError("FOD lmax above 16 is not supported");
  if (!affine_.invertible()) throw FormatError("FOD image affine is not invertible");
  inverse_ = affine_.inverse();
  if (data_.size() != voxel_count() * n_coeffs_)
    throw FormatError("FOD coefficient buffer has " + std::to_string(data_.size()) + " values, expected " +
                      std::to_string(voxel_count() * n_coeffs_));
  for (float v : data_)
    if (!std::isfinite(v)) throw FormatError("FOD image contains non-finite coefficients");
}

FodImage::FodImage(std::array<int, 3> dims, std::size_t n_coeffs, const Affine& affine)
    : FodImage(dims, n_coeffs, affine,
               std::vector<float>(static_cast<std::size_t>(std::max(dims[0], 0)) *
                                      static_cast<std::size_t>(std::max(dims[1], 0)) *
                                      static_cast<std::size_t>(std::max(dims[2], 0)) * n_coeffs,
                                  0.0f)) {}

void interpolate_coeffs(const FodImage& img, const Vec3& pos, std::span<double> out) {
  const std::size_t nc = img.n_coeffs();
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(nc), 0.0);

  const Vec3 v = img.inverse_affine().apply(pos);
  const double coords[3] = {v.x, v.y, v.z};
  int lo[3];
  int hi[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const int n = img.dims()[static_cast<std::size_t>(a)];
    // Snap round-off from the inverse affine onto the boundary voxel centers.
    double c = coords[a];
    if (c < 0.0 && c > -kEdgeTolerance) c = 0.0;
    if (c > n - 1 && c < n - 1 + kEdgeTolerance) c = n - 1;
    if (!(c >= 0.0 && c <= static_cast<double>(n - 1))) return;
    const double f = std::floor(c);
    lo[a] = static_cast<int>(f);
    frac[a] = c - f;
    hi[a] = lo[a] + 1 < n ? lo[a] + 1 : lo[a];
  }

  for (int corner = 0; corner < 8; ++corner) {
    const int ix = (corner & 1) ? hi[0] : lo[0];
    const int iy = (corner & 2) ? hi[1] : lo[1];
    const int iz = (corner & 4) ? hi[2] : lo[2];
    const double w = ((corner & 1) ? frac[0] : 1.0 - frac[0]) * ((corner & 2) ? frac[1] : 1.0 - frac[1]) *
                     ((corner & 4) ? frac[2] : 1.0 - frac[2]);
    if (w == 0.0) continue;
    const auto src = img.voxel(ix, iy, iz);
    for (std::size_t c = 0; c < nc; ++c) out[c] += w * static_cast<double>(src[c]);
  }
}

std::vector<double> interpolate_coeffs(const FodImage& img, const Vec3& pos) {
  std::vector<double> out(img.n_coeffs());
  interpolate_coeffs(img, pos, out);
  return out;
}

AmplitudeTable amplitude_table(const ShBasis& basis, std::span<const double> coeffs) {
  if (coeffs.size() != basis.cols()) throw ParameterError("coefficient count does not match basis");
  AmplitudeTable t;
  t.amplitudes.resize(basis.rows());
  for (std::size_t v = 0; v < basis.rows(); ++v) {
    const auto row = basis.row(v);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * coeffs[c];
    t.amplitudes[v] = acc;
  }
  return t;
}

FodEvaluator::FodEvaluator(const FodImage& img, const DiscretizedSphere& sphere, const ShBasis& basis)
    : img_(img), sphere_(sphere), basis_(basis) {
  if (basis.cols() != img.n_coeffs())
    throw ParameterError("SH basis lmax " + std::to_string(basis.lmax()) + " does not match FOD lmax " +
                         std::to_string(img.lmax()));
  if (basis.rows() != sphere.size()) throw ParameterError("SH basis was built on a different sphere");
}

double FodEvaluator::project(std::span<const double> coeffs, std::uint32_t vertex) const {
  const auto row = basis_.row(vertex);
  double acc = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * coeffs[c];
  return acc;
}

double FodEvaluator::eval_vertex(const Vec3& pos, std::uint32_t vertex) const {
  std::array<double, kMaxCoeffs> buf;
  const std::span<double> coeffs(buf.data(), img_.n_coeffs());
  interpolate_coeffs(img_, pos, coeffs);
  return project(coeffs, vertex);
}

} // namespace sspt
