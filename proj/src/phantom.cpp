// SPDX-License-Identifier: Apache-2.0
#include "sspt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "sspt/error.hpp"

namespace sspt {

std::string_view phantom_kind_name(PhantomKind k) {
  switch (k) {
  case PhantomKind::Straight: return "straight";
  case PhantomKind::Arc: return "arc";
  case PhantomKind::Crossing: return "crossing";
  }
  return "unknown";
}

PhantomKind phantom_kind_from_name(std::string_view name) {
  for (auto k : {PhantomKind::Straight, PhantomKind::Arc, PhantomKind::Crossing})
    if (phantom_kind_name(k) == name) return k;
  throw ParameterError("unknown phantom kind '" + std::string(name) + "' (expected straight, arc or crossing)");
}

PhantomSpec default_phantom(PhantomKind kind) {
  PhantomSpec s;
  s.kind = kind;
  if (kind == PhantomKind::Straight) s.bundle_radius = 8.0;
  return s;
}

namespace {

int voxels_for(double mm, double voxel) { return static_cast<int>(std::ceil(mm / voxel - 1e-9)); }

// World-space landmarks of a phantom.
struct Layout {
  double x0, y0, z0;  // straight/crossing tube axes; arc circle center
  double ymax, xmax;
};

Layout layout_of(const PhantomSpec& spec) {
  const auto d = spec.dims();
  const double vs = spec.voxel_size;
  Layout l{};
  l.x0 = 0.5 * (d[0] - 1) * vs;
  l.y0 = spec.kind == PhantomKind::Arc ? 2.0 * vs : 0.5 * (d[1] - 1) * vs;
  l.z0 = 0.5 * (d[2] - 1) * vs;
  l.xmax = (d[0] - 1) * vs;
  l.ymax = (d[1] - 1) * vs;
  return l;
}

} // namespace

std::array<int, 3> PhantomSpec::dims() const {
  if (volume_dims[0] > 0 || volume_dims[1] > 0 || volume_dims[2] > 0) return volume_dims;
  const int cross = 2 * voxels_for(bundle_radius, voxel_size) + 5;
  switch (kind) {
  case PhantomKind::Straight: return {cross, voxels_for(20.0, voxel_size) + 1, cross};
  case PhantomKind::Arc: {
    const int reach = voxels_for(arc_radius + bundle_radius, voxel_size);
    return {2 * reach + 5, reach + 5, cross};
  }
  case PhantomKind::Crossing: {
    const int len = voxels_for(30.0, voxel_size) | 1;
    return {len, len, cross};
  }
  }
  return {0, 0, 0};
}

void PhantomSpec::validate() const {
  if (!(voxel_size > 0.0)) throw ParameterError("phantom voxel size must be positive");
  if (!(bundle_radius > 0.0)) throw ParameterError("phantom bundle radius must be positive");
  if (!(kappa > 0.0)) throw ParameterError("phantom kappa must be positive");
  if (!(peak_amplitude > 0.0)) throw ParameterError("phantom peak amplitude must be positive");
  if (lmax < 0 || lmax > 16 || lmax % 2 != 0) throw ParameterError("phantom lmax must be even and in [0, 16]");
  if (kind == PhantomKind::Arc && !(arc_radius > bundle_radius))
    throw ParameterError("arc radius " + std::to_string(arc_radius) + " must exceed bundle radius " +
                         std::to_string(bundle_radius));
  const auto d = dims();
  for (int n : d)
    if (n < 1) throw ParameterError("phantom dimensions must be positive");

  const Layout l = layout_of(*this);
  const double br = bundle_radius;
  auto fail = [&]() {
    throw ParameterError("phantom geometry does not fit in " + std::to_string(d[0]) + "x" + std::to_string(d[1]) +
                         "x" + std::to_string(d[2]) + " voxels");
  };
  if (l.z0 < br) fail();
  switch (kind) {
  case PhantomKind::Straight:
    if (l.x0 < br || d[1] < 7) fail();
    break;
  case PhantomKind::Arc:
    if (l.x0 < arc_radius + br || l.y0 + arc_radius + br > l.ymax) fail();
    break;
  case PhantomKind::Crossing:
    if (l.x0 < br || l.y0 < br || d[0] < 7 || d[1] < 7) fail();
    break;
  }
}

std::vector<Vec3> fiber_directions_at(const PhantomSpec& spec, const Vec3& pos) {
  const Layout l = layout_of(spec);
  const double br2 = spec.bundle_radius * spec.bundle_radius;
  std::vector<Vec3> out;
  const double dz = pos.z - l.z0;
  switch (spec.kind) {
  case PhantomKind::Straight: {
    const double dx = pos.x - l.x0;
    if (dx * dx + dz * dz <= br2 && pos.y >= 0.0 && pos.y <= l.ymax) out.push_back({0, 1, 0});
    break;
  }
  case PhantomKind::Arc: {
    const double rx = pos.x - l.x0;
    const double ry = pos.y - l.y0;
    const double rho = std::hypot(rx, ry);
    const double off = rho - spec.arc_radius;
    if (ry >= 0.0 && rho > 0.0 && off * off + dz * dz <= br2) out.push_back({-ry / rho, rx / rho, 0.0});
    break;
  }
  case PhantomKind::Crossing: {
    const double dx = pos.x - l.x0;
    const double dy = pos.y - l.y0;
    if (dy * dy + dz * dz <= br2 && pos.x >= 0.0 && pos.x <= l.xmax) out.push_back({1, 0, 0});
    if (dx * dx + dz * dz <= br2 && pos.y >= 0.0 && pos.y <= l.ymax) out.push_back({0, 1, 0});
    break;
  }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel projection

KernelProjector::KernelProjector(const PhantomSpec& spec, const DiscretizedSphere& sphere, const ShBasis& basis)
    : kappa_(spec.kappa), peak_(spec.peak_amplitude), sphere_(sphere), n_coeffs_(basis.cols()) {
  if (basis.lmax() != spec.lmax) throw ParameterError("basis lmax does not match phantom lmax");
  if (basis.rows() != sphere.size()) throw ParameterError("basis was built on a different sphere");
  const auto rows = static_cast<Eigen::Index>(basis.rows());
  const auto cols = static_cast<Eigen::Index>(basis.cols());
  Eigen::MatrixXd b(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) b(r, c) = basis(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  const Eigen::MatrixXd pinv = (b.transpose() * b).ldlt().solve(b.transpose());
  pinv_.resize(static_cast<std::size_t>(cols * rows));
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) pinv_[static_cast<std::size_t>(c * rows + r)] = pinv(c, r);
}

std::vector<double> KernelProjector::project(std::span<const Vec3> dirs) const {
  std::vector<double> coeffs(n_coeffs_, 0.0);
  if (dirs.empty()) return coeffs;
  const std::size_t nv = sphere_.size();
  std::vector<double> samples(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    double acc = 0.0;
    for (const auto& f : dirs) {
      const double c = sphere_.vertex(v).dot(f);
      acc += std::exp(kappa_ * (c * c - 1.0));
    }
    samples[v] = peak_ * acc;
  }
  for (std::size_t c = 0; c < n_coeffs_; ++c) {
    const double* row = pinv_.data() + c * nv;
    double acc = 0.0;
    for (std::size_t v = 0; v < nv; ++v) acc += row[v] * samples[v];
    coeffs[c] = acc;
  }
  return coeffs;
}

std::vector<double> project_kernel_to_sh(std::span<const Vec3> dirs, const PhantomSpec& spec,
                                         const DiscretizedSphere& sphere, const ShBasis& basis) {
  return KernelProjector(spec, sphere, basis).project(dirs);
}

// ---------------------------------------------------------------------------
// Volume generation

namespace {

struct Generator {
  const PhantomSpec& spec;
  std::array<int, 3> dims;
  Affine affine;
  Layout layout;
  DiscretizedSphere sphere;
  ShBasis basis;
  KernelProjector projector;

  explicit Generator(const PhantomSpec& s)
      : spec(s), dims(s.dims()), affine(s.affine()), layout(layout_of(s)), sphere(subdivide_icosahedron(4)),
        basis(sphere, s.lmax), projector(s, sphere, basis) {}

  // Fills one z-slice of the FOD buffer; independent across slices.
  void fill_slice(int k, FodImage& fod) const {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const auto dirs = fiber_directions_at(spec, affine.apply({double(i), double(j), double(k)}));
        if (dirs.empty()) continue;
        const auto coeffs = projector.project(dirs);
        auto dst = fod.voxel(i, j, k);
        for (std::size_t c = 0; c < coeffs.size(); ++c) dst[c] = static_cast<float>(coeffs[c]);
      }
    }
  }

  // Distance from the centerline of the tracked bundle (the y tube for
  // crossings), or infinity outside it.
  double off_axis(const Vec3& p) const {
    const double dz = p.z - layout.z0;
    double r2 = 0.0;
    if (spec.kind == PhantomKind::Arc) {
      const double ry = p.y - layout.y0;
      if (ry < 0.0) return std::numeric_limits<double>::infinity();
      const double off = std::hypot(p.x - layout.x0, ry) - spec.arc_radius;
      r2 = off * off + dz * dz;
    } else {
      const double dx = p.x - layout.x0;
      r2 = dx * dx + dz * dz;
    }
    return r2 <= spec.bundle_radius * spec.bundle_radius ? std::sqrt(r2) : std::numeric_limits<double>::infinity();
  }

  RoiSet masks() const {
    const BinaryMask seed(dims, affine);
    std::vector<std::uint8_t> sv(seed.voxel_count(), 0), av(sv.size(), 0), bv(sv.size(), 0);
    const double vs = spec.voxel_size;
    const double core = std::max(0.25 * spec.bundle_radius, 0.5 * vs);
    const int mid_y = dims[1] / 2;
    for (int k = 0; k < dims[2]; ++k) {
      for (int j = 0; j < dims[1]; ++j) {
        for (int i = 0; i < dims[0]; ++i) {
          const Vec3 p = affine.apply({double(i), double(j), double(k)});
          const std::size_t idx = seed.index(i, j, k);
          const bool in_core = off_axis(p) <= core + 1e-9;
          // End slabs cover whole slices so that streamlines on the rim of the
          // interpolated bundle still register.
          if (spec.kind == PhantomKind::Arc) {
            if (p.y - layout.y0 <= 2.0 * vs + 1e-9 && std::abs(p.x - layout.x0) > 0.5 * vs)
              (p.x > layout.x0 ? av : bv)[idx] = 1;
            if (in_core && std::abs(p.x - layout.x0) <= 0.5 * vs + 1e-9) sv[idx] = 1;
          } else {
            if (j <= 1) av[idx] = 1;
            if (j >= dims[1] - 2) bv[idx] = 1;
            if (in_core && j == mid_y) sv[idx] = 1;
          }
        }
      }
    }
    RoiSet rois{BinaryMask(dims, affine, std::move(sv)), {}, {}, {}, std::nullopt};
    rois.include_and.emplace_back(dims, affine, std::move(av));
    rois.include_and.emplace_back(dims, affine, std::move(bv));
    return rois;
  }
};

} // namespace

Phantom generate(const PhantomSpec& spec) {
  spec.validate();
  const Generator gen(spec);
  FodImage fod(gen.dims, sh_count(spec.lmax), gen.affine);
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < gen.dims[2]; ++k) gen.fill_slice(k, fod);
  return {std::move(fod), gen.masks()};
}

Phantom generate_serial(const PhantomSpec& spec) {
  spec.validate();
  const Generator gen(spec);
  FodImage fod(gen.dims, sh_count(spec.lmax), gen.affine);
  for (int k = 0; k < gen.dims[2]; ++k) gen.fill_slice(k, fod);
  return {std::move(fod), gen.masks()};
}

} // namespace sspt
