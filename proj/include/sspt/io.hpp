// SPDX-License-Identifier: Apache-2.0
//
// File formats: single-file NIfTI-1 (plain or gzip), MRtrix-style TCK,
// JSON-Lines tracking records and CSV analysis tables.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sspt/analysis.hpp"
#include "sspt/engine.hpp"
#include "sspt/fod.hpp"
#include "sspt/roi.hpp"

namespace sspt::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// NIfTI-1

namespace nifti {
inline constexpr std::int16_t kUint8 = 2;
inline constexpr std::int16_t kInt16 = 4;
inline constexpr std::int16_t kFloat32 = 16;
inline constexpr std::int16_t kFloat64 = 64;
inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kVoxOffset = 352;
} // namespace nifti

struct NiftiHeader {
  std::array<std::int16_t, 8> dim{};
  std::array<float, 8> pixdim{};
  std::int16_t datatype = 0;
  float vox_offset = 0.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern_b = 0.0f, quatern_c = 0.0f, quatern_d = 0.0f;
  float qoffset_x = 0.0f, qoffset_y = 0.0f, qoffset_z = 0.0f;
  std::array<std::array<float, 4>, 3> srow{};
  std::array<char, 4> magic{};
  bool big_endian = false;

  /// sform when sform_code > 0, else qform when qform_code > 0, else pixdim scaling.
  Affine affine() const;
};

/// Parses and validates the first 348 bytes; byte order is detected from dim[0].
NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes);

using NiftiImage = std::variant<FodImage, BinaryMask>;

/// 4-D files become FOD images, 3-D files masks (nonzero voxels set).
NiftiImage read_nifti(const fs::path& path);
FodImage read_fod(const fs::path& path);
/// Also accepts 4-D files with a single volume.
BinaryMask read_mask(const fs::path& path);

/// Little-endian float32, sform_code 2; gzip-compressed when the name ends in ".gz".
void write_nifti(const fs::path& path, const FodImage& img);
/// As above with uint8 voxels.
void write_nifti(const fs::path& path, const BinaryMask& mask);

/// Whole file, transparently decompressed when gzip-compressed.
std::vector<std::uint8_t> read_file_bytes(const fs::path& path);

// ---------------------------------------------------------------------------
// TCK

void write_tck(const fs::path& path, const Tractogram& tracks);
Tractogram read_tck(const fs::path& path);

// ---------------------------------------------------------------------------
// Tracking records (JSON Lines)

std::string record_to_json(const TrackingRecord& r);
/// Throws FormatError on malformed input or unknown flag names.
TrackingRecord record_from_json(std::string_view line);

void write_records(const fs::path& path, std::span<const TrackingRecord> records, bool append = false);
std::vector<TrackingRecord> read_records(const fs::path& path);

// ---------------------------------------------------------------------------
// CSV and sidecars

void write_histogram_csv(const fs::path& path, const ParamHistogram& h);
void write_suggestion_csv(const fs::path& path, const RangeSuggestion& s);

/// Rows (streamline_index, cluster_id) in streamline order.
void write_clusters_csv(const fs::path& path, std::span<const Cluster> clusters);
/// Rebuilds clusters (members and ids, no centroids) from an assignment table.
std::vector<Cluster> read_clusters_csv(const fs::path& path);

/// Sampling ranges a record file was drawn from.
void write_ranges_json(const fs::path& path, const ParameterRanges& ranges);
ParameterRanges read_ranges_json(const fs::path& path);

} // namespace sspt::io
