// SPDX-License-Identifier: Apache-2.0
//
// Turning tracking records into parameter-acceptance histograms, clustering
// accepted streamlines with QuickBundles, and suggesting narrower sampling
// ranges from where the accepted mass sits.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sspt/engine.hpp"

namespace sspt {

enum class ParamName { StepSize, Radius, ConeAngle, FodThreshold };

std::string_view param_name(ParamName p);
/// Throws ParameterError on anything but step_size, radius, cone_angle, fod_threshold.
ParamName param_from_name(std::string_view name);
double param_value(const ParameterSample& s, ParamName p);
/// Configured sampling interval of a parameter.
std::pair<double, double> param_range(const ParameterRanges& ranges, ParamName p);

struct ParamHistogram {
  ParamName param = ParamName::Radius;
  std::vector<double> bin_edges;  // n + 1, strictly increasing
  std::vector<std::size_t> accepted_counts;
  std::vector<std::size_t> attempted_counts;
  std::vector<double> acceptance_rate;
  /// Range the histogram was requested for, before any widening.
  std::pair<double, double> range{0.0, 0.0};

  std::size_t bins() const { return accepted_counts.size(); }
  std::size_t total_accepted() const;
  std::size_t total_attempted() const;
};

/// Equal-width bins over [lo, hi] (the sampling range, not the observed one).
/// Values outside are clamped into the end bins; a degenerate range is widened
/// symmetrically so it still has positive width. `subset` restricts to the
/// given record indices.
ParamHistogram histogram(std::span<const TrackingRecord> records, ParamName param, std::size_t n_bins,
                         std::pair<double, double> range,
                         const std::optional<std::vector<std::size_t>>& subset = std::nullopt);

/// K points at equal arc-length spacing; throws ParameterError for fewer than
/// two points, K < 2, or zero total length.
std::vector<Vec3> resample(std::span<const Vec3> streamline, std::size_t k);

/// Minimum of the direct and flipped mean point-wise distances.
double mdf_distance(std::span<const Vec3> a, std::span<const Vec3> b);

struct Cluster {
  std::size_t id = 0;
  std::vector<std::size_t> members;  // indices into the clustered tractogram
  std::vector<Vec3> centroid;        // K points

  bool operator==(const Cluster&) const = default;
};

/// Single-pass QuickBundles in input order.
std::vector<Cluster> quickbundles(std::span<const Streamline> streamlines, double threshold, std::size_t k = 12);

/// One histogram per cluster over its members' records, sharing bin edges.
/// Throws ConsistencyError when a member has no record with that streamline_index.
std::vector<ParamHistogram> per_cluster_histograms(std::span<const TrackingRecord> records,
                                                   std::span<const Cluster> clusters, ParamName param,
                                                   std::size_t n_bins, std::pair<double, double> range);

struct RangeSuggestion {
  ParamName param = ParamName::Radius;
  double suggested_min = 0.0;
  double suggested_max = 0.0;
  double support_fraction = 0.0;
};

/// Smallest contiguous run of bins holding at least keep_fraction of the
/// accepted mass; equal-width ties go to the higher mean acceptance rate, then
/// to the lower bins. Throws RefinementError when nothing was accepted.
RangeSuggestion suggest_ranges(const ParamHistogram& hist, double keep_fraction);

} // namespace sspt
