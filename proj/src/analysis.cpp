// SPDX-License-Identifier: Apache-2.0
#include "sspt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sspt/error.hpp"

namespace sspt {

std::string_view param_name(ParamName p) {
  switch (p) {
  case ParamName::StepSize: return "step_size";
  case ParamName::Radius: return "radius";
  case ParamName::ConeAngle: return "cone_angle";
  case ParamName::FodThreshold: return "fod_threshold";
  }
  return "unknown";
}

ParamName param_from_name(std::string_view name) {
  for (auto p : {ParamName::StepSize, ParamName::Radius, ParamName::ConeAngle, ParamName::FodThreshold})
    if (param_name(p) == name) return p;
  throw ParameterError("unknown parameter '" + std::string(name) +
                       "' (expected step_size, radius, cone_angle or fod_threshold)");
}

double param_value(const ParameterSample& s, ParamName p) {
  switch (p) {
  case ParamName::StepSize: return s.step_size;
  case ParamName::Radius: return s.radius;
  case ParamName::ConeAngle: return s.cone_angle;
  case ParamName::FodThreshold: return s.fod_threshold;
  }
  return 0.0;
}

std::pair<double, double> param_range(const ParameterRanges& ranges, ParamName p) {
  switch (p) {
  case ParamName::StepSize: return {ranges.step_min, ranges.step_max};
  case ParamName::Radius: return {ranges.radius_min, ranges.radius_max};
  case ParamName::ConeAngle: return ranges.cone_angle_range();
  case ParamName::FodThreshold: return {ranges.threshold_min, ranges.threshold_max};
  }
  return {0.0, 0.0};
}

std::size_t ParamHistogram::total_accepted() const {
  return std::accumulate(accepted_counts.begin(), accepted_counts.end(), std::size_t{0});
}

std::size_t ParamHistogram::total_attempted() const {
  return std::accumulate(attempted_counts.begin(), attempted_counts.end(), std::size_t{0});
}

// ---------------------------------------------------------------------------
// Histograms

ParamHistogram histogram(std::span<const TrackingRecord> records, ParamName param, std::size_t n_bins,
                         std::pair<double, double> range, const std::optional<std::vector<std::size_t>>& subset) {
  if (n_bins < 1) throw ParameterError("histogram needs at least one bin");
  if (records.empty()) throw ParameterError("histogram needs at least one record");
  auto [lo, hi] = range;
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
    throw ParameterError("histogram range must be finite with min <= max");
  if (lo == hi) {
    const double delta = 1e-6 * std::max(1.0, std::abs(lo));
    lo -= delta;
    hi += delta;
  }

  ParamHistogram h;
  h.param = param;
  h.range = range;
  h.bin_edges.resize(n_bins + 1);
  const auto n = static_cast<double>(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i)
    h.bin_edges[i] = (lo * static_cast<double>(n_bins - i) + hi * static_cast<double>(i)) / n;
  h.bin_edges[n_bins] = hi;
  h.accepted_counts.assign(n_bins, 0);
  h.attempted_counts.assign(n_bins, 0);

  auto add = [&](const TrackingRecord& r) {
    const double v = param_value(r.params, param);
    const double t = (v - lo) / (hi - lo) * n;
    std::size_t b = 0;
    if (t >= n)
      b = n_bins - 1;
    else if (t > 0.0)
      b = static_cast<std::size_t>(t);
    // Settle rounding at bin edges against the stored edges.
    while (b > 0 && v < h.bin_edges[b]) --b;
    while (b + 1 < n_bins && v >= h.bin_edges[b + 1]) ++b;
    ++h.attempted_counts[b];
    if (r.accepted) ++h.accepted_counts[b];
  };
  if (subset) {
    for (std::size_t i : *subset) {
      if (i >= records.size()) throw ParameterError("histogram subset index out of range");
      add(records[i]);
    }
  } else {
    for (const auto& r : records) add(r);
  }

  h.acceptance_rate.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i)
    h.acceptance_rate[i] = h.attempted_counts[i] ? static_cast<double>(h.accepted_counts[i]) /
                                                       static_cast<double>(h.attempted_counts[i])
                                                 : 0.0;
  return h;
}

// ---------------------------------------------------------------------------
// Streamline distances

std::vector<Vec3> resample(std::span<const Vec3> s, std::size_t k) {
  if (s.size() < 2) throw ParameterError("resample needs at least two points");
  if (k < 2) throw ParameterError("resample needs K >= 2");
  std::vector<double> cum(s.size(), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i) cum[i] = cum[i - 1] + distance(s[i - 1], s[i]);
  const double total = cum.back();
  if (!(total > 0.0)) throw ParameterError("cannot resample a streamline whose points all coincide");

  std::vector<Vec3> out(k);
  out.front() = s.front();
  out.back() = s.back();
  std::size_t seg = 1;
  for (std::size_t j = 1; j + 1 < k; ++j) {
    const double target = total * static_cast<double>(j) / static_cast<double>(k - 1);
    while (seg + 1 < s.size() && cum[seg] < target) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double t = len > 0.0 ? (target - cum[seg - 1]) / len : 0.0;
    out[j] = s[seg - 1] + (s[seg] - s[seg - 1]) * t;
  }
  return out;
}

namespace {

double mean_direct(std::span<const Vec3> a, std::span<const Vec3> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += distance(a[i], b[i]);
  return acc / static_cast<double>(a.size());
}

double mean_flipped(std::span<const Vec3> a, std::span<const Vec3> b) {
  double acc = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) acc += distance(a[i], b[n - 1 - i]);
  return acc / static_cast<double>(n);
}

} // namespace

double mdf_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) throw ParameterError("MDF needs equal point counts");
  if (a.empty()) throw ParameterError("MDF needs non-empty point sequences");
  return std::min(mean_direct(a, b), mean_flipped(a, b));
}

std::vector<Cluster> quickbundles(std::span<const Streamline> streamlines, double threshold, std::size_t k) {
  if (!(threshold > 0.0)) throw ParameterError("QuickBundles threshold must be positive");
  if (k < 2) throw ParameterError("QuickBundles needs K >= 2");

  std::vector<Cluster> clusters;
  std::vector<std::vector<Vec3>> sums;
  for (std::size_t idx = 0; idx < streamlines.size(); ++idx) {
    const auto& s = streamlines[idx];
    std::vector<Vec3> pts;
    const bool degenerate = s.size() < 2 || std::all_of(s.begin(), s.end(), [&](const Vec3& p) { return p == s[0]; });
    if (s.empty()) throw ParameterError("cannot cluster an empty streamline");
    pts = degenerate ? std::vector<Vec3>(k, s[0]) : resample(s, k);

    std::size_t best = clusters.size();
    double best_d = std::numeric_limits<double>::infinity();
    bool best_flip = false;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const double direct = mean_direct(pts, clusters[c].centroid);
      const double flipped = mean_flipped(pts, clusters[c].centroid);
      const double d = std::min(direct, flipped);
      if (d < best_d) {
        best_d = d;
        best = c;
        best_flip = flipped < direct;
      }
    }

    if (best < clusters.size() && best_d < threshold) {
      if (best_flip) std::reverse(pts.begin(), pts.end());
      auto& cl = clusters[best];
      cl.members.push_back(idx);
      const double n = static_cast<double>(cl.members.size());
      for (std::size_t i = 0; i < k; ++i) {
        sums[best][i] += pts[i];
        cl.centroid[i] = sums[best][i] / n;
      }
    } else {
      Cluster cl;
      cl.id = clusters.size();
      cl.members.push_back(idx);
      cl.centroid = pts;
      clusters.push_back(std::move(cl));
      sums.push_back(std::move(pts));
    }
  }
  return clusters;
}

std::vector<ParamHistogram> per_cluster_histograms(std::span<const TrackingRecord> records,
                                                   std::span<const Cluster> clusters, ParamName param,
                                                   std::size_t n_bins, std::pair<double, double> range) {
  std::vector<std::size_t> record_of;
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].streamline_index) continue;
    const std::size_t s = *records[i].streamline_index;
    if (s >= record_of.size()) record_of.resize(s + 1, kNone);
    record_of[s] = i;
  }

  std::vector<ParamHistogram> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    std::vector<std::size_t> subset;
    subset.reserve(c.members.size());
    for (std::size_t m : c.members) {
      if (m >= record_of.size() || record_of[m] == kNone)
        throw ConsistencyError("cluster " + std::to_string(c.id) + " member " + std::to_string(m) +
                               " has no tracking record with that streamline_index");
      subset.push_back(record_of[m]);
    }
    out.push_back(histogram(records, param, n_bins, range, subset));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Range refinement

RangeSuggestion suggest_ranges(const ParamHistogram& hist, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ParameterError("keep fraction must be in (0, 1]");
  const std::size_t n = hist.bins();
  const std::size_t total = hist.total_accepted();
  if (total == 0)
    throw RefinementError("no accepted streamlines in the " + std::string(param_name(hist.param)) +
                          " histogram; nothing to refine from");

  std::vector<std::size_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + hist.accepted_counts[i];
  const double need = keep_fraction * static_cast<double>(total) - 1e-9 * static_cast<double>(total);

  for (std::size_t width = 1; width <= n; ++width) {
    std::optional<std::size_t> best;
    double best_rate = -1.0;
    for (std::size_t start = 0; start + width <= n; ++start) {
      const auto mass = static_cast<double>(prefix[start + width] - prefix[start]);
      if (mass < need) continue;
      double rate = 0.0;
      for (std::size_t i = start; i < start + width; ++i) rate += hist.acceptance_rate[i];
      rate /= static_cast<double>(width);
      if (rate > best_rate) {
        best_rate = rate;
        best = start;
      }
    }
    if (best) {
      RangeSuggestion r;
      r.param = hist.param;
      r.suggested_min = std::max(hist.bin_edges[*best], hist.range.first);
      r.suggested_max = std::min(hist.bin_edges[*best + width], hist.range.second);
      r.support_fraction =
          static_cast<double>(prefix[*best + width] - prefix[*best]) / static_cast<double>(total);
      return r;
    }
  }
  // Unreachable: the full range always holds all accepted mass.
  throw RefinementError("no bin interval reaches the requested keep fraction");
}

} // namespace sspt
