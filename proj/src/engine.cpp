// SPDX-License-Identifier: Apache-2.0
#include "sspt/engine.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "sspt/error.hpp"

namespace sspt {

// ---------------------------------------------------------------------------
// Configuration

void FixedParams::validate() const {
  if (sh_resolution < 0 || sh_resolution > DiscretizedSphere::kMaxLevel)
    throw ConfigError("sh_resolution must be in [0, 7]");
  if (backtrack_lim < 0) throw ConfigError("backtrack_lim must be non-negative");
  if (intermediate_steps < 1) throw ConfigError("intermediate_steps must be at least 1");
  if (n_samples < 1 || static_cast<std::size_t>(n_samples) > CandidateSet::kCapacity)
    throw ConfigError("n_samples must be in [1, 32]");
  if (seed_samples < 1) throw ConfigError("seed_samples must be at least 1");
  if (!(fod_threshold_default >= 0.0)) throw ConfigError("fod_threshold must be non-negative");
}

namespace {

void require_range(const char* name, double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError(std::string(name) + ": range must be finite");
  if (lo > hi)
    throw ConfigError(std::string(name) + ": minimum " + std::to_string(lo) + " exceeds maximum " +
                      std::to_string(hi));
}

} // namespace

void ParameterRanges::validate() const {
  require_range("step", step_min, step_max);
  require_range("radius", radius_min, radius_max);
  require_range("fod-threshold", threshold_min, threshold_max);
  if (!(step_min > 0.0)) throw ConfigError("step: minimum must be positive");
  if (step_max > radius_min)
    throw ConfigError("radius: minimum " + std::to_string(radius_min) + " is below the maximum step " +
                      std::to_string(step_max) + " (cone angle undefined)");
  if (threshold_min < 0.0) throw ConfigError("fod-threshold: must be non-negative");
  if (!std::isfinite(min_length) || min_length < 0.0) throw ConfigError("min-length: must be non-negative");
  if (!std::isfinite(max_length) || !(max_length > min_length))
    throw ConfigError("max-length: must be finite and greater than min-length");
}

std::pair<double, double> ParameterRanges::cone_angle_range() const {
  return {cone_angle_from_radius(step_min, radius_max), cone_angle_from_radius(step_max, radius_min)};
}

// ---------------------------------------------------------------------------
// Flags

std::string_view flag_name(FailureFlag f) {
  switch (f) {
  case FailureFlag::NoValidStartDirection: return "NoValidStartDirection";
  case FailureFlag::BacktrackExhausted: return "BacktrackExhausted";
  case FailureFlag::ExclusionTerminated: return "ExclusionTerminated";
  case FailureFlag::MaxLengthExceeded: return "MaxLengthExceeded";
  case FailureFlag::TooShort: return "TooShort";
  case FailureFlag::MissedInclusion: return "MissedInclusion";
  }
  return "Unknown";
}

std::optional<FailureFlag> flag_from_name(std::string_view name) {
  for (auto f : kAllFailureFlags)
    if (flag_name(f) == name) return f;
  return std::nullopt;
}

std::vector<FailureFlag> FailureFlags::list() const {
  std::vector<FailureFlag> out;
  for (auto f : kAllFailureFlags)
    if (has(f)) out.push_back(f);
  return out;
}

// ---------------------------------------------------------------------------
// Per-step primitives

ParameterSample sample_parameters(const ParameterRanges& ranges, Rng& rng) {
  ParameterSample s;
  s.step_size = rng.uniform(ranges.step_min, ranges.step_max);
  s.radius = rng.uniform(ranges.radius_min, ranges.radius_max);
  s.fod_threshold = rng.uniform(ranges.threshold_min, ranges.threshold_max);
  s.cone_angle = cone_angle_from_radius(s.step_size, s.radius);
  return s;
}

std::optional<Vec3> initial_direction(const TrackingContext& ctx, const Vec3& pos, const ParameterSample& params,
                                      Rng& rng) {
  const auto& fod = ctx.fod;
  const std::vector<double> coeffs = interpolate_coeffs(fod.image(), pos);
  std::vector<Vec3> dirs;
  std::vector<double> weights;
  for (int i = 0; i < ctx.fixed.seed_samples; ++i) {
    const Vec3 d = sample_direction_uniform_sphere(rng);
    const double amp = fod.project(coeffs, fod.sphere().nearest(d));
    if (amp > params.fod_threshold) {
      dirs.push_back(d);
      weights.push_back(amp);
    }
  }
  if (dirs.empty()) return std::nullopt;
  return choose_direction(dirs, weights, rng);
}

CandidateSet candidate_step(const TrackingContext& ctx, const Vec3& p, const Vec3& d, const ParameterSample& params,
                            Rng& rng) {
  CandidateSet out;
  const auto& fod = ctx.fod;
  const int k_steps = ctx.fixed.intermediate_steps;
  for (int s = 0; s < ctx.fixed.n_samples; ++s) {
    const Vec3 dir = sample_direction_in_cone(d, params.cone_angle, rng);
    const std::uint32_t vertex = fod.sphere().nearest(dir);
    if (ctx.rois.tracking_mask && !contains(*ctx.rois.tracking_mask, p + dir * params.step_size)) continue;
    double weight = 1.0;
    bool valid = true;
    for (int k = 1; k <= k_steps; ++k) {
      const Vec3 x = p + dir * (params.step_size * (static_cast<double>(k) / k_steps));
      const double amp = fod.eval_vertex(x, vertex);
      if (!(amp > params.fod_threshold)) {
        valid = false;
        break;
      }
      weight *= amp;
    }
    if (valid) {
      out.directions[out.count] = dir;
      out.weights[out.count] = weight;
      ++out.count;
    }
  }
  return out;
}

Vec3 choose_direction(std::span<const Vec3> candidates, std::span<const double> weights, Rng& rng) {
  if (candidates.empty() || candidates.size() != weights.size())
    throw ParameterError("choose_direction needs equally many candidates and weights, at least one");
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    acc += weights[i];
    if (u < acc) return candidates[i];
  }
  return candidates.back();
}

// ---------------------------------------------------------------------------
// Tracking

HalfResult track_half(const TrackingContext& ctx, const Vec3& seed, const Vec3& d0, const ParameterSample& params,
                      double max_length, std::size_t prior_segments, BacktrackBudget& budget, Rng& rng) {
  HalfResult half;
  half.points.push_back(seed);
  half.directions.push_back(d0);
  bool advanced = false;

  for (;;) {
    const auto segments = static_cast<double>(prior_segments + half.points.size() - 1);
    if (segments * params.step_size >= max_length) {
      half.end = HalfEnd::MaxLengthExceeded;
      return half;
    }

    const CandidateSet cands = candidate_step(ctx, half.points.back(), half.directions.back(), params, rng);
    if (cands.empty()) {
      if (!budget.try_consume()) {
        half.end = advanced ? HalfEnd::Ended : HalfEnd::BacktrackExhausted;
        return half;
      }
      // One step back; at the seed there is nothing to remove, so the retry
      // happens in place.
      if (half.points.size() > 1) {
        half.points.pop_back();
        half.directions.pop_back();
      }
      continue;
    }

    const Vec3 dir = choose_direction({cands.directions.data(), cands.count}, {cands.weights.data(), cands.count}, rng);
    const Vec3 next = half.points.back() + dir * params.step_size;

    if (in_exclusion(ctx.rois, next)) {
      if (!budget.try_consume()) {
        half.end = HalfEnd::ExclusionTerminated;
        return half;
      }
      continue;
    }
    half.points.push_back(next);
    half.directions.push_back(dir);
    advanced = true;
  }
}

double streamline_length(const Streamline& s, double step_size) {
  return s.empty() ? 0.0 : static_cast<double>(s.size() - 1) * step_size;
}

bool satisfies_acceptance(const Streamline& s, const RoiSet& rois, const ParameterSample& params,
                          const ParameterRanges& ranges) {
  if (s.size() < 2) return false;
  const double len = streamline_length(s, params.step_size);
  if (len < ranges.min_length || len >= ranges.max_length) return false;
  for (const auto& p : s)
    if (in_exclusion(rois, p)) return false;
  return is_satisfied(status_of(rois, s), rois);
}

Attempt track_streamline(const TrackingContext& ctx, const ParameterRanges& ranges, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  Attempt out;
  auto& rec = out.record;
  auto finish = [&]() {
    rec.accepted = rec.flags.empty();
    rec.duration_us =
        std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start).count();
  };

  rec.params = sample_parameters(ranges, rng);
  rec.seed_pos = sample_seed(ctx.rois.seed, rng);
  const Vec3 seed = rec.seed_pos;

  const auto d0 = initial_direction(ctx, seed, rec.params, rng);
  if (!d0) {
    rec.flags.set(FailureFlag::NoValidStartDirection);
    rec.n_points = 1;
    finish();
    return out;
  }

  BacktrackBudget budget{0, ctx.fixed.backtrack_lim};
  HalfResult a = track_half(ctx, seed, *d0, rec.params, ranges.max_length, 0, budget, rng);
  std::optional<HalfResult> b;
  if (a.end != HalfEnd::ExclusionTerminated && a.end != HalfEnd::MaxLengthExceeded) {
    // Continue from the seed opposite to the first step actually kept, so the
    // junction at the seed respects the cone angle.
    const Vec3 back = a.points.size() > 1 ? -a.directions[1] : -*d0;
    b = track_half(ctx, seed, back, rec.params, ranges.max_length, a.points.size() - 1, budget, rng);
  }

  Streamline merged;
  if (b) {
    merged.reserve(a.points.size() + b->points.size() - 1);
    merged.assign(b->points.rbegin(), b->points.rend());
  } else {
    merged.push_back(seed);
  }
  merged.insert(merged.end(), a.points.begin() + 1, a.points.end());

  rec.n_backtracks = budget.used;
  rec.n_points = merged.size();

  auto ended = [&](HalfEnd e) { return a.end == e || (b && b->end == e); };
  if (ended(HalfEnd::ExclusionTerminated)) rec.flags.set(FailureFlag::ExclusionTerminated);
  if (ended(HalfEnd::MaxLengthExceeded)) rec.flags.set(FailureFlag::MaxLengthExceeded);
  if (merged.size() < 2) rec.flags.set(FailureFlag::BacktrackExhausted);

  // Length and inclusion are only judged on streamlines that finished tracking.
  if (rec.flags.empty()) {
    if (streamline_length(merged, rec.params.step_size) < ranges.min_length) rec.flags.set(FailureFlag::TooShort);
    if (!is_satisfied(status_of(ctx.rois, merged), ctx.rois)) rec.flags.set(FailureFlag::MissedInclusion);
  }

  finish();
  if (rec.accepted) out.streamline = std::move(merged);
  return out;
}

} // namespace sspt
