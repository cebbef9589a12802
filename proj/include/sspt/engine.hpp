// SPDX-License-Identifier: Apache-2.0
//
// Streamline-specific parameter tracking: every attempt draws its own step
// size, radius of curvature (hence cone angle) and FOD threshold, tracks
// bidirectionally from a random seed and reports what happened in a
// TrackingRecord whether or not a streamline came out of it.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sspt/fod.hpp"
#include "sspt/geometry.hpp"
#include "sspt/rng.hpp"
#include "sspt/roi.hpp"

namespace sspt {

/// Tracking constants shared by every streamline of a run.
struct FixedParams {
  int sh_resolution = 4;        // sphere subdivisions
  int backtrack_lim = 64;       // shared by both halves of a streamline
  int intermediate_steps = 4;   // FOD evaluations along each candidate step
  int n_samples = 4;            // cone draws per step
  int seed_samples = 32;        // sphere draws for the initial direction
  double fod_threshold_default = 0.1;

  void validate() const;
};

/// Sampling ranges for the per-streamline parameters plus run-level limits.
struct ParameterRanges {
  double step_min = 0.5;
  double step_max = 0.5;
  double radius_min = 2.0;
  double radius_max = 100.0;
  double threshold_min = 0.1;
  double threshold_max = 0.1;
  double min_length = 0.0;
  double max_length = 250.0;
  std::size_t target_streamlines = 1000;
  /// Attempt cap; 0 means 1000 * target_streamlines.
  std::size_t max_seeds = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::size_t effective_max_seeds() const { return max_seeds ? max_seeds : 1000 * target_streamlines; }
  /// Cone angles reachable from the step and radius ranges.
  std::pair<double, double> cone_angle_range() const;
};

struct ParameterSample {
  double step_size = 0.0;
  double radius = 0.0;
  double cone_angle = 0.0;
  double fod_threshold = 0.0;

  bool operator==(const ParameterSample&) const = default;
};

enum class FailureFlag : std::uint8_t {
  NoValidStartDirection = 1u << 0,
  BacktrackExhausted = 1u << 1,
  ExclusionTerminated = 1u << 2,
  MaxLengthExceeded = 1u << 3,
  TooShort = 1u << 4,
  MissedInclusion = 1u << 5,
};

inline constexpr std::array<FailureFlag, 6> kAllFailureFlags = {
    FailureFlag::NoValidStartDirection, FailureFlag::BacktrackExhausted, FailureFlag::ExclusionTerminated,
    FailureFlag::MaxLengthExceeded,     FailureFlag::TooShort,           FailureFlag::MissedInclusion};

std::string_view flag_name(FailureFlag f);
std::optional<FailureFlag> flag_from_name(std::string_view name);

class FailureFlags {
public:
  constexpr FailureFlags() = default;
  constexpr FailureFlags(std::initializer_list<FailureFlag> flags) {
    for (auto f : flags) set(f);
  }
  constexpr void set(FailureFlag f) { bits_ |= static_cast<std::uint8_t>(f); }
  constexpr bool has(FailureFlag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool operator==(const FailureFlags&) const = default;
  /// Set flags in declaration order.
  std::vector<FailureFlag> list() const;

private:
  std::uint8_t bits_ = 0;
};

using Streamline = std::vector<Vec3>;
using Tractogram = std::vector<Streamline>;

struct TrackingRecord {
  Vec3 seed_pos;
  ParameterSample params;
  bool accepted = false;
  FailureFlags flags;
  int n_backtracks = 0;
  std::size_t n_points = 0;
  std::int64_t duration_us = 0;
  std::optional<std::size_t> streamline_index;

  bool operator==(const TrackingRecord&) const = default;
};

/// Shared read-only inputs of every attempt.
struct TrackingContext {
  const FodEvaluator& fod;
  const RoiSet& rois;
  FixedParams fixed{};
};

ParameterSample sample_parameters(const ParameterRanges& ranges, Rng& rng);

/// Amplitude-weighted choice among `seed_samples` sphere draws that pass the
/// threshold at `pos`; nullopt when none does.
std::optional<Vec3> initial_direction(const TrackingContext& ctx, const Vec3& pos, const ParameterSample& params,
                                      Rng& rng);

struct CandidateSet {
  static constexpr std::size_t kCapacity = 32;
  std::array<Vec3, kCapacity> directions{};
  std::array<double, kCapacity> weights{};
  std::size_t count = 0;

  bool empty() const { return count == 0; }
};

/// Cone draws around `d`; a draw survives iff the FOD exceeds the threshold at
/// every intermediate point of the straight step, and is weighted by the
/// product of those amplitudes.
CandidateSet candidate_step(const TrackingContext& ctx, const Vec3& p, const Vec3& d, const ParameterSample& params,
                            Rng& rng);

/// Categorical draw proportional to weights; throws ParameterError on empty
/// or mismatched input.
Vec3 choose_direction(std::span<const Vec3> candidates, std::span<const double> weights, Rng& rng);

/// Backtracking allowance shared by both halves of one streamline.
struct BacktrackBudget {
  int used = 0;
  int limit = 64;

  bool try_consume() {
    if (used >= limit) return false;
    ++used;
    return true;
  }
};

enum class HalfEnd {
  Ended,               // ran out of valid directions with a point beyond the seed
  MaxLengthExceeded,
  ExclusionTerminated,
  BacktrackExhausted,  // never got past the seed
};

struct HalfResult {
  std::vector<Vec3> points;      // points[0] is the seed
  std::vector<Vec3> directions;  // incoming direction of each point; directions[0] is d0
  HalfEnd end = HalfEnd::Ended;
};

/// Tracks from `seed` along `d0` until stuck, excluded or out of length.
/// `prior_segments` counts segments already spent by the other half against
/// the shared max_length.
HalfResult track_half(const TrackingContext& ctx, const Vec3& seed, const Vec3& d0, const ParameterSample& params,
                      double max_length, std::size_t prior_segments, BacktrackBudget& budget, Rng& rng);

struct Attempt {
  TrackingRecord record;
  std::optional<Streamline> streamline;
};

/// One seed attempt: sample parameters and seed, track both halves, decide.
Attempt track_streamline(const TrackingContext& ctx, const ParameterRanges& ranges, Rng& rng);

/// Acceptance predicate recomputed from a finished streamline: length within
/// [min_length, max_length) and inclusion regions satisfied.
bool satisfies_acceptance(const Streamline& s, const RoiSet& rois, const ParameterSample& params,
                          const ParameterRanges& ranges);

double streamline_length(const Streamline& s, double step_size);

struct RunOptions {
  std::uint64_t seed = 0;
  int threads = 0;  // 0: OpenMP default
};

struct RunResult {
  Tractogram streamlines;
  std::vector<TrackingRecord> records;
};

/// Attempts seeds until `target_streamlines` are accepted or the seed cap is
/// hit. Attempt i draws from Rng(seed, i), so output depends only on the
/// configuration and the seed, never on the thread count.
RunResult run(const TrackingContext& ctx, const ParameterRanges& ranges, const RunOptions& options);

/// Single-threaded reference for `run`.
RunResult run_serial(const TrackingContext& ctx, const ParameterRanges& ranges, std::uint64_t seed);

} // namespace sspt
