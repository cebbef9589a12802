// SPDX-License-Identifier: Apache-2.0
//
// Attempt loop. Attempts are independent; the parallel version runs them in
// fixed-size batches so that every attempt up to the one completing the target
// has been executed, and assembles results in attempt order.
#include <algorithm>
#include <exception>

#include <omp.h>

#include "sspt/engine.hpp"
#include "sspt/error.hpp"

namespace sspt {

namespace {

void check_inputs(const TrackingContext& ctx, const ParameterRanges& ranges) {
  ranges.validate();
  ctx.fixed.validate();
  if (ctx.rois.seed.nonzero().empty()) throw ConfigError("seed mask has no nonzero voxels");
}

// Appends one attempt; returns true once the target is reached.
bool append(RunResult& out, Attempt&& a, std::size_t target) {
  if (a.record.accepted) {
    a.record.streamline_index = out.streamlines.size();
    out.streamlines.push_back(std::move(*a.streamline));
  }
  out.records.push_back(a.record);
  return out.streamlines.size() >= target;
}

} // namespace

RunResult run_serial(const TrackingContext& ctx, const ParameterRanges& ranges, std::uint64_t seed) {
  check_inputs(ctx, ranges);
  RunResult out;
  const std::size_t target = ranges.target_streamlines;
  if (target == 0) return out;
  const std::size_t cap = ranges.effective_max_seeds();
  for (std::size_t i = 0; i < cap; ++i) {
    Rng rng(seed, i);
    if (append(out, track_streamline(ctx, ranges, rng), target)) break;
  }
  return out;
}

RunResult run(const TrackingContext& ctx, const ParameterRanges& ranges, const RunOptions& options) {
  check_inputs(ctx, ranges);
  RunResult out;
  const std::size_t target = ranges.target_streamlines;
  if (target == 0) return out;
  const std::size_t cap = ranges.effective_max_seeds();
  const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
  const std::size_t batch = std::max<std::size_t>(64, static_cast<std::size_t>(threads) * 32);

  std::vector<Attempt> results;
  std::exception_ptr failure;
  bool done = false;
  for (std::size_t start = 0; start < cap && !done; start += batch) {
    const auto n = static_cast<std::ptrdiff_t>(std::min(batch, cap - start));
    results.assign(static_cast<std::size_t>(n), Attempt{});

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        Rng rng(options.seed, start + static_cast<std::size_t>(i));
        results[static_cast<std::size_t>(i)] = track_streamline(ctx, ranges, rng);
      } catch (...) {
#pragma omp critical(sspt_run_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);

    for (auto& a : results) {
      if (append(out, std::move(a), target)) {
        done = true;
        break;
      }
    }
  }
  return out;
}

} // namespace sspt
