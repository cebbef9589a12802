// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "oracles.hpp"
#include "sspt/error.hpp"
#include "sspt/engine.hpp"
#include "sspt/phantom.hpp"

using namespace sspt;

namespace {

struct World {
  Phantom ph;
  DiscretizedSphere sphere;
  ShBasis basis;
  FodEvaluator fod;
  TrackingContext ctx;

  explicit World(Phantom p)
      : ph(std::move(p)), sphere(subdivide_icosahedron(4)), basis(sphere, ph.fod.lmax()),
        fod(ph.fod, sphere, basis), ctx{fod, ph.rois, FixedParams{}} {}
};

BinaryMask full_mask(std::array<int, 3> dims, const Affine& a) {
  return BinaryMask(dims, a, std::vector<std::uint8_t>(std::size_t(dims[0]) * dims[1] * dims[2], 1));
}

BinaryMask single(std::array<int, 3> dims, const Affine& a, int i, int j, int k) {
  BinaryMask m(dims, a);
  m.set(i, j, k, true);
  return m;
}

/// Field whose l=0 coefficient is `value(i,j,k)`; every other coefficient zero.
template <class F>
FodImage isotropic_field(std::array<int, 3> dims, int lmax, F value) {
  FodImage img(dims, sh_count(lmax), Affine());
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) img.voxel(i, j, k)[0] = static_cast<float>(value(i, j, k));
  return img;
}

std::unique_ptr<World> isotropic_world(std::array<int, 3> dims, double c0, std::vector<BinaryMask> exclude = {}) {
  auto img = isotropic_field(dims, 2, [&](int, int, int) { return c0; });
  RoiSet rois{full_mask(dims, Affine()), {}, {}, std::move(exclude), std::nullopt};
  return std::make_unique<World>(Phantom{std::move(img), std::move(rois)});
}

const World& straight_world() {
  static const World w(generate(default_phantom(PhantomKind::Straight)));
  return w;
}

const World& arc_world() {
  static const World w(generate(default_phantom(PhantomKind::Arc)));
  return w;
}

ParameterSample fixed_sample(double step, double radius, double threshold = 0.1) {
  return {step, radius, cone_angle_from_radius(step, radius), threshold};
}

TrackingRecord without_timing(TrackingRecord r) {
  r.duration_us = 0;
  return r;
}

} // namespace

TEST_CASE("fixed tracking parameters default to the published table") {
  const FixedParams f;
  CHECK(f.sh_resolution == 4);
  CHECK(f.backtrack_lim == 64);
  CHECK(f.intermediate_steps == 4);
  CHECK(f.n_samples == 4);
  CHECK(f.seed_samples == 32);
  CHECK(f.fod_threshold_default == 0.1);
  CHECK_NOTHROW(f.validate());
  FixedParams bad;
  bad.n_samples = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("parameter range validation") {
  ParameterRanges r;
  CHECK_NOTHROW(r.validate());
  auto expect_error = [](ParameterRanges bad, const char* field) {
    try {
      bad.validate();
      FAIL("expected ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) == 0);
    }
  };
  r.step_min = 0.6;
  r.step_max = 0.4;
  expect_error(r, "step");
  r = {};
  r.step_min = 0.0;
  expect_error(r, "step");
  r = {};
  r.step_max = 3.0;
  r.radius_min = 2.0;
  expect_error(r, "radius");
  r = {};
  r.radius_min = 5;
  r.radius_max = 4;
  expect_error(r, "radius");
  r = {};
  r.min_length = 10;
  r.max_length = 10;
  expect_error(r, "max-length");
  r = {};
  r.min_length = -1;
  expect_error(r, "min-length");
  r = {};
  r.threshold_min = 0.3;
  r.threshold_max = 0.2;
  expect_error(r, "fod-threshold");
}

TEST_CASE("degenerate ranges give a deterministic sample") {
  ParameterRanges r;
  r.step_min = r.step_max = 0.5;
  r.radius_min = r.radius_max = 2.0;
  r.threshold_min = r.threshold_max = 0.15;
  Rng rng(1);
  const auto first = sample_parameters(r, rng);
  CHECK(first == ParameterSample{0.5, 2.0, 2.0 * std::asin(0.25), 0.15});
  for (int t = 0; t < 100; ++t) CHECK(sample_parameters(r, rng) == first);
}

TEST_CASE("cone angles follow from the sampled step and radius") {
  ParameterRanges r;
  r.step_min = 0.4;
  r.step_max = 0.6;
  r.radius_min = 0.75;
  r.radius_max = 1.0;
  r.threshold_min = 0.05;
  r.threshold_max = 0.2;
  const auto [lo, hi] = r.cone_angle_range();
  CHECK(lo == doctest::Approx(0.823).epsilon(1e-3));
  CHECK(hi == doctest::Approx(1.855).epsilon(1e-3));
  Rng rng(2);
  double step_sum = 0.0, radius_sum = 0.0, thr_sum = 0.0;
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    const auto s = sample_parameters(r, rng);
    REQUIRE(s.step_size >= 0.4);
    REQUIRE(s.step_size <= 0.6);
    REQUIRE(s.radius >= 0.75);
    REQUIRE(s.radius <= 1.0);
    REQUIRE(s.cone_angle == 2.0 * std::asin(s.step_size / s.radius));
    REQUIRE(s.cone_angle >= lo - 1e-12);
    REQUIRE(s.cone_angle <= hi + 1e-12);
    step_sum += s.step_size;
    radius_sum += s.radius;
    thr_sum += s.fod_threshold;
  }
  CHECK(step_sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(radius_sum / n == doctest::Approx(0.875).epsilon(0.01));
  CHECK(thr_sum / n == doctest::Approx(0.125).epsilon(0.01));
}

TEST_CASE("initial direction in a zero field is always none") {
  const auto w = isotropic_world({4, 4, 4}, 0.0);
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) CHECK_FALSE(initial_direction(w->ctx, {1.5, 1.5, 1.5}, fixed_sample(0.5, 2.0), rng));
}

TEST_CASE("initial direction in an isotropic field always exists") {
  const auto w = isotropic_world({4, 4, 4}, 1.0);
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const auto d = initial_direction(w->ctx, {1.5, 1.5, 1.5}, fixed_sample(0.5, 2.0), rng);
    REQUIRE(d);
    REQUIRE(std::abs(d->norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("initial direction follows a single-fiber lobe") {
  auto spec = default_phantom(PhantomKind::Straight);
  spec.kappa = 10.0;
  spec.peak_amplitude = 1.0;
  const World w(generate(spec));
  const auto d = w.ph.fod.dims();
  const Vec3 center{(d[0] - 1) / 2.0, (d[1] - 1) / 2.0, (d[2] - 1) / 2.0};
  Rng rng(5);
  int aligned = 0, found = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto dir = initial_direction(w.ctx, center, fixed_sample(0.5, 2.0), rng);
    if (!dir) continue;
    ++found;
    aligned += std::abs(dir->y) >= std::cos(std::numbers::pi / 6.0);
  }
  CHECK(aligned >= 950);
  CHECK(found >= 950);
}

TEST_CASE("candidate step in a zero field is empty") {
  const auto w = isotropic_world({4, 4, 4}, 0.0);
  Rng rng(6);
  CHECK(candidate_step(w->ctx, {1.5, 1.5, 1.5}, {0, 1, 0}, fixed_sample(0.5, 2.0), rng).empty());
}

TEST_CASE("candidate weights are the product of four amplitudes") {
  const auto w = isotropic_world({6, 6, 6}, 1.0);
  Rng rng(7);
  const double a = 0.5 / std::sqrt(std::numbers::pi);
  for (int t = 0; t < 100; ++t) {
    const auto c = candidate_step(w->ctx, {2.5, 2.5, 2.5}, {0, 1, 0}, fixed_sample(0.5, 1.0), rng);
    REQUIRE(c.count == 4);
    for (std::size_t i = 0; i < c.count; ++i) {
      CHECK(c.weights[i] == doctest::Approx(std::pow(a, 4)).epsilon(1e-9));
      CHECK(c.weights[i] == doctest::Approx(6.33e-3).epsilon(1e-3));
      CHECK(c.directions[i].y >= std::cos(std::numbers::pi / 3.0) - 1e-12);
    }
  }
}

TEST_CASE("candidate weights replay against the oracle on a phantom") {
  const auto& w = arc_world();
  oracle::Gen gen(8);
  Rng rng(9);
  const auto dims = w.ph.fod.dims();
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    Vec3 p;
    std::vector<Vec3> fibers;
    while (fibers.empty()) {
      p = {gen.uniform(0, dims[0] - 1), gen.uniform(0, dims[1] - 1), gen.uniform(0, dims[2] - 1)};
      fibers = fiber_directions_at(default_phantom(PhantomKind::Arc), p);
    }
    const auto params = fixed_sample(gen.uniform(0.3, 0.8), gen.uniform(1.0, 10.0));
    const auto c = candidate_step(w.ctx, p, fibers.front(), params, rng);
    for (std::size_t i = 0; i < c.count; ++i) {
      double prod = 1.0;
      for (int k = 1; k <= 4; ++k) {
        const double amp = oracle::eval_fod(w.ph.fod, w.sphere, p + c.directions[i] * (k / 4.0 * params.step_size),
                                            c.directions[i]);
        CHECK(amp > params.fod_threshold - 1e-9);
        prod *= amp;
      }
      CHECK(c.weights[i] == doctest::Approx(prod).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("a candidate failing at the third intermediate point is rejected") {
  // Step 4 along +y from y=0 probes y = 1, 2, 3, 4 exactly at voxel centers.
  auto make = [](bool third_passes) {
    auto img = isotropic_field({3, 6, 3}, 0, [&](int, int j, int) { return (j == 3 && !third_passes) ? 0.0 : 1.0; });
    RoiSet rois{full_mask({3, 6, 3}, Affine()), {}, {}, {}, std::nullopt};
    return std::make_unique<World>(Phantom{std::move(img), std::move(rois)});
  };
  const auto params = fixed_sample(4.0, 1e7);
  Rng rng(10);
  const auto blocked = make(false);
  CHECK(candidate_step(blocked->ctx, {1, 0, 1}, {0, 1, 0}, params, rng).empty());
  const auto open = make(true);
  CHECK(candidate_step(open->ctx, {1, 0, 1}, {0, 1, 0}, params, rng).count == 4);
}

TEST_CASE("choose_direction examples") {
  Rng rng(11);
  const std::vector<Vec3> one{{0, 0, 1}};
  const std::vector<double> w1{0.3};
  for (int t = 0; t < 100; ++t) CHECK(choose_direction(one, w1, rng) == Vec3{0, 0, 1});

  const std::vector<Vec3> two{{1, 0, 0}, {0, 1, 0}};
  const std::vector<double> w31{3.0, 1.0};
  int first = 0;
  for (int t = 0; t < 100000; ++t) first += choose_direction(two, w31, rng) == Vec3{1, 0, 0};
  CHECK(std::abs(first - 75000) <= 450);

  CHECK_THROWS_AS(choose_direction({}, {}, rng), ParameterError);
  CHECK_THROWS_AS(choose_direction(two, w1, rng), ParameterError);
}

TEST_CASE("choose_direction with equal weights passes a chi-square test") {
  Rng rng(12);
  const std::vector<Vec3> four{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, 0, 0}};
  const std::vector<double> w(4, 0.25);
  std::array<int, 4> counts{};
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    const Vec3 d = choose_direction(four, w, rng);
    for (std::size_t i = 0; i < 4; ++i) counts[i] += d == four[i];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
  // 0.999 quantile of chi-square with 3 degrees of freedom.
  CHECK(chi2 < 16.266);
}

TEST_CASE("half reaches the end of a straight bundle") {
  const auto& w = straight_world();
  const auto d = w.ph.fod.dims();
  const Vec3 center{(d[0] - 1) / 2.0, (d[1] - 1) / 2.0, (d[2] - 1) / 2.0};
  const double to_edge = (d[1] - 1) - center.y;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(13, s);
    BacktrackBudget budget;
    const auto params = fixed_sample(0.5, 100.0);
    const auto half = track_half(w.ctx, center, {0, 1, 0}, params, 250.0, 0, budget, rng);
    CHECK(half.end == HalfEnd::Ended);
    const double segments = static_cast<double>(half.points.size() - 1);
    CHECK(std::abs(segments - to_edge / params.step_size) <= 1.0);
  }
}

TEST_CASE("exclusion one step ahead with no backtrack budget terminates at the seed") {
  const std::array<int, 3> dims{5, 5, 5};
  const auto w = isotropic_world(dims, 1.0, {single(dims, Affine(), 2, 3, 2)});
  Rng rng(14);
  BacktrackBudget budget{0, 0};
  const auto half = track_half(w->ctx, {2, 2, 2}, {0, 1, 0}, fixed_sample(1.0, 1e7), 250.0, 0, budget, rng);
  CHECK(half.end == HalfEnd::ExclusionTerminated);
  CHECK(half.points.size() == 1);
}

TEST_CASE("an excluded step is removed and nothing before it") {
  const std::array<int, 3> dims{5, 8, 5};
  BinaryMask ex(dims, Affine());
  for (int k = 0; k < 5; ++k)
    for (int i = 0; i < 5; ++i) ex.set(i, 4, k, true);
  const auto w = isotropic_world(dims, 1.0, {ex});
  for (int limit : {0, 1, 5, 64}) {
    Rng rng(15);
    BacktrackBudget budget{0, limit};
    const auto half = track_half(w->ctx, {2, 1, 2}, {0, 1, 0}, fixed_sample(1.0, 1e7), 250.0, 0, budget, rng);
    CHECK(half.end == HalfEnd::ExclusionTerminated);
    CHECK(budget.used == limit);
    REQUIRE(half.points.size() == 3);
    CHECK(half.points.back().y == doctest::Approx(3.0));
  }
}

TEST_CASE("each backtrack at a dead end removes a single point") {
  // Field only for j <= 3: from y=0 the half reaches y=3 and is stuck there.
  const std::array<int, 3> dims{3, 8, 3};
  auto img = isotropic_field(dims, 0, [](int, int j, int) { return j <= 3 ? 1.0 : 0.0; });
  RoiSet rois{full_mask(dims, Affine()), {}, {}, {}, std::nullopt};
  const World w(Phantom{std::move(img), std::move(rois)});
  for (int limit : {0, 1, 2, 7, 64}) {
    Rng rng(16);
    BacktrackBudget budget{0, limit};
    const auto half = track_half(w.ctx, {1, 0, 1}, {0, 1, 0}, fixed_sample(1.0, 1e7), 250.0, 0, budget, rng);
    CHECK(half.end == HalfEnd::Ended);
    CHECK(budget.used == limit);
    CHECK(half.points.size() == 4);
  }
}

TEST_CASE("half stops at the shared length budget") {
  const auto w = isotropic_world({3, 40, 3}, 1.0);
  Rng rng(17);
  BacktrackBudget budget;
  const auto half = track_half(w->ctx, {1, 0, 1}, {0, 1, 0}, fixed_sample(1.0, 1e7), 10.0, 4, budget, rng);
  CHECK(half.end == HalfEnd::MaxLengthExceeded);
  CHECK(half.points.size() == 7);
}

TEST_CASE("zero field attempt records NoValidStartDirection") {
  const auto w = isotropic_world({4, 4, 4}, 0.0);
  ParameterRanges r;
  Rng rng(18);
  const auto at = track_streamline(w->ctx, r, rng);
  CHECK_FALSE(at.record.accepted);
  CHECK(at.record.flags == FailureFlags{FailureFlag::NoValidStartDirection});
  CHECK(at.record.n_points == 1);
  CHECK_FALSE(at.streamline);
  CHECK_FALSE(at.record.streamline_index);
}

TEST_CASE("min length beyond the phantom rejects every seed as too short") {
  const auto& w = straight_world();
  ParameterRanges r;
  r.min_length = 100.0;
  r.target_streamlines = 10;
  r.max_seeds = 200;
  const auto res = run(w.ctx, r, {19, 0});
  CHECK(res.streamlines.empty());
  CHECK(res.records.size() == 200);
  for (const auto& rec : res.records) {
    CHECK_FALSE(rec.accepted);
    if (!rec.flags.has(FailureFlag::NoValidStartDirection)) CHECK(rec.flags.has(FailureFlag::TooShort));
  }
}

TEST_CASE("straight phantom accepts most seeds") {
  const auto& w = straight_world();
  ParameterRanges r;
  r.target_streamlines = 1000;
  r.max_seeds = 200;
  const auto res = run(w.ctx, r, {20, 0});
  CHECK(static_cast<double>(res.streamlines.size()) / res.records.size() > 0.9);
}

TEST_CASE("target zero produces nothing") {
  const auto& w = straight_world();
  ParameterRanges r;
  r.target_streamlines = 0;
  const auto res = run(w.ctx, r, {1, 0});
  CHECK(res.streamlines.empty());
  CHECK(res.records.empty());
}

TEST_CASE("attempt cap stops a run that cannot reach its target") {
  const auto w = isotropic_world({4, 4, 4}, 0.0);
  ParameterRanges r;
  r.target_streamlines = 10;
  r.max_seeds = 57;
  const auto res = run(w->ctx, r, {2, 0});
  CHECK(res.records.size() == 57);
  CHECK(res.streamlines.empty());
  r.max_seeds = 0;
  CHECK(r.effective_max_seeds() == 10000);
}

TEST_CASE("runs are deterministic and independent of the thread count") {
  const auto& w = arc_world();
  ParameterRanges r;
  r.step_min = 0.3;
  r.step_max = 0.7;
  r.radius_min = 1.0;
  r.radius_max = 20.0;
  r.target_streamlines = 25;
  const auto a = run(w.ctx, r, {77, 1});
  const auto b = run(w.ctx, r, {77, 8});
  const auto c = run(w.ctx, r, {77, 3});
  const auto s = run_serial(w.ctx, r, 77);
  CHECK(a.streamlines.size() == 25);
  CHECK(a.streamlines == b.streamlines);
  CHECK(a.streamlines == c.streamlines);
  CHECK(a.streamlines == s.streamlines);
  REQUIRE(a.records.size() == b.records.size());
  REQUIRE(a.records.size() == s.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(without_timing(a.records[i]) == without_timing(b.records[i]));
    CHECK(without_timing(a.records[i]) == without_timing(s.records[i]));
  }
  const auto d = run(w.ctx, r, {78, 1});
  CHECK(d.streamlines != a.streamlines);
}

TEST_CASE("attempt i replays from its own stream") {
  const auto& w = arc_world();
  ParameterRanges r;
  r.radius_max = 30.0;
  r.target_streamlines = 10;
  const auto res = run(w.ctx, r, {5, 0});
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    Rng rng(5, i);
    auto rec = track_streamline(w.ctx, r, rng).record;
    rec.streamline_index = res.records[i].streamline_index;
    CHECK(without_timing(rec) == without_timing(res.records[i]));
  }
}

TEST_CASE("tracking invariants hold over randomized configurations") {
  oracle::Gen gen(21);
  for (int trial = 0; trial < 6; ++trial) {
    const World& w = trial % 2 ? arc_world() : straight_world();
    ParameterRanges r;
    r.step_min = gen.uniform(0.2, 0.6);
    r.step_max = r.step_min + gen.uniform(0.0, 0.4);
    r.radius_min = r.step_max + gen.uniform(0.0, 3.0);
    r.radius_max = r.radius_min + gen.uniform(0.0, 50.0);
    r.threshold_min = gen.uniform(0.05, 0.15);
    r.threshold_max = r.threshold_min + gen.uniform(0.0, 0.1);
    r.min_length = gen.uniform(0.0, 10.0);
    r.max_length = r.min_length + gen.uniform(5.0, 60.0);
    r.target_streamlines = 20;
    r.max_seeds = 400;
    const auto res = run(w.ctx, r, {static_cast<std::uint64_t>(trial), 0});

    std::size_t accepted = 0;
    for (const auto& rec : res.records) {
      REQUIRE(rec.accepted == rec.flags.empty());
      REQUIRE(rec.params.cone_angle == cone_angle_from_radius(rec.params.step_size, rec.params.radius));
      REQUIRE(rec.params.step_size >= r.step_min);
      REQUIRE(rec.params.step_size <= r.step_max);
      REQUIRE(rec.params.radius >= r.radius_min);
      REQUIRE(rec.params.radius <= r.radius_max);
      REQUIRE(rec.n_backtracks <= w.ctx.fixed.backtrack_lim);
      REQUIRE(rec.n_points >= 1);
      REQUIRE(rec.duration_us >= 0);
      if (!rec.accepted) {
        REQUIRE_FALSE(rec.streamline_index);
        continue;
      }
      REQUIRE(rec.streamline_index == accepted);
      ++accepted;
      const auto& s = res.streamlines[*rec.streamline_index];
      REQUIRE(s.size() == rec.n_points);
      const double step = rec.params.step_size;
      const double len = static_cast<double>(s.size() - 1) * step;
      REQUIRE(len >= r.min_length);
      REQUIRE(len < r.max_length);
      REQUIRE(satisfies_acceptance(s, w.ph.rois, rec.params, r));
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        REQUIRE(std::abs(distance(s[i], s[i + 1]) - step) <= 1e-9);
        const Vec3 dir = (s[i + 1] - s[i]) / step;
        for (int k = 1; k <= 4; ++k)
          REQUIRE(oracle::eval_fod(w.ph.fod, w.sphere, s[i] + dir * (k / 4.0 * step), dir) >
                  rec.params.fod_threshold - 1e-9);
        if (i + 2 < s.size())
          REQUIRE(angle_between(s[i + 1] - s[i], s[i + 2] - s[i + 1]) <= rec.params.cone_angle + 1e-9);
      }
    }
    CHECK(accepted == res.streamlines.size());
    CHECK(res.streamlines.size() <= r.target_streamlines);
    if (res.streamlines.size() < r.target_streamlines) CHECK(res.records.size() == r.max_seeds);
  }
}

TEST_CASE("failure flag names round trip") {
  for (auto f : kAllFailureFlags) CHECK(flag_from_name(flag_name(f)) == f);
  CHECK_FALSE(flag_from_name("Bogus"));
  FailureFlags flags{FailureFlag::TooShort, FailureFlag::NoValidStartDirection};
  CHECK(flags.list() == std::vector<FailureFlag>{FailureFlag::NoValidStartDirection, FailureFlag::TooShort});
}
