// SPDX-License-Identifier: Apache-2.0
#include "sspt/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "sspt/analysis.hpp"
#include "sspt/engine.hpp"
#include "sspt/error.hpp"
#include "sspt/fod.hpp"
#include "sspt/io.hpp"
#include "sspt/phantom.hpp"

namespace sspt::cli {

namespace fs = std::filesystem;

namespace {

double parse_number(const std::string& s, const std::string& flag) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v))
    throw ConfigError(flag + ": '" + s + "' is not a finite number");
  return v;
}

// --- track ------------------------------------------------------------------

struct TrackArgs {
  std::string fod, seed, mask;
  std::vector<std::string> include, include_or, exclude;
  std::string step, radius, threshold, threshold_range;
  double min_length = 0.0;
  double max_length = 250.0;
  std::size_t target = 0;
  std::size_t max_seeds = 0;
  std::uint64_t rng_seed = 0;
  int threads = 0;
  std::string out, records;
};

ParameterRanges ranges_from(const TrackArgs& a) {
  ParameterRanges r;
  std::tie(r.step_min, r.step_max) = parse_range(a.step, "--step");
  std::tie(r.radius_min, r.radius_max) = parse_range(a.radius, "--radius");
  if (!a.threshold_range.empty())
    std::tie(r.threshold_min, r.threshold_max) = parse_range(a.threshold_range, "--fod-threshold-range");
  else if (!a.threshold.empty())
    r.threshold_min = r.threshold_max = parse_number(a.threshold, "--fod-threshold");
  else
    r.threshold_min = r.threshold_max = FixedParams{}.fod_threshold_default;
  r.min_length = a.min_length;
  r.max_length = a.max_length;
  r.target_streamlines = a.target;
  r.max_seeds = a.max_seeds;
  try {
    r.validate();
  } catch (const ConfigError& e) {
    // Field prefixes in validation messages name the flag without dashes.
    throw ConfigError(std::string("--") + e.what());
  }
  return r;
}

int cmd_track(const TrackArgs& a, std::ostream& out) {
  const ParameterRanges ranges = ranges_from(a);
  if (a.threads < 0) throw ConfigError("--threads: must be >= 0");

  const FodImage img = io::read_fod(a.fod);
  RoiSet rois{io::read_mask(a.seed), {}, {}, {}, std::nullopt};
  for (const auto& p : a.include) rois.include_and.push_back(io::read_mask(p));
  for (const auto& p : a.include_or) rois.include_or.push_back(io::read_mask(p));
  for (const auto& p : a.exclude) rois.exclude.push_back(io::read_mask(p));
  if (!a.mask.empty()) rois.tracking_mask = io::read_mask(a.mask);

  const FixedParams fixed;
  const auto sphere = subdivide_icosahedron(fixed.sh_resolution);
  const ShBasis basis(sphere, img.lmax());
  const FodEvaluator fod(img, sphere, basis);
  const TrackingContext ctx{fod, rois, fixed};

  const auto t0 = std::chrono::steady_clock::now();
  const RunResult result = run(ctx, ranges, RunOptions{a.rng_seed, a.threads});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  io::write_tck(a.out, result.streamlines);
  io::write_records(a.records, result.records);
  io::write_ranges_json(a.records + ".ranges.json", ranges);

  const std::size_t attempts = result.records.size();
  const std::size_t accepted = result.streamlines.size();
  out << "attempts: " << attempts << '\n'
      << "accepted: " << accepted << '\n'
      << "acceptance rate: " << std::setprecision(4)
      << (attempts ? static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0) << '\n'
      << "wall time: " << std::setprecision(3) << wall << " s\n";
  if (accepted < ranges.target_streamlines)
    out << "note: attempt cap " << ranges.effective_max_seeds() << " reached before the target of "
        << ranges.target_streamlines << '\n';
  return kExitOk;
}

// --- analyze / refine -------------------------------------------------------

std::pair<double, double> resolve_range(const std::string& records_path, const std::string& range_flag,
                                        ParamName param, std::span<const TrackingRecord> records, std::ostream& err) {
  if (!range_flag.empty()) return parse_range(range_flag, "--range");
  const fs::path sidecar = records_path + ".ranges.json";
  if (fs::exists(sidecar)) return param_range(io::read_ranges_json(sidecar), param);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : records) {
    lo = std::min(lo, param_value(r.params, param));
    hi = std::max(hi, param_value(r.params, param));
  }
  err << "warning: no " << sidecar.string() << " and no --range; binning over the observed span [" << lo << ", "
      << hi << "]\n";
  return {lo, hi};
}

std::vector<TrackingRecord> load_records(const std::string& path) {
  auto records = io::read_records(path);
  if (records.empty()) throw FormatError(path + ": no tracking records");
  return records;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix + p.extension().string());
}

struct AnalyzeArgs {
  std::string records, param, clusters, out, range;
  std::size_t bins = 20;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  const ParamName param = param_from_name(a.param);
  if (a.bins < 1) throw ConfigError("--bins: must be >= 1");
  const auto records = load_records(a.records);
  const auto range = resolve_range(a.records, a.range, param, records, err);

  const auto global = histogram(records, param, a.bins, range);
  io::write_histogram_csv(a.out, global);
  out << "records: " << records.size() << ", accepted: " << global.total_accepted() << '\n';
  if (!a.clusters.empty()) {
    const auto clusters = io::read_clusters_csv(a.clusters);
    const auto per = per_cluster_histograms(records, clusters, param, a.bins, range);
    for (std::size_t k = 0; k < per.size(); ++k)
      io::write_histogram_csv(with_suffix(a.out, "_c" + std::to_string(clusters[k].id)), per[k]);
    out << "clusters: " << per.size() << '\n';
  }
  return kExitOk;
}

struct RefineArgs {
  std::string records, param, out, range;
  double keep = 0.95;
  std::size_t bins = 20;
};

std::string flag_for(ParamName p) {
  switch (p) {
  case ParamName::StepSize: return "--step";
  case ParamName::Radius: return "--radius";
  case ParamName::FodThreshold: return "--fod-threshold-range";
  case ParamName::ConeAngle: break;
  }
  return "cone angle";
}

int cmd_refine(const RefineArgs& a, std::ostream& out, std::ostream& err) {
  const ParamName param = param_from_name(a.param);
  if (!(a.keep > 0.0 && a.keep <= 1.0)) throw ConfigError("--keep: must be in (0, 1]");
  if (a.bins < 1) throw ConfigError("--bins: must be >= 1");
  const auto records = load_records(a.records);
  const auto range = resolve_range(a.records, a.range, param, records, err);
  const auto s = suggest_ranges(histogram(records, param, a.bins, range), a.keep);
  io::write_suggestion_csv(a.out, s);
  out << "suggested: " << flag_for(param) << ' ' << s.suggested_min << ':' << s.suggested_max << "  (support "
      << std::setprecision(3) << s.support_fraction << ")\n";
  return kExitOk;
}

// --- cluster ----------------------------------------------------------------

struct ClusterArgs {
  std::string tracks, out;
  double threshold = 0.0;
  std::size_t points = 12;
};

int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
  if (!(a.threshold > 0.0)) throw ConfigError("--threshold: must be positive");
  if (a.points < 2) throw ConfigError("--points: must be >= 2");
  const auto tracks = io::read_tck(a.tracks);
  const auto clusters = quickbundles(tracks, a.threshold, a.points);
  io::write_clusters_csv(a.out, clusters);
  Tractogram centroids;
  for (const auto& c : clusters) centroids.push_back(c.centroid);
  io::write_tck(with_suffix(a.out, "_centroids").replace_extension(".tck"), centroids);
  out << "streamlines: " << tracks.size() << ", clusters: " << clusters.size() << '\n';
  return kExitOk;
}

// --- phantom ----------------------------------------------------------------

struct PhantomArgs {
  std::string kind = "straight";
  std::string dims, out_dir;
  std::optional<double> arc_radius, bundle_radius, voxel, kappa, peak;
  std::optional<int> lmax;
};

int cmd_phantom(const PhantomArgs& a, std::ostream& out) {
  PhantomSpec spec = default_phantom(phantom_kind_from_name(a.kind));
  if (a.arc_radius) spec.arc_radius = *a.arc_radius;
  if (a.bundle_radius) spec.bundle_radius = *a.bundle_radius;
  if (a.voxel) spec.voxel_size = *a.voxel;
  if (a.kappa) spec.kappa = *a.kappa;
  if (a.peak) spec.peak_amplitude = *a.peak;
  if (a.lmax) spec.lmax = *a.lmax;
  if (!a.dims.empty()) {
    std::array<int, 3> d{};
    std::istringstream in(a.dims);
    char c1 = 0, c2 = 0;
    if (!(in >> d[0] >> c1 >> d[1] >> c2 >> d[2]) || c1 != ',' || c2 != ',' || !in.eof())
      throw ConfigError("--dims: expected X,Y,Z");
    spec.volume_dims = d;
  }
  try {
    spec.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("phantom: ") + e.what());
  }
  const Phantom p = generate(spec);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  io::write_nifti(dir / "fod.nii.gz", p.fod);
  io::write_nifti(dir / "seed.nii.gz", p.rois.seed);
  io::write_nifti(dir / "include_a.nii.gz", p.rois.include_and.at(0));
  io::write_nifti(dir / "include_b.nii.gz", p.rois.include_and.at(1));
  const auto d = p.fod.dims();
  out << phantom_kind_name(spec.kind) << " phantom " << d[0] << 'x' << d[1] << 'x' << d[2] << " written to "
      << dir.string() << '\n';
  return kExitOk;
}

} // namespace

std::pair<double, double> parse_range(const std::string& text, const std::string& flag) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    const double v = parse_number(text, flag);
    return {v, v};
  }
  const double lo = parse_number(text.substr(0, colon), flag);
  const double hi = parse_number(text.substr(colon + 1), flag);
  if (lo > hi) throw ConfigError(flag + ": min " + text.substr(0, colon) + " exceeds max " + text.substr(colon + 1));
  return {lo, hi};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streamline-specific parameter tractography"};
  app.require_subcommand(1);

  TrackArgs ta;
  auto* track = app.add_subcommand("track", "Track streamlines with per-streamline sampled parameters");
  track->add_option("--fod", ta.fod, "FOD image (4-D NIfTI, SH coefficients)")->required();
  track->add_option("--seed", ta.seed, "Seed mask")->required();
  track->add_option("--include", ta.include, "'and' inclusion mask (repeatable)");
  track->add_option("--include-or", ta.include_or, "'or' inclusion mask (repeatable)");
  track->add_option("--exclude", ta.exclude, "Exclusion mask (repeatable)");
  track->add_option("--mask", ta.mask, "Tracking mask");
  track->add_option("--step", ta.step, "Step size range MIN:MAX (mm)")->required();
  track->add_option("--radius", ta.radius, "Radius-of-curvature range MIN:MAX (mm)")->required();
  auto* thr = track->add_option("--fod-threshold", ta.threshold, "Fixed FOD amplitude threshold");
  auto* thr_range = track->add_option("--fod-threshold-range", ta.threshold_range, "Threshold range MIN:MAX");
  thr->excludes(thr_range);
  track->add_option("--min-length", ta.min_length, "Minimum length (mm)");
  track->add_option("--max-length", ta.max_length, "Maximum length (mm)");
  track->add_option("--target", ta.target, "Accepted streamlines to collect")->required();
  track->add_option("--max-seeds", ta.max_seeds, "Attempt cap (default 1000 x target)");
  track->add_option("--rng-seed", ta.rng_seed, "Global RNG seed")->required();
  track->add_option("--threads", ta.threads, "Worker threads (0: all)");
  track->add_option("--out", ta.out, "Output .tck")->required();
  track->add_option("--records", ta.records, "Output records .jsonl")->required();

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Parameter acceptance histograms");
  analyze->add_option("--records", aa.records, "Records .jsonl")->required();
  analyze->add_option("--param", aa.param, "step_size | radius | cone_angle | fod_threshold")->required();
  analyze->add_option("--bins", aa.bins, "Histogram bins");
  analyze->add_option("--clusters", aa.clusters, "Cluster assignment CSV");
  analyze->add_option("--range", aa.range, "Binning range MIN:MAX (default: the sampling range)");
  analyze->add_option("--out", aa.out, "Output CSV")->required();

  ClusterArgs ca;
  auto* cluster = app.add_subcommand("cluster", "QuickBundles clustering of a tractogram");
  cluster->add_option("--tracks", ca.tracks, "Input .tck")->required();
  cluster->add_option("--threshold", ca.threshold, "MDF threshold (mm)")->required();
  cluster->add_option("--points", ca.points, "Resampling points per streamline");
  cluster->add_option("--out", ca.out, "Assignment CSV")->required();

  RefineArgs ra;
  auto* refine = app.add_subcommand("refine", "Suggest a narrower sampling range");
  refine->add_option("--records", ra.records, "Records .jsonl")->required();
  refine->add_option("--param", ra.param, "step_size | radius | cone_angle | fod_threshold")->required();
  refine->add_option("--keep", ra.keep, "Fraction of accepted mass to keep");
  refine->add_option("--bins", ra.bins, "Histogram bins");
  refine->add_option("--range", ra.range, "Binning range MIN:MAX (default: the sampling range)");
  refine->add_option("--out", ra.out, "Suggestion CSV")->required();

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Write a synthetic FOD phantom with masks");
  phantom->add_option("--kind", pa.kind, "straight | arc | crossing");
  phantom->add_option("--arc-radius", pa.arc_radius, "Arc radius (mm)");
  phantom->add_option("--bundle-radius", pa.bundle_radius, "Bundle radius (mm)");
  phantom->add_option("--dims", pa.dims, "Volume size X,Y,Z (voxels)");
  phantom->add_option("--voxel", pa.voxel, "Voxel size (mm)");
  phantom->add_option("--kappa", pa.kappa, "Kernel concentration");
  phantom->add_option("--peak", pa.peak, "Kernel peak amplitude");
  phantom->add_option("--lmax", pa.lmax, "SH order");
  phantom->add_option("--out-dir", pa.out_dir, "Output directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (track->parsed()) return cmd_track(ta, out);
    if (analyze->parsed()) return cmd_analyze(aa, out, err);
    if (cluster->parsed()) return cmd_cluster(ca, out);
    if (refine->parsed()) return cmd_refine(ra, out, err);
    if (phantom->parsed()) return cmd_phantom(pa, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

int main(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace sspt::cli
