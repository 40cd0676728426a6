#pragma once

#include <array>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "oral3d/config.hpp"
#include "oral3d/metrics.hpp"
#include "oral3d/nn/train.hpp"
#include "oral3d/synthesis.hpp"

namespace oral3d {

namespace fs = std::filesystem;

// Largest-remainder apportionment of n items over the ratio parts; ties in
// the remainder go to the earlier part.
std::array<int, 3> split_counts(int n, const std::array<int, 3>& ratio);

struct Split {
  std::vector<std::string> train, val, test;
};

// Seeded shuffle, then consecutive runs of split_counts() items.
Split split_items(std::vector<std::string> items, const std::array<int, 3>& ratio, std::uint64_t seed);

// Voxels a flatten/register roundtrip must reproduce: within the depth
// range covered by the flattened grid and closest to an interior arc sample.
Mask3 roundtrip_band(const ArcSamples& samples, Dims3 dims, int d, double depth_step);

struct RoundtripReport {
  bool guard_ok = true;  // false: curve too tight for the band, check skipped
  double min_radius = 0.0;
  double psnr_db = 0.0;
  double dice = 0.0;
  double max_abs_error = 0.0;
  std::size_t band_voxels = 0;
};

// register(flatten(V)) compared with V inside roundtrip_band().
RoundtripReport roundtrip(const Volume3& v, const SynthConfig& synth, const DeformConfig& deform, double tau);

struct MethodScores {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double dice = 0.0;
  double overall_pct = 0.0;
};

struct RunAllSummary {
  int n_train = 0, n_val = 0, n_test = 0;
  double loss_r_untrained = 0.0;
  double loss_r_trained = 0.0;
  MethodScores model;
  MethodScores smear;
  std::vector<nn::EpochRecord> history;
};

// Writes <stem>.{json,raw} and <stem>.curve.json for each of n phantoms.
std::vector<fs::path> cmd_phantom(const PipelineConfig& cfg, int n, const fs::path& out_dir);

// Writes train.json, val.json and test.json manifests into out_dir.
Split cmd_split(const std::vector<std::string>& files, const std::array<int, 3>& ratio, std::uint64_t seed,
                const fs::path& out_dir);

// Writes px.pgm, px (lossless f32 pair), flat, roi and curve.json.
void cmd_synth(const fs::path& volume, const PipelineConfig& cfg, const fs::path& out_dir);

// Returns the process exit code: 0 pass or skipped, 2 below 30 dB.
int cmd_roundtrip(const fs::path& volume, const PipelineConfig& cfg, std::ostream& log);

// phantom -> split -> synth -> train -> reconstruct -> eval into cfg.out_dir.
RunAllSummary cmd_run_all(const PipelineConfig& cfg, std::ostream& log);

std::string format_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace oral3d
