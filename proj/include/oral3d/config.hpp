#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "oral3d/deformation.hpp"
#include "oral3d/metrics.hpp"
#include "oral3d/nn/network.hpp"
#include "oral3d/nn/train.hpp"
#include "oral3d/synthesis.hpp"

namespace oral3d {

struct MetricConfig {
  double tau = -0.8;
  SsimConfig ssim;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int phantom_count = 5;
  PhantomSpec phantom;
  SynthConfig synth;
  // Generator input size and depth are derived from phantom and synth.
  nn::ArchDescriptor arch;
  nn::TrainConfig train;
  DeformConfig deform;
  MetricConfig metrics;
  std::array<int, 3> split_ratio{3, 1, 1};
  std::filesystem::path out_dir = "run";

  void validate() const;
};

// Every key is required; the first missing or mistyped one is reported by
// its dotted path as a Validation error.
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& p);
nlohmann::json to_json(const PipelineConfig& cfg);

// Sets the run seed and every seed derived from it.
void apply_seed(PipelineConfig& cfg, std::uint64_t seed);

// "3:1:1" -> {3, 1, 1}.
std::array<int, 3> parse_ratio(const std::string& s);

// Seed of the i-th phantom of a run.
std::uint64_t phantom_seed(std::uint64_t run_seed, int index);

}  // namespace oral3d
