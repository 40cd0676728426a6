#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "oral3d/nn/adam.hpp"
#include "oral3d/nn/losses.hpp"
#include "oral3d/nn/network.hpp"
#include "oral3d/synthesis.hpp"

namespace oral3d::nn {

struct TrainConfig {
  double lambda1 = 1.0;
  double lambda2 = 10.0;
  double lambda3 = 1.0;
  double lr0 = 1e-3;
  double decay_factor = 0.1;
  int decay_period = 50;
  int epochs = 300;
  int d_start_epoch = 100;
  int patch_size = 24;
  int patches_per_step = 4;
  std::uint64_t seed = 0;
  AdamConfig adam;

  void validate() const;
  LossWeights weights() const { return {lambda1, lambda2, lambda3}; }
  // Learning rate in effect during the 0-based epoch e.
  double learning_rate(int epoch) const;
};

// One PX / flattened-target pair in tensor form, with the target's axis-mean
// projections precomputed.
struct TrainingExample {
  Tensor<float> px;                        // (1, h, w)
  Tensor<float> target;                    // (d, h, w)
  std::array<Tensor<float>, 3> target_projections;  // mean over d, h, w
  double depth_step = 1.0;
};

TrainingExample make_example(const PairedSample& s);
TrainingExample make_example(const Image2& px, const FVolume& target);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss_r = 0.0;
  double loss_p = 0.0;
  double loss_g = 0.0;
  double loss_d = 0.0;
  int gen_steps = 0;
  int disc_steps = 0;
  bool disc_active = false;
};

struct StepLosses {
  double reconstruction = 0.0;
  double projection = 0.0;
  double adversarial = 0.0;
};

/// Owns the parameters and optimizer state. train() drives it epoch by
/// epoch; the step methods are exposed for finer-grained tests.
class Trainer {
 public:
  Trainer(const ArchDescriptor& arch, const TrainConfig& cfg);
  Trainer(NetParams<float> params, const TrainConfig& cfg);

  // One generator update on weights w. The adversarial term is included
  // when use_adv is set, scoring `patch_origins` of the output. Returns
  // the loss terms measured before the update.
  StepLosses generator_step(const TrainingExample& ex, double lr, const LossWeights& w, bool use_adv,
                            std::span<const std::array<int, 3>> patch_origins = {});
  // One discriminator update on real/fake patch pairs. Returns Loss_D
  // before the update.
  double discriminator_step(std::span<const PatchPair> pairs, double lr);

  EpochRecord run_epoch(std::span<const TrainingExample> data, int epoch);

  const NetParams<float>& params() const { return params_; }
  NetParams<float>& params() { return params_; }
  const TrainConfig& config() const { return cfg_; }
  long generator_steps() const { return gen_steps_; }
  long discriminator_steps() const { return disc_steps_; }

 private:
  NetParams<float> params_;
  TrainConfig cfg_;
  AdamState<float> gen_state_;
  AdamState<float> disc_state_;
  std::mt19937_64 rng_;
  long gen_steps_ = 0;
  long disc_steps_ = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains from He-initialised parameters seeded by cfg.seed. The patch size
// of the discriminator comes from cfg.
std::pair<NetParams<float>, std::vector<EpochRecord>> train(std::span<const TrainingExample> dataset,
                                                           const TrainConfig& cfg, ArchDescriptor arch,
                                                           const EpochCallback& on_epoch = {});
std::pair<NetParams<float>, std::vector<EpochRecord>> train(std::span<const PairedSample> dataset,
                                                           const TrainConfig& cfg, ArchDescriptor arch,
                                                           const EpochCallback& on_epoch = {});

// Mean Loss_R of the generator over a set of examples.
double mean_reconstruction_loss(const NetParams<float>& params, std::span<const TrainingExample> data);

}  // namespace oral3d::nn
