#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "oral3d/nn/network.hpp"
#include "oral3d/nn/tensor.hpp"
#include "oral3d/synthesis.hpp"

namespace oral3d::nn {

/// Real and generated patches cut at the same place. Patches are (p, p, p)
/// tensors in (k, z, u) row-major order, matching the FVolume storage.
struct PatchPair {
  Tensor<float> real_patch;
  Tensor<float> fake_patch;
  std::array<int, 3> origin{};  // (u, z, k)
};

std::vector<PatchPair> sample_aligned_patches(const FVolume& real, const FVolume& fake, int n, int size,
                                              std::uint64_t seed);

using PatchScorer = std::function<double(const Tensor<float>&)>;

// LSGAN objectives evaluated on discriminator scores.
double lsgan_discriminator_loss(std::span<const double> real_scores, std::span<const double> fake_scores);
double lsgan_generator_loss(std::span<const double> fake_scores);

double loss_discriminator(const PatchScorer& d, std::span<const Tensor<float>> real_patches,
                          std::span<const Tensor<float>> fake_patches);
double loss_discriminator(const NetParams<float>& d, std::span<const Tensor<float>> real_patches,
                          std::span<const Tensor<float>> fake_patches);
double loss_generator_adv(const PatchScorer& d, std::span<const Tensor<float>> fake_patches);
double loss_generator_adv(const NetParams<float>& d, std::span<const Tensor<float>> fake_patches);

// Mean squared voxel difference.
double loss_reconstruction(const FVolume& y, const FVolume& g);
// Mean over the three axes of the MSE between axis-mean projections.
double loss_projection(const FVolume& y, const FVolume& g);

struct LossWeights {
  double lambda1 = 1.0;   // adversarial
  double lambda2 = 10.0;  // reconstruction
  double lambda3 = 1.0;   // projection
};

struct LossParts {
  double adversarial = 0.0;
  double reconstruction = 0.0;
  double projection = 0.0;
};

double total_generator_loss(const LossWeights& w, const LossParts& parts);

// Origin (u, z, k) drawn uniformly over every placement of a size^3 cube
// inside a (w, h, d) volume.
template <class Rng>
std::array<int, 3> draw_patch_origin(Rng& rng, int w, int h, int d, int size) {
  auto pick = [&rng, size](int extent) { return std::uniform_int_distribution<int>(0, extent - size)(rng); };
  const int u = pick(w);
  const int z = pick(h);
  const int k = pick(d);
  return {u, z, k};
}

}  // namespace oral3d::nn
