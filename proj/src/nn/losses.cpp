#include "oral3d/nn/losses.hpp"

#include <random>
#include <string>

#include "oral3d/error.hpp"
#include "oral3d/volume.hpp"

namespace oral3d::nn {

namespace {

Tensor<float> cut_patch(const FVolume& f, std::array<int, 3> origin, int size) {
  Tensor<float> t({size, size, size});
  std::size_t i = 0;
  for (int k = 0; k < size; ++k) {
    for (int z = 0; z < size; ++z) {
      for (int u = 0; u < size; ++u) t.data[i++] = f.at(origin[0] + u, origin[1] + z, origin[2] + k);
    }
  }
  return t;
}

void require_same_dims(const FVolume& a, const FVolume& b) {
  if (a.w() != b.w() || a.h() != b.h() || a.d() != b.d()) {
    throw Error(ErrorCode::Dimension, "flattened volumes differ in shape");
  }
}

double image_mse(const Image2& a, const Image2& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - b.values()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.values().size());
}

PatchScorer scorer_for(const NetParams<float>& d) {
  return [&d](const Tensor<float>& patch) { return discriminator_forward(d, patch); };
}

}  // namespace

std::vector<PatchPair> sample_aligned_patches(const FVolume& real, const FVolume& fake, int n, int size,
                                              std::uint64_t seed) {
  require_same_dims(real, fake);
  if (size < 1 || size > real.w() || size > real.h() || size > real.d()) {
    throw Error(ErrorCode::Dimension, "patch size " + std::to_string(size) + " does not fit volume " +
                                          std::to_string(real.w()) + "x" + std::to_string(real.h()) + "x" +
                                          std::to_string(real.d()));
  }
  std::mt19937_64 rng(seed);
  std::vector<PatchPair> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto origin = draw_patch_origin(rng, real.w(), real.h(), real.d(), size);
    out.push_back({cut_patch(real, origin, size), cut_patch(fake, origin, size), origin});
  }
  return out;
}

double lsgan_discriminator_loss(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw Error(ErrorCode::EmptyBatch, "no discriminator scores");
  if (real_scores.size() != fake_scores.size()) {
    throw Error(ErrorCode::Dimension, "real and fake patch counts differ");
  }
  double real_term = 0.0, fake_term = 0.0;
  for (double s : real_scores) real_term += (s - 1.0) * (s - 1.0);
  for (double s : fake_scores) fake_term += s * s;
  return real_term / real_scores.size() + fake_term / fake_scores.size();
}

double lsgan_generator_loss(std::span<const double> fake_scores) {
  if (fake_scores.empty()) throw Error(ErrorCode::EmptyBatch, "no discriminator scores");
  double acc = 0.0;
  for (double s : fake_scores) acc += (s - 1.0) * (s - 1.0);
  return acc / fake_scores.size();
}

double loss_discriminator(const PatchScorer& d, std::span<const Tensor<float>> real_patches,
                          std::span<const Tensor<float>> fake_patches) {
  std::vector<double> real, fake;
  for (const auto& p : real_patches) real.push_back(d(p));
  for (const auto& p : fake_patches) fake.push_back(d(p));
  return lsgan_discriminator_loss(real, fake);
}

double loss_discriminator(const NetParams<float>& d, std::span<const Tensor<float>> real_patches,
                          std::span<const Tensor<float>> fake_patches) {
  return loss_discriminator(scorer_for(d), real_patches, fake_patches);
}

double loss_generator_adv(const PatchScorer& d, std::span<const Tensor<float>> fake_patches) {
  std::vector<double> fake;
  for (const auto& p : fake_patches) fake.push_back(d(p));
  return lsgan_generator_loss(fake);
}

double loss_generator_adv(const NetParams<float>& d, std::span<const Tensor<float>> fake_patches) {
  return loss_generator_adv(scorer_for(d), fake_patches);
}

double loss_reconstruction(const FVolume& y, const FVolume& g) {
  require_same_dims(y, g);
  const auto a = y.grid().values();
  const auto b = g.grid().values();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double loss_projection(const FVolume& y, const FVolume& g) {
  require_same_dims(y, g);
  const Projections py = orthogonal_projections(y.grid());
  const Projections pg = orthogonal_projections(g.grid());
  return (image_mse(py.along_x, pg.along_x) + image_mse(py.along_y, pg.along_y) +
          image_mse(py.along_z, pg.along_z)) /
         3.0;
}

double total_generator_loss(const LossWeights& w, const LossParts& parts) {
  return w.lambda1 * parts.adversarial + w.lambda2 * parts.reconstruction + w.lambda3 * parts.projection;
}

}  // namespace oral3d::nn
