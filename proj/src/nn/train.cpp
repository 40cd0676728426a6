#include "oral3d/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "oral3d/error.hpp"

namespace oral3d::nn {

void TrainConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw Error(ErrorCode::Validation, "loss weights must be >= 0");
  if (!(lr0 > 0)) throw Error(ErrorCode::Validation, "lr0 must be > 0");
  if (!(decay_factor > 0) || decay_period < 1) {
    throw Error(ErrorCode::Validation, "decay needs factor > 0 and period >= 1");
  }
  if (epochs < 1) throw Error(ErrorCode::Validation, "epochs must be >= 1");
  if (d_start_epoch < 0) throw Error(ErrorCode::Validation, "d_start_epoch must be >= 0");
  if (patch_size < 1 || patches_per_step < 1) {
    throw Error(ErrorCode::Validation, "patch_size and patches_per_step must be >= 1");
  }
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 && adam.eps > 0)) {
    throw Error(ErrorCode::Validation, "adam needs beta in [0, 1) and eps > 0");
  }
}

double TrainConfig::learning_rate(int epoch) const {
  return lr0 * std::pow(decay_factor, static_cast<double>(epoch / decay_period));
}

TrainingExample make_example(const Image2& px, const FVolume& target) {
  if (px.width() != target.w() || px.height() != target.h()) {
    throw Error(ErrorCode::Dimension, "PX and flattened target disagree in width or height");
  }
  TrainingExample ex;
  ex.px = image_tensor<float>(px);
  ex.target = flat_tensor<float>(target);
  ex.depth_step = target.depth_step();
  Graph<float> g;
  const auto t = g.input(ex.target);
  for (int a = 0; a < 3; ++a) ex.target_projections[a] = g.value(g.mean_axis(t, a));
  return ex;
}

TrainingExample make_example(const PairedSample& s) { return make_example(s.px, s.flat_gt); }

namespace {

using Var = Graph<float>::Var;
using OriginHook = std::function<std::vector<std::array<int, 3>>(const Tensor<float>&)>;

std::vector<Tensor<float>> gradients(const Graph<float>& g, std::span<const Var> vars) {
  std::vector<Tensor<float>> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(g.grad(v));
  return out;
}

Tensor<float> batched(Tensor<float> patch) {
  patch.shape.insert(patch.shape.begin(), 1);
  return patch;
}

// Shared generator update. `hook` sees the generator output before the
// adversarial branch is built, and returns the patch origins to score.
StepLosses generator_update(NetParams<float>& params, AdamState<float>& state, const AdamConfig& adam,
                            const TrainingExample& ex, double lr, const LossWeights& w, bool use_adv,
                            const OriginHook& hook) {
  Graph<float> g;
  const auto gen_vars = nn::bind(g, params.generator, true);
  const Var out = generator_graph<float>(g, params.arch, gen_vars, g.input(ex.px));
  if (g.value(out).shape != ex.target.shape) {
    throw Error(ErrorCode::Dimension, "generator output " + shape_string(g.value(out).shape) +
                                          " does not match target " + shape_string(ex.target.shape));
  }

  std::vector<Var> terms;
  std::vector<float> weights;
  StepLosses losses;
  const Var rec = g.squared_error(out, g.input(ex.target));
  losses.reconstruction = g.value(rec).data[0];
  terms.push_back(rec);
  weights.push_back(static_cast<float>(w.lambda2));
  for (int a = 0; a < 3; ++a) {
    const Var p = g.squared_error(g.mean_axis(out, a), g.input(ex.target_projections[a]));
    losses.projection += g.value(p).data[0] / 3.0;
    terms.push_back(p);
    weights.push_back(static_cast<float>(w.lambda3 / 3.0));
  }

  if (use_adv) {
    const auto origins = hook(g.value(out));
    if (origins.empty()) throw Error(ErrorCode::EmptyBatch, "no patches for the adversarial term");
    const int ps = params.arch.patch_size;
    const auto disc_vars = nn::bind(g, params.discriminator, false);
    const Var one = g.input(Tensor<float>(Shape{}, 1.0f));
    std::vector<Var> per_patch;
    for (const auto& o : origins) {
      const Var cut = g.crop(out, {o[2], o[1], o[0]}, {ps, ps, ps});
      const Var score = discriminator_graph<float>(g, params.arch, disc_vars, g.reshape(cut, {1, ps, ps, ps}));
      per_patch.push_back(g.squared_error(score, one));
    }
    const std::vector<float> avg(per_patch.size(), 1.0f / static_cast<float>(per_patch.size()));
    const Var adv = g.weighted_sum(per_patch, avg);
    losses.adversarial = g.value(adv).data[0];
    terms.push_back(adv);
    weights.push_back(static_cast<float>(w.lambda1));
  }

  g.backward(g.weighted_sum(terms, weights));
  adam_step(params.generator, gradients(g, gen_vars), state, lr, adam);
  return losses;
}

}  // namespace

Trainer::Trainer(const ArchDescriptor& arch, const TrainConfig& cfg)
    : Trainer(
          [&] {
            cfg.validate();
            ArchDescriptor a = arch;
            a.patch_size = cfg.patch_size;
            return make_params<float>(a, Init::HeNormal, cfg.seed);
          }(),
          cfg) {}

Trainer::Trainer(NetParams<float> params, const TrainConfig& cfg)
    : params_(std::move(params)), cfg_(cfg), rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
  cfg_.validate();
  if (params_.arch.patch_size != cfg_.patch_size) {
    throw Error(ErrorCode::Validation, "descriptor patch size " + std::to_string(params_.arch.patch_size) +
                                           " differs from training patch size " + std::to_string(cfg_.patch_size));
  }
}

StepLosses Trainer::generator_step(const TrainingExample& ex, double lr, const LossWeights& w, bool use_adv,
                                   std::span<const std::array<int, 3>> patch_origins) {
  const std::vector<std::array<int, 3>> fixed(patch_origins.begin(), patch_origins.end());
  auto losses = generator_update(params_, gen_state_, cfg_.adam, ex, lr, w, use_adv,
                                 [&fixed](const Tensor<float>&) { return fixed; });
  ++gen_steps_;
  return losses;
}

double Trainer::discriminator_step(std::span<const PatchPair> pairs, double lr) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyBatch, "no patch pairs for the discriminator");
  Graph<float> g;
  const auto vars = nn::bind(g, params_.discriminator, true);
  const Var one = g.input(Tensor<float>(Shape{}, 1.0f));
  const Var zero = g.input(Tensor<float>(Shape{}, 0.0f));
  std::vector<Var> terms;
  for (const auto& p : pairs) {
    const Var real = discriminator_graph<float>(g, params_.arch, vars, g.input(batched(p.real_patch)));
    const Var fake = discriminator_graph<float>(g, params_.arch, vars, g.input(batched(p.fake_patch)));
    terms.push_back(g.squared_error(real, one));
    terms.push_back(g.squared_error(fake, zero));
  }
  // Each of the two expectations is a mean over the n pairs.
  const std::vector<float> avg(terms.size(), 1.0f / static_cast<float>(pairs.size()));
  const Var loss = g.weighted_sum(terms, avg);
  const double value = g.value(loss).data[0];
  g.backward(loss);
  adam_step(params_.discriminator, gradients(g, vars), disc_state_, lr, cfg_.adam);
  ++disc_steps_;
  return value;
}

EpochRecord Trainer::run_epoch(std::span<const TrainingExample> data, int epoch) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  EpochRecord rec;
  rec.epoch = epoch;
  rec.lr = cfg_.learning_rate(epoch);
  rec.disc_active = epoch >= cfg_.d_start_epoch;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  LossWeights w = cfg_.weights();
  if (!rec.disc_active) w.lambda1 = 0.0;
  const int ps = cfg_.patch_size;

  for (std::size_t idx : order) {
    const TrainingExample& ex = data[idx];
    const int d = ex.target.dim(0), h = ex.target.dim(1), wd = ex.target.dim(2);
    if (ps > d || ps > h || ps > wd) {
      throw Error(ErrorCode::Validation, "patch size " + std::to_string(ps) + " exceeds flattened volume " +
                                             std::to_string(wd) + "x" + std::to_string(h) + "x" + std::to_string(d));
    }
    const std::uint64_t patch_seed = rng_();
    double loss_d = 0.0;
    auto hook = [&](const Tensor<float>& fake) {
      const FVolume real_v = tensor_to_flat(ex.target, ex.depth_step);
      const FVolume fake_v = tensor_to_flat(fake, ex.depth_step);
      const auto pairs = sample_aligned_patches(real_v, fake_v, cfg_.patches_per_step, ps, patch_seed);
      loss_d = discriminator_step(pairs, rec.lr);
      std::vector<std::array<int, 3>> origins;
      for (const auto& p : pairs) origins.push_back(p.origin);
      return origins;
    };
    const StepLosses s = generator_update(params_, gen_state_, cfg_.adam, ex, rec.lr, w, rec.disc_active, hook);
    ++gen_steps_;
    ++rec.gen_steps;
    rec.loss_r += s.reconstruction;
    rec.loss_p += s.projection;
    if (rec.disc_active) {
      ++rec.disc_steps;
      rec.loss_g += s.adversarial;
      rec.loss_d += loss_d;
    }
  }
  rec.loss_r /= rec.gen_steps;
  rec.loss_p /= rec.gen_steps;
  if (rec.disc_steps > 0) {
    rec.loss_g /= rec.disc_steps;
    rec.loss_d /= rec.disc_steps;
  }
  return rec;
}

std::pair<NetParams<float>, std::vector<EpochRecord>> train(std::span<const TrainingExample> dataset,
                                                           const TrainConfig& cfg, ArchDescriptor arch,
                                                           const EpochCallback& on_epoch) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  Trainer trainer(arch, cfg);
  std::vector<EpochRecord> history;
  for (int e = 0; e < cfg.epochs; ++e) {
    history.push_back(trainer.run_epoch(dataset, e));
    if (on_epoch) on_epoch(history.back());
  }
  return {trainer.params(), std::move(history)};
}

std::pair<NetParams<float>, std::vector<EpochRecord>> train(std::span<const PairedSample> dataset,
                                                           const TrainConfig& cfg, ArchDescriptor arch,
                                                           const EpochCallback& on_epoch) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  std::vector<TrainingExample> examples;
  examples.reserve(dataset.size());
  for (const auto& s : dataset) examples.push_back(make_example(s));
  return train(std::span<const TrainingExample>(examples), cfg, arch, on_epoch);
}

double mean_reconstruction_loss(const NetParams<float>& params, std::span<const TrainingExample> data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no examples to evaluate");
  double acc = 0.0;
  for (const auto& ex : data) {
    Graph<float> g;
    const auto vars = nn::bind(g, params.generator, false);
    const Var out = generator_graph<float>(g, params.arch, vars, g.input(ex.px));
    acc += g.value(g.squared_error(out, g.input(ex.target))).data[0];
  }
  return acc / static_cast<double>(data.size());
}

}  // namespace oral3d::nn
