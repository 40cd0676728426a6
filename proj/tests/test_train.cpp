#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "oral3d/error.hpp"
#include "oral3d/nn/adam.hpp"
#include "oral3d/nn/losses.hpp"
#include "oral3d/nn/train.hpp"

using namespace oral3d;
using namespace oral3d::nn;

namespace {

FVolume random_flat(int w, int h, int d, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  FVolume f(w, h, d, 1.0);
  for (float& x : f.grid().values()) x = u(rng);
  return f;
}

Image2 random_px(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Image2 img(w, h);
  for (float& x : img.values()) x = u(rng);
  return img;
}

ArchDescriptor tiny_arch() {
  ArchDescriptor a;
  a.in_h = 8;
  a.in_w = 16;
  a.stages = 2;
  a.base_channels = 4;
  a.growth = 2;
  a.dense_layers = 1;
  a.depth = 8;
  a.patch_size = 8;
  a.disc_base = 2;
  a.disc_layers = 2;
  return a;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 3;
  c.d_start_epoch = 1;
  c.decay_period = 2;
  c.patch_size = 8;
  c.patches_per_step = 2;
  c.seed = 5;
  return c;
}

std::vector<TrainingExample> tiny_dataset(int n) {
  std::vector<TrainingExample> data;
  for (int i = 0; i < n; ++i) data.push_back(make_example(random_px(16, 8, 100 + i), random_flat(16, 8, 8, 200 + i)));
  return data;
}

Tensor<float> constant_patch(float v) { return Tensor<float>({2, 2, 2}, v); }

}  // namespace

TEST_CASE("LSGAN losses") {
  const std::vector<double> ones{1.0, 1.0}, zeros{0.0, 0.0}, halves{0.5, 0.5, 0.5};
  CHECK(lsgan_discriminator_loss(ones, zeros) == 0.0);
  CHECK(lsgan_discriminator_loss(std::vector<double>{0.5, 0.5, 0.5}, halves) == doctest::Approx(0.5));
  CHECK(lsgan_generator_loss(ones) == 0.0);
  CHECK(lsgan_generator_loss(zeros) == 1.0);
  CHECK(lsgan_generator_loss(std::vector<double>{0.2, 0.6}) == doctest::Approx(0.40).epsilon(1e-12));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(7), f(7);
    double want = 0;
    for (int i = 0; i < 7; ++i) {
      r[i] = u(rng);
      f[i] = u(rng);
      want += (r[i] - 1) * (r[i] - 1) / 7 + f[i] * f[i] / 7;
    }
    const double got = lsgan_discriminator_loss(r, f);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(got >= 0.0);
  }

  try {
    lsgan_generator_loss(std::vector<double>{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBatch);
  }
  CHECK_THROWS_AS(lsgan_discriminator_loss(ones, std::vector<double>{0.0}), Error);
}

TEST_CASE("patch losses go through the scorer") {
  const PatchScorer by_value = [](const Tensor<float>& t) { return static_cast<double>(t.data[0]); };
  const std::vector<Tensor<float>> real{constant_patch(1.0f), constant_patch(1.0f)};
  const std::vector<Tensor<float>> fake{constant_patch(0.0f), constant_patch(0.0f)};
  CHECK(loss_discriminator(by_value, real, fake) == 0.0);
  const std::vector<Tensor<float>> g{constant_patch(0.2f), constant_patch(0.6f)};
  CHECK(loss_generator_adv(by_value, g) == doctest::Approx(0.40).epsilon(1e-6));
  try {
    loss_discriminator(by_value, std::vector<Tensor<float>>{}, std::vector<Tensor<float>>{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBatch);
  }

  // Zero discriminator scores 0.5 everywhere.
  const auto params = make_params<float>(tiny_arch(), Init::Zero, 0);
  const std::vector<Tensor<float>> p8{Tensor<float>({8, 8, 8}, 0.3f)};
  CHECK(loss_discriminator(params, p8, p8) == doctest::Approx(0.5));
  CHECK(loss_generator_adv(params, p8) == doctest::Approx(0.25));
}

TEST_CASE("reconstruction and projection losses") {
  const FVolume y = random_flat(6, 5, 4, 1);
  CHECK(loss_reconstruction(y, y) == 0.0);
  CHECK(loss_projection(y, y) == 0.0);
  CHECK(loss_reconstruction(FVolume(3, 3, 3, 1.0, 1.0f), FVolume(3, 3, 3, 1.0, -1.0f)) == 4.0);

  const FVolume g = random_flat(6, 5, 4, 2);
  double se = 0;
  for (int k = 0; k < 4; ++k)
    for (int z = 0; z < 5; ++z)
      for (int u = 0; u < 6; ++u) se += std::pow(double(y.at(u, z, k)) - g.at(u, z, k), 2);
  CHECK(loss_reconstruction(y, g) == doctest::Approx(se / 120).epsilon(1e-9));

  FVolume shifted = random_flat(6, 5, 4, 1, -0.8f, 0.8f);
  const FVolume base = shifted;
  for (float& x : shifted.grid().values()) x += 0.1f;
  CHECK(loss_projection(base, shifted) == doctest::Approx(0.01).epsilon(1e-5));

  // Brute-force axis means: over depth, over height, over arc position.
  const int dims[3] = {4, 5, 6};
  double total = 0;
  for (int axis = 0; axis < 3; ++axis) {
    double sum = 0;
    int count = 0;
    const int n = dims[axis];
    for (int a = 0; a < (axis == 0 ? 5 : 4); ++a)
      for (int b = 0; b < (axis == 2 ? 5 : 6); ++b) {
        double my = 0, mg = 0;
        for (int t = 0; t < n; ++t) {
          int k, z, u;
          if (axis == 0) {
            k = t, z = a, u = b;
          } else if (axis == 1) {
            k = a, z = t, u = b;
          } else {
            k = a, z = b, u = t;
          }
          my += y.at(u, z, k);
          mg += g.at(u, z, k);
        }
        sum += std::pow((my - mg) / n, 2);
        ++count;
      }
    total += sum / count;
  }
  CHECK(loss_projection(y, g) == doctest::Approx(total / 3).epsilon(1e-6));
}

TEST_CASE("total generator loss") {
  CHECK(total_generator_loss({1, 10, 1}, {0, 0, 0}) == 0.0);
  CHECK(total_generator_loss({1, 10, 1}, {0.4, 0.02, 0.01}) == doctest::Approx(0.61).epsilon(1e-12));
  CHECK(total_generator_loss({1, 0, 0}, {0.4, 0.02, 0.01}) == 0.4);
  const LossWeights w{0.3, 2.0, 5.0};
  const LossParts a{0.1, 0.2, 0.3}, b{0.5, 0.7, 0.11};
  const LossParts sum{a.adversarial + b.adversarial, a.reconstruction + b.reconstruction, a.projection + b.projection};
  CHECK(total_generator_loss(w, sum) ==
        doctest::Approx(total_generator_loss(w, a) + total_generator_loss(w, b)).epsilon(1e-12));
}

TEST_CASE("aligned patches") {
  const FVolume v = random_flat(10, 9, 8, 3);
  for (const PatchPair& p : sample_aligned_patches(v, v, 10, 4, 1)) {
    CHECK(p.real_patch == p.fake_patch);
    CHECK(p.real_patch.shape == Shape{4, 4, 4});
    const auto [u, z, k] = p.origin;
    // Patch element (a, b, c) is volume (u + c, z + b, k + a).
    CHECK(p.real_patch.data[(1 * 4 + 2) * 4 + 3] == v.at(u + 3, z + 2, k + 1));
  }
  const FVolume full = random_flat(6, 6, 6, 4);
  for (const PatchPair& p : sample_aligned_patches(full, random_flat(6, 6, 6, 5), 5, 6, 2))
    CHECK(p.origin == std::array<int, 3>{0, 0, 0});

  try {
    sample_aligned_patches(v, v, 1, 9, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Dimension);
  }
}

TEST_CASE("patch origins are uniform") {
  const FVolume v(32, 32, 32, 1.0);
  const auto pairs = sample_aligned_patches(v, v, 100, 16, 2024);
  REQUIRE(pairs.size() == 100);
  // Bins over the 17 admissible offsets: {0..3}, {4..7}, {8..11}, {12..16}.
  const double prob[4] = {4 / 17.0, 4 / 17.0, 4 / 17.0, 5 / 17.0};
  for (int axis = 0; axis < 3; ++axis) {
    int counts[4] = {0, 0, 0, 0};
    for (const auto& p : pairs) {
      const int o = p.origin[axis];
      CHECK(o >= 0);
      CHECK(o <= 16);
      ++counts[std::min(o / 4, 3)];
    }
    double chi2 = 0;
    for (int b = 0; b < 4; ++b) chi2 += std::pow(counts[b] - 100 * prob[b], 2) / (100 * prob[b]);
    CHECK(chi2 < 11.345);  // chi-square, 3 degrees of freedom, p = 0.01
  }
}

TEST_CASE("Adam") {
  std::vector<NamedTensor<double>> p{{"a", Tensor<double>({3}, {1.0, -2.0, 0.5})}};
  const auto before = p[0].value;
  AdamState<double> st;
  adam_step(p, {Tensor<double>({3}, 0.0)}, st, 0.1);
  CHECK(p[0].value == before);
  for (double m : st.m[0]) CHECK(m == 0.0);
  for (double v : st.v[0]) CHECK(v == 0.0);

  // Scalar simulation of the textbook update.
  std::vector<NamedTensor<double>> q{{"q", Tensor<double>({2}, {0.0, 0.0})}};
  AdamState<double> sq;
  const double lr = 1e-3, g0 = 0.37, g1 = -4.0;
  double m = 0, v = 0, x = 0;
  for (int t = 1; t <= 500; ++t) {
    const double prev0 = q[0].value.data[0], prev1 = q[0].value.data[1];
    adam_step(q, {Tensor<double>({2}, {g0, g1})}, sq, lr);
    m = 0.9 * m + 0.1 * g0;
    v = 0.999 * v + 0.001 * g0 * g0;
    x -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(q[0].value.data[0] == doctest::Approx(x).epsilon(1e-9));
    CHECK(std::abs(prev0 - q[0].value.data[0]) == doctest::Approx(lr).epsilon(0.01));
    CHECK(std::abs(prev1 - q[0].value.data[1]) == doctest::Approx(lr).epsilon(0.01));
  }

  std::vector<NamedTensor<double>> r{{"r", Tensor<double>({2}, {0.0, 0.0})}};
  AdamState<double> sr;
  for (int t = 1; t <= 500; ++t) adam_step(r, {Tensor<double>({2}, {g0, g1})}, sr, lr);
  CHECK(r[0].value == q[0].value);
}

TEST_CASE("training config") {
  TrainConfig c;
  CHECK(c.learning_rate(0) == 1e-3);
  CHECK(c.learning_rate(49) == 1e-3);
  CHECK(c.learning_rate(50) == doctest::Approx(1e-4));
  CHECK(c.learning_rate(120) == doctest::Approx(1e-5));
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.lambda2 = -1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("schedule accounting") {
  const auto data = tiny_dataset(3);
  TrainConfig c = tiny_config();
  c.epochs = 1;
  c.lambda1 = 0;
  c.d_start_epoch = 1;
  Trainer t(tiny_arch(), c);
  const EpochRecord r = t.run_epoch(data, 0);
  CHECK(t.generator_steps() == 3);
  CHECK(t.discriminator_steps() == 0);
  CHECK(r.gen_steps == 3);
  CHECK_FALSE(r.disc_active);

  const EpochRecord r2 = t.run_epoch(data, 1);
  CHECK(r2.disc_active);
  CHECK(r2.disc_steps == 3);
  CHECK(t.generator_steps() == 6);
}

TEST_CASE("training is reproducible") {
  const auto data = tiny_dataset(3);
  const auto [pa, ha] = train(std::span<const TrainingExample>(data), tiny_config(), tiny_arch());
  // Shift later heap addresses so buffer alignment differs between runs.
  std::vector<std::vector<float>> spacers;
  for (int n : {1, 3, 5, 7, 9}) spacers.emplace_back(n, 0.0f);
  const auto [pb, hb] = train(std::span<const TrainingExample>(data), tiny_config(), tiny_arch());
  REQUIRE(ha.size() == 3);
  REQUIRE(hb.size() == 3);
  for (std::size_t i = 0; i < ha.size(); ++i) {
    CHECK(ha[i].loss_r == hb[i].loss_r);
    CHECK(ha[i].loss_d == hb[i].loss_d);
    CHECK(ha[i].lr == hb[i].lr);
  }
  CHECK(ha[2].lr == doctest::Approx(1e-4));
  for (std::size_t i = 0; i < pa.generator.size(); ++i) CHECK(pa.generator[i].value == pb.generator[i].value);
  for (std::size_t i = 0; i < pa.discriminator.size(); ++i)
    CHECK(pa.discriminator[i].value == pb.discriminator[i].value);
}

TEST_CASE("a small generator step lowers the reconstruction loss") {
  const auto data = tiny_dataset(1);
  TrainConfig c = tiny_config();
  c.lambda1 = 0;
  c.lambda3 = 0;
  Trainer t(tiny_arch(), c);
  const double before = mean_reconstruction_loss(t.params(), data);
  const StepLosses s = t.generator_step(data[0], 1e-5, c.weights(), false);
  CHECK(s.reconstruction == doctest::Approx(before).epsilon(1e-6));
  CHECK(mean_reconstruction_loss(t.params(), data) < before);
}

TEST_CASE("training needs data") {
  try {
    train(std::span<const TrainingExample>(), tiny_config(), tiny_arch());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
}
