#include <doctest.h>

#include <cmath>
#include <random>

#include "oral3d/error.hpp"
#include "oral3d/nn/losses.hpp"
#include "oral3d/nn/network.hpp"

using namespace oral3d;
using namespace oral3d::nn;

namespace {

Image2 random_px(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Image2 img(w, h);
  for (float& x : img.values()) x = u(rng);
  return img;
}

Tensor<float> random_patch(int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor<float> t({1, p, p, p});
  for (float& x : t.data) x = u(rng);
  return t;
}

std::size_t conv_count(std::size_t cout, std::size_t cin, std::size_t k, int dims) {
  std::size_t taps = 1;
  for (int i = 0; i < dims; ++i) taps *= k;
  return cout * cin * taps + cout;
}

// Parameter count written out from the layer plan.
std::size_t expected_count(const ArchDescriptor& a) {
  std::size_t n = conv_count(a.base_channels, 1, 3, 2);
  auto enc = [&](int s) { return a.base_channels + s * a.dense_layers * a.growth; };
  for (int s = 1; s <= a.stages; ++s) {
    const int c = enc(s - 1);
    n += conv_count(c, c, 3, 2);
    for (int l = 0; l < a.dense_layers; ++l) n += conv_count(a.growth, c + l * a.growth, 3, 2);
  }
  int cur = enc(a.stages);
  for (int s = a.stages; s >= 1; --s) {
    const int skip = enc(s - 1);
    const int out = s > 1 ? skip : a.depth;
    n += conv_count(out, cur + skip, 1, 2);
    for (int l = 0; l < a.dense_layers; ++l) n += conv_count(a.growth, out + l * a.growth, 3, 2);
    n += conv_count(out, out + a.dense_layers * a.growth, 1, 2);
    cur = out;
  }
  n += conv_count(a.depth, a.depth, 3, 2);
  int cin = 1;
  for (int l = 0; l < a.disc_layers; ++l) {
    n += conv_count(a.disc_base << l, cin, 4, 3);
    cin = a.disc_base << l;
  }
  return n + conv_count(1, cin, 3, 3);
}

}  // namespace

TEST_CASE("zero network") {
  const ArchDescriptor arch;
  const auto params = make_params<float>(arch, Init::Zero, 0);
  const FVolume out = generator_forward(params, random_px(128, 64, 1));
  CHECK(out.w() == 128);
  CHECK(out.h() == 64);
  CHECK(out.d() == 32);
  for (float x : out.grid().values()) CHECK(x == 0.0f);
  CHECK(discriminator_forward(params, random_patch(24, 2)) == 0.5);
}

TEST_CASE("parameter shapes follow the descriptor") {
  const ArchDescriptor arch;
  const auto params = make_params<float>(arch, Init::HeNormal, 3);
  CHECK(params.parameter_count() == expected_count(arch));
  CHECK(params.generator.back().value.shape == Shape{32});
  CHECK(params.generator[params.generator.size() - 2].value.shape == Shape{32, 32, 3, 3});
  CHECK(params.generator.back().name == "final.b");

  ArchDescriptor small;
  small.in_h = 16;
  small.in_w = 24;
  small.stages = 2;
  small.base_channels = 6;
  small.growth = 3;
  small.dense_layers = 3;
  small.depth = 10;
  small.patch_size = 8;
  small.disc_base = 2;
  small.disc_layers = 2;
  CHECK(make_params<double>(small, Init::Zero, 0).parameter_count() == expected_count(small));
  const FVolume out = generator_forward(make_params<float>(small, Init::HeNormal, 1), random_px(24, 16, 4));
  CHECK(out.w() == 24);
  CHECK(out.h() == 16);
  CHECK(out.d() == 10);
}

TEST_CASE("random network is pure and bounded") {
  const ArchDescriptor arch;
  const auto params = make_params<float>(arch, Init::HeNormal, 7);
  const Image2 px = random_px(128, 64, 5);
  const FVolume a = generator_forward(params, px);
  const FVolume b = generator_forward(params, px);
  CHECK(a == b);
  for (float x : a.grid().values()) {
    CHECK(x > -1.0f);
    CHECK(x < 1.0f);
  }
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Tensor<float> patch = random_patch(24, 10 + s);
    const double score = discriminator_forward(params, patch);
    CHECK(score > 0.0);
    CHECK(score < 1.0);
    CHECK(discriminator_forward(params, patch) == score);
  }
  CHECK(make_params<float>(arch, Init::HeNormal, 7).generator[0].value == params.generator[0].value);
}

TEST_CASE("float and double graphs agree") {
  ArchDescriptor arch;
  arch.in_h = 16;
  arch.in_w = 32;
  arch.stages = 2;
  arch.depth = 8;
  const auto pd = make_params<double>(arch, Init::HeNormal, 11);
  const Image2 px = random_px(32, 16, 12);
  Graph<double> g;
  const auto vars = bind(g, pd.generator, false);
  const auto y = generator_graph<double>(g, arch, vars, g.input(image_tensor<double>(px)));
  const FVolume f = generator_forward(pd.cast<float>(), px);
  const auto& ref = g.value(y).data;
  const auto vals = f.grid().values();
  REQUIRE(ref.size() == vals.size());
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(ref[i] - vals[i]) < 1e-4);
}

TEST_CASE("shape errors") {
  const ArchDescriptor arch;
  const auto params = make_params<float>(arch, Init::Zero, 0);
  try {
    generator_forward(params, random_px(100, 64, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Dimension);
  }
  try {
    discriminator_forward(params, random_patch(16, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Dimension);
  }
  ArchDescriptor odd;
  odd.in_h = 60;
  CHECK_THROWS_AS(odd.validate(), Error);
}

TEST_CASE("smear baseline") {
  const FVolume c = smear_baseline(Image2(8, 5, 0.3f), 6);
  CHECK(c.w() == 8);
  CHECK(c.h() == 5);
  CHECK(c.d() == 6);
  for (float x : c.grid().values()) CHECK(x == 0.3f);

  const Image2 px = random_px(8, 5, 3);
  const FVolume s = smear_baseline(px, 4);
  for (int k = 0; k < 4; ++k)
    for (int z = 0; z < 5; ++z)
      for (int u = 0; u < 8; ++u) CHECK(s.at(u, z, k) == px.at(u, z));
  CHECK(loss_projection(s, s) == 0.0);
}
