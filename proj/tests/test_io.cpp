#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "oral3d/config.hpp"
#include "oral3d/error.hpp"
#include "oral3d/io.hpp"
#include "oral3d/nn/model_io.hpp"
#include "oral3d/pipeline.hpp"

namespace fs = std::filesystem;
using namespace oral3d;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("oral3d_io_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Volume3 random_volume(Dims3 d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Volume3 v(d, kAir, 0.4);
  for (float& x : v.values()) x = u(rng);
  return v;
}

template <class F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_CASE("volume, flat and curve files round-trip exactly") {
  TempDir tmp;
  const Volume3 v = random_volume({5, 6, 7}, 1);
  io::write_volume(tmp.path / "v.json", v);
  CHECK(fs::exists(tmp.path / "v.raw"));
  CHECK(fs::file_size(tmp.path / "v.raw") == 5 * 6 * 7 * 4);
  CHECK(io::read_volume(tmp.path / "v") == v);
  CHECK(io::read_volume(tmp.path / "v.raw") == v);
  CHECK(io::read_volume(tmp.path / "v.vol").spacing() == 0.4);

  FVolume f(random_volume({4, 3, 2}, 2), 0.75);
  io::write_flat(tmp.path / "sub" / "flat", f);
  CHECK(io::read_flat(tmp.path / "sub" / "flat") == f);

  const ArchCurve c{3, {1.0 / 3.0, -0.1, 1e-7, std::acos(-1.0)}, -2.5, 17.125};
  io::write_curve(tmp.path / "c.json", c);
  const ArchCurve back = io::read_curve(tmp.path / "c.json");
  CHECK(back.degree == 3);
  CHECK(back.coeffs == c.coeffs);
  CHECK(back.x_min == c.x_min);
  CHECK(back.x_max == c.x_max);
}

TEST_CASE("pgm keeps 16-bit precision") {
  TempDir tmp;
  Image2 img(7, 3);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (float& x : img.values()) x = u(rng);
  img.at(0, 0) = -1.0f;
  img.at(1, 0) = 1.0f;
  io::write_pgm(tmp.path / "a.pgm", img);
  const Image2 back = io::read_pgm(tmp.path / "a.pgm");
  CHECK(back.width() == 7);
  CHECK(back.height() == 3);
  for (std::size_t i = 0; i < img.values().size(); ++i)
    CHECK(std::abs(back.values()[i] - img.values()[i]) <= 1.0 / 65535 + 1e-7);
  CHECK(back.at(0, 0) == -1.0f);
  CHECK(back.at(1, 0) == 1.0f);
  const auto bytes = io::read_bytes(tmp.path / "a.pgm");
  CHECK(std::string(bytes.begin(), bytes.begin() + 2) == "P5");
}

TEST_CASE("bad files raise IO errors") {
  TempDir tmp;
  expect_code(ErrorCode::Io, [&] { io::read_volume(tmp.path / "missing"); });
  io::write_volume(tmp.path / "short", Volume3({2, 2, 2}));
  io::write_bytes(tmp.path / "short.raw", std::vector<std::uint8_t>(5, 0));
  expect_code(ErrorCode::Io, [&] { io::read_volume(tmp.path / "short"); });
  io::write_text(tmp.path / "x.pgm", "P2\n1 1\n255\n0\n");
  expect_code(ErrorCode::Io, [&] { io::read_pgm(tmp.path / "x.pgm"); });
}

TEST_CASE("model files round-trip") {
  TempDir tmp;
  nn::ArchDescriptor arch;
  arch.in_h = 16;
  arch.in_w = 32;
  arch.stages = 2;
  arch.depth = 8;
  arch.patch_size = 8;
  arch.disc_layers = 2;
  const auto params = nn::make_params<float>(arch, nn::Init::HeNormal, 9);
  nn::save_model(tmp.path / "m", params, nn::TrainConfig{});
  const auto back = nn::load_model(tmp.path / "m");
  CHECK(back.arch == arch);
  REQUIRE(back.generator.size() == params.generator.size());
  for (std::size_t i = 0; i < params.generator.size(); ++i) {
    CHECK(back.generator[i].name == params.generator[i].name);
    CHECK(back.generator[i].value == params.generator[i].value);
  }
  for (std::size_t i = 0; i < params.discriminator.size(); ++i)
    CHECK(back.discriminator[i].value == params.discriminator[i].value);
  CHECK(fs::file_size(tmp.path / "m.bin") == params.parameter_count() * 4);

  // Saving what was loaded gives the same bytes.
  nn::save_model(tmp.path / "m2", back, nn::TrainConfig{});
  CHECK(io::read_bytes(tmp.path / "m.bin") == io::read_bytes(tmp.path / "m2.bin"));

  io::write_bytes(tmp.path / "m.bin", std::vector<std::uint8_t>(12, 0));
  expect_code(ErrorCode::Io, [&] { nn::load_model(tmp.path / "m"); });
}

TEST_CASE("config parsing") {
  const PipelineConfig def;
  const nlohmann::json j = to_json(def);
  const PipelineConfig back = parse_config(j);
  CHECK(back.seed == def.seed);
  CHECK(back.synth.w == def.synth.w);
  CHECK(back.train.lr0 == def.train.lr0);
  CHECK(back.split_ratio == def.split_ratio);
  CHECK(to_json(back) == j);

  nlohmann::json missing = j;
  missing["train"].erase("lr0");
  try {
    parse_config(missing);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
    CHECK(std::string(e.what()).find("train.lr0") != std::string::npos);
  }
  nlohmann::json wrong = j;
  wrong["synth"]["w"] = "wide";
  expect_code(ErrorCode::Validation, [&] { parse_config(wrong); });

  CHECK(parse_ratio("3:1:1") == std::array<int, 3>{3, 1, 1});
  CHECK(parse_ratio("10:0:5") == std::array<int, 3>{10, 0, 5});
  for (const char* bad : {"3:1", "3:1:1:1", "a:1:1", "3::1", ""})
    expect_code(ErrorCode::Validation, [&] { parse_ratio(bad); });

  PipelineConfig s = def;
  apply_seed(s, 42);
  CHECK(s.seed == 42);
  CHECK(s.train.seed != def.train.seed);
  CHECK(phantom_seed(42, 0) == phantom_seed(42, 0));
  std::set<std::uint64_t> seeds;
  for (int i = 0; i < 100; ++i) seeds.insert(phantom_seed(42, i));
  CHECK(seeds.size() == 100);
}

TEST_CASE("split") {
  CHECK(split_counts(100, {3, 1, 1}) == std::array<int, 3>{60, 20, 20});
  CHECK(split_counts(5, {3, 1, 1}) == std::array<int, 3>{3, 1, 1});
  CHECK(split_counts(50, {3, 1, 1}) == std::array<int, 3>{30, 10, 10});
  CHECK(split_counts(7, {3, 1, 1}) == std::array<int, 3>{4, 2, 1});
  for (int n = 0; n < 40; ++n) {
    const auto c = split_counts(n, {3, 1, 1});
    CHECK(c[0] + c[1] + c[2] == n);
  }

  std::vector<std::string> items;
  for (int i = 0; i < 100; ++i) items.push_back("f" + std::to_string(i));
  const Split a = split_items(items, {3, 1, 1}, 7), b = split_items(items, {3, 1, 1}, 7);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.size() == 60);
  std::set<std::string> all(a.train.begin(), a.train.end());
  all.insert(a.val.begin(), a.val.end());
  all.insert(a.test.begin(), a.test.end());
  CHECK(all.size() == 100);
  CHECK(split_items(items, {3, 1, 1}, 8).train != a.train);
}

TEST_CASE("phantom command is deterministic") {
  TempDir tmp;
  PipelineConfig cfg;
  apply_seed(cfg, 3);
  const auto first = cmd_phantom(cfg, 3, tmp.path / "a");
  const auto second = cmd_phantom(cfg, 3, tmp.path / "b");
  REQUIRE(first.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const fs::path ra = io::volume_stem(first[i]).string() + ".raw";
    const fs::path rb = io::volume_stem(second[i]).string() + ".raw";
    CHECK(io::read_bytes(ra) == io::read_bytes(rb));
    const Volume3 v = io::read_volume(first[i]);
    io::write_volume(tmp.path / "again", v);
    CHECK(io::read_volume(tmp.path / "again") == v);
  }
  CHECK_FALSE(io::read_volume(first[0]) == io::read_volume(first[1]));
  CHECK_FALSE(io::read_volume(first[1]) == io::read_volume(first[2]));
}
