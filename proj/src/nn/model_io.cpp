#include "oral3d/nn/model_io.hpp"

#include <string>

#include <json.hpp>

#include "oral3d/error.hpp"
#include "oral3d/io.hpp"

namespace oral3d::nn {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path model_stem(const fs::path& p) {
  const auto ext = p.extension();
  if (ext == ".json" || ext == ".bin" || ext == ".model") return fs::path(p).replace_extension();
  return p;
}

json arch_json(const ArchDescriptor& a) {
  return {{"in_h", a.in_h},           {"in_w", a.in_w},       {"stages", a.stages},
          {"base_channels", a.base_channels}, {"growth", a.growth},   {"dense_layers", a.dense_layers},
          {"depth", a.depth},         {"patch_size", a.patch_size}, {"disc_base", a.disc_base},
          {"disc_layers", a.disc_layers}};
}

ArchDescriptor arch_from_json(const json& j) {
  ArchDescriptor a;
  a.in_h = j.at("in_h").get<int>();
  a.in_w = j.at("in_w").get<int>();
  a.stages = j.at("stages").get<int>();
  a.base_channels = j.at("base_channels").get<int>();
  a.growth = j.at("growth").get<int>();
  a.dense_layers = j.at("dense_layers").get<int>();
  a.depth = j.at("depth").get<int>();
  a.patch_size = j.at("patch_size").get<int>();
  a.disc_base = j.at("disc_base").get<int>();
  a.disc_layers = j.at("disc_layers").get<int>();
  return a;
}

json train_json(const TrainConfig& c) {
  return {{"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"lambda3", c.lambda3},
          {"lr0", c.lr0},
          {"decay_factor", c.decay_factor},
          {"decay_period", c.decay_period},
          {"epochs", c.epochs},
          {"d_start_epoch", c.d_start_epoch},
          {"patch_size", c.patch_size},
          {"patches_per_step", c.patches_per_step},
          {"seed", c.seed},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}}};
}

}  // namespace

void save_model(const fs::path& stem_in, const NetParams<float>& params, const std::optional<TrainConfig>& cfg) {
  const fs::path stem = model_stem(stem_in);
  json manifest;
  manifest["format"] = "oral3d-model";
  manifest["version"] = 1;
  manifest["arch"] = arch_json(params.arch);
  std::vector<std::uint8_t> blob;
  auto list = [&blob](const std::vector<NamedTensor<float>>& ts) {
    json arr = json::array();
    for (const auto& t : ts) {
      arr.push_back({{"name", t.name}, {"shape", t.value.shape}});
      io::append_f32le(blob, t.value.data);
    }
    return arr;
  };
  manifest["generator"] = list(params.generator);
  manifest["discriminator"] = list(params.discriminator);
  manifest["blob"] = fs::path(stem).concat(".bin").filename().string();
  manifest["train_config"] = cfg ? train_json(*cfg) : json(nullptr);
  io::write_bytes(fs::path(stem).concat(".bin"), blob);
  io::write_text(fs::path(stem).concat(".json"), manifest.dump(2) + "\n");
}

NetParams<float> load_model(const fs::path& stem_in) {
  const fs::path stem = model_stem(stem_in);
  const fs::path mp = fs::path(stem).concat(".json");
  NetParams<float> declared;
  try {
    const json manifest = json::parse(io::read_text(mp));
    if (manifest.value("format", "") != "oral3d-model") throw Error(ErrorCode::Io, mp.string() + ": not a model manifest");
    declared.arch = arch_from_json(manifest.at("arch"));
    auto read_list = [](const json& arr, std::vector<NamedTensor<float>>& out) {
      for (const auto& e : arr) out.push_back({e.at("name").get<std::string>(), Tensor<float>(e.at("shape").get<Shape>())});
    };
    read_list(manifest.at("generator"), declared.generator);
    read_list(manifest.at("discriminator"), declared.discriminator);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, mp.string() + ": " + e.what());
  }
  declared.arch.validate();

  // The manifest must agree with the layout implied by the descriptor.
  const NetParams<float> expected = make_params<float>(declared.arch, Init::Zero, 0);
  auto check = [&mp](const std::vector<NamedTensor<float>>& got, const std::vector<NamedTensor<float>>& want) {
    if (got.size() != want.size()) throw Error(ErrorCode::Io, mp.string() + ": tensor count does not match the descriptor");
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].name != want[i].name || got[i].value.shape != want[i].value.shape) {
        throw Error(ErrorCode::Io, mp.string() + ": tensor " + got[i].name + " " + shape_string(got[i].value.shape) +
                                       " does not match " + want[i].name + " " + shape_string(want[i].value.shape));
      }
    }
  };
  check(declared.generator, expected.generator);
  check(declared.discriminator, expected.discriminator);

  const auto values = io::parse_f32le(io::read_bytes(fs::path(stem).concat(".bin")));
  std::size_t pos = 0;
  for (auto* list : {&declared.generator, &declared.discriminator}) {
    for (auto& t : *list) {
      if (pos + t.value.size() > values.size()) throw Error(ErrorCode::Io, "model blob is shorter than the manifest");
      std::copy(values.begin() + pos, values.begin() + pos + t.value.size(), t.value.data.begin());
      pos += t.value.size();
    }
  }
  if (pos != values.size()) throw Error(ErrorCode::Io, "model blob is longer than the manifest");
  return declared;
}

}  // namespace oral3d::nn
