#include "oral3d/config.hpp"

#include <random>

#include "oral3d/error.hpp"
#include "oral3d/io.hpp"

namespace oral3d {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::Validation, "config key '" + label() + "' must be an object");
  }

  template <class T>
  T get(const char* key) const {
    const std::string where = path_.empty() ? key : path_ + "." + key;
    if (!j_.contains(key)) throw Error(ErrorCode::Validation, "missing config key '" + where + "'");
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::Validation, "config key '" + where + "' has the wrong type");
    }
  }

  Section sub(const char* key) const {
    const std::string where = path_.empty() ? key : path_ + "." + key;
    if (!j_.contains(key)) throw Error(ErrorCode::Validation, "missing config key '" + where + "'");
    return Section(j_.at(key), where);
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  const json& j_;
  std::string path_;
};

}  // namespace

void PipelineConfig::validate() const {
  if (phantom_count < 1) throw Error(ErrorCode::Validation, "phantom.count must be >= 1");
  phantom.validate();
  synth.validate();
  arch.validate();
  train.validate();
  deform.validate();
  metrics.ssim.validate();
  if (metrics.tau < -1.0 || metrics.tau > 1.0) throw Error(ErrorCode::Validation, "metrics.tau must lie in [-1, 1]");
  if (arch.patch_size != train.patch_size) {
    throw Error(ErrorCode::Validation, "train.patch_size must match the discriminator patch size");
  }
  if (deform.out_w != phantom.dims.nx || deform.out_d != phantom.dims.ny) {
    throw Error(ErrorCode::Validation, "registered volume must match the phantom grid");
  }
  if (train.patch_size > synth.w || train.patch_size > synth.d || train.patch_size > phantom.dims.nz) {
    throw Error(ErrorCode::Validation, "train.patch_size exceeds a flattened volume extent");
  }
  for (int r : split_ratio) {
    if (r < 0) throw Error(ErrorCode::Validation, "split ratio parts must be >= 0");
  }
  if (split_ratio[0] < 1 || split_ratio[2] < 1) {
    throw Error(ErrorCode::Validation, "split ratio needs nonzero train and test parts");
  }
  if (out_dir.empty()) throw Error(ErrorCode::Validation, "paths.out must be set");
}

std::array<int, 3> parse_ratio(const std::string& s) {
  std::array<int, 3> r{};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? s.find(':', start) : s.size();
    if (end == std::string::npos) throw Error(ErrorCode::Validation, "ratio must look like 3:1:1, got '" + s + "'");
    const std::string part = s.substr(start, end - start);
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorCode::Validation, "ratio must look like 3:1:1, got '" + s + "'");
    }
    r[i] = std::stoi(part);
    start = end + 1;
  }
  if (r[0] + r[1] + r[2] == 0) throw Error(ErrorCode::Validation, "ratio must not be all zero");
  return r;
}

std::uint64_t phantom_seed(std::uint64_t run_seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                    static_cast<std::uint32_t>(index), 0x0a7a13d5u};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void apply_seed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.phantom.seed = seed;
  cfg.synth.seed = seed;
  cfg.train.seed = seed;
}

PipelineConfig parse_config(const json& j) {
  const Section root(j, "");
  PipelineConfig c;
  c.seed = root.get<std::uint64_t>("seed");

  const Section ph = root.sub("phantom");
  c.phantom_count = ph.get<int>("count");
  const auto dims = ph.get<std::array<int, 3>>("dims");
  c.phantom.dims = {dims[0], dims[1], dims[2]};
  c.phantom.curvature_min = ph.get<double>("curvature_min");
  c.phantom.curvature_max = ph.get<double>("curvature_max");
  c.phantom.cubic_max = ph.get<double>("cubic_max");
  c.phantom.y_base_min = ph.get<double>("y_base_min");
  c.phantom.y_base_max = ph.get<double>("y_base_max");
  c.phantom.half_span_min = ph.get<double>("half_span_min");
  c.phantom.half_span_max = ph.get<double>("half_span_max");
  c.phantom.teeth = ph.get<int>("teeth");
  c.phantom.tooth_intensity = ph.get<float>("tooth_intensity");
  c.phantom.band = ph.get<bool>("band");
  c.phantom.band_intensity = ph.get<float>("band_intensity");
  c.phantom.band_half_thickness = ph.get<double>("band_half_thickness");
  c.phantom.edge_width = ph.get<double>("edge_width");

  const Section sy = root.sub("synth");
  c.synth.tau = sy.get<double>("tau");
  c.synth.degree = sy.get<int>("degree");
  c.synth.w = sy.get<int>("w");
  c.synth.d = sy.get<int>("d");
  c.synth.depth_step = sy.get<double>("depth_step");
  c.synth.mu = sy.get<double>("mu");
  c.synth.d_half = sy.get<double>("d_half");

  const Section ar = root.sub("arch");
  c.arch.stages = ar.get<int>("stages");
  c.arch.base_channels = ar.get<int>("base_channels");
  c.arch.growth = ar.get<int>("growth");
  c.arch.dense_layers = ar.get<int>("dense_layers");
  c.arch.disc_base = ar.get<int>("disc_base");
  c.arch.disc_layers = ar.get<int>("disc_layers");
  c.arch.in_w = c.synth.w;
  c.arch.in_h = c.phantom.dims.nz;
  c.arch.depth = c.synth.d;

  const Section tr = root.sub("train");
  c.train.lambda1 = tr.get<double>("lambda1");
  c.train.lambda2 = tr.get<double>("lambda2");
  c.train.lambda3 = tr.get<double>("lambda3");
  c.train.lr0 = tr.get<double>("lr0");
  c.train.decay_factor = tr.get<double>("decay_factor");
  c.train.decay_period = tr.get<int>("decay_period");
  c.train.epochs = tr.get<int>("epochs");
  c.train.d_start_epoch = tr.get<int>("d_start_epoch");
  c.train.patch_size = tr.get<int>("patch_size");
  c.train.patches_per_step = tr.get<int>("patches_per_step");
  const Section ad = tr.sub("adam");
  c.train.adam.beta1 = ad.get<double>("beta1");
  c.train.adam.beta2 = ad.get<double>("beta2");
  c.train.adam.eps = ad.get<double>("eps");
  c.arch.patch_size = c.train.patch_size;

  const Section de = root.sub("deform");
  c.deform.fill = de.get<float>("fill");
  c.deform.out_w = c.phantom.dims.nx;
  c.deform.out_d = c.phantom.dims.ny;
  c.deform.depth_step = c.synth.depth_step;

  const Section me = root.sub("metrics");
  c.metrics.tau = me.get<double>("tau");
  c.metrics.ssim.window = me.get<int>("ssim_window");
  c.metrics.ssim.sigma = me.get<double>("ssim_sigma");

  c.split_ratio = parse_ratio(root.sub("split").get<std::string>("ratio"));
  c.out_dir = root.sub("paths").get<std::string>("out");

  apply_seed(c, c.seed);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(io::read_text(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, p.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const PipelineConfig& c) {
  const auto& p = c.phantom;
  const auto& t = c.train;
  return {
      {"seed", c.seed},
      {"phantom",
       {{"count", c.phantom_count},
        {"dims", {p.dims.nx, p.dims.ny, p.dims.nz}},
        {"curvature_min", p.curvature_min},
        {"curvature_max", p.curvature_max},
        {"cubic_max", p.cubic_max},
        {"y_base_min", p.y_base_min},
        {"y_base_max", p.y_base_max},
        {"half_span_min", p.half_span_min},
        {"half_span_max", p.half_span_max},
        {"teeth", p.teeth},
        {"tooth_intensity", p.tooth_intensity},
        {"band", p.band},
        {"band_intensity", p.band_intensity},
        {"band_half_thickness", p.band_half_thickness},
        {"edge_width", p.edge_width}}},
      {"synth",
       {{"tau", c.synth.tau},
        {"degree", c.synth.degree},
        {"w", c.synth.w},
        {"d", c.synth.d},
        {"depth_step", c.synth.depth_step},
        {"mu", c.synth.mu},
        {"d_half", c.synth.d_half}}},
      {"arch",
       {{"stages", c.arch.stages},
        {"base_channels", c.arch.base_channels},
        {"growth", c.arch.growth},
        {"dense_layers", c.arch.dense_layers},
        {"disc_base", c.arch.disc_base},
        {"disc_layers", c.arch.disc_layers}}},
      {"train",
       {{"lambda1", t.lambda1},
        {"lambda2", t.lambda2},
        {"lambda3", t.lambda3},
        {"lr0", t.lr0},
        {"decay_factor", t.decay_factor},
        {"decay_period", t.decay_period},
        {"epochs", t.epochs},
        {"d_start_epoch", t.d_start_epoch},
        {"patch_size", t.patch_size},
        {"patches_per_step", t.patches_per_step},
        {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}}}},
      {"deform", {{"fill", c.deform.fill}}},
      {"metrics", {{"tau", c.metrics.tau}, {"ssim_window", c.metrics.ssim.window}, {"ssim_sigma", c.metrics.ssim.sigma}}},
      {"split",
       {{"ratio", std::to_string(c.split_ratio[0]) + ":" + std::to_string(c.split_ratio[1]) + ":" +
                      std::to_string(c.split_ratio[2])}}},
      {"paths", {{"out", c.out_dir.string()}}},
  };
}

}  // namespace oral3d
