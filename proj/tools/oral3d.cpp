// oral3d: command-line driver for phantom synthesis, training,
// reconstruction and evaluation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oral3d/config.hpp"
#include "oral3d/deformation.hpp"
#include "oral3d/error.hpp"
#include "oral3d/io.hpp"
#include "oral3d/metrics.hpp"
#include "oral3d/nn/gradcheck.hpp"
#include "oral3d/nn/model_io.hpp"
#include "oral3d/nn/train.hpp"
#include "oral3d/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace oral3d;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kCheckFailed = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool want_out = true) {
  cmd->add_option("--config", c.config, "pipeline config JSON");
  cmd->add_option("--seed", c.seed, "override the config seed");
  if (want_out) cmd->add_option("--out", c.out, "output path");
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  if (c.seed) apply_seed(cfg, *c.seed);
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.validate();
  return cfg;
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw Error(ErrorCode::Validation, "--out is required");
  return c.out;
}

Image2 read_px(const fs::path& p) {
  if (p.extension() == ".pgm") return io::read_pgm(p);
  const Volume3 v = io::read_volume(p);
  if (v.nz() != 1) throw Error(ErrorCode::Dimension, p.string() + " is not a single-slice image");
  return Image2(v.nx(), v.ny(), std::vector<float>(v.values().begin(), v.values().end()));
}

std::string num(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oral-3D style panoramic-to-volume reconstruction on procedural phantoms"};
  app.require_subcommand(1);

  Common phantom_o, split_o, synth_o, flatten_o, deform_o, train_o, recon_o, round_o, run_o;

  int phantom_n = 1;
  auto* phantom = app.add_subcommand("phantom", "generate seeded phantom volumes and their curves");
  add_common(phantom, phantom_o);
  phantom->add_option("-n,--count", phantom_n, "number of phantoms")->check(CLI::PositiveNumber);

  std::vector<std::string> split_files;
  std::string split_ratio = "3:1:1";
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "seeded train/val/test manifests");
  split->add_option("files", split_files, "input files")->required();
  split->add_option("--ratio", split_ratio, "train:val:test");
  split->add_option("--seed", split_seed, "shuffle seed");
  split->add_option("--out", split_o.out, "manifest directory")->required();

  std::string synth_vol;
  auto* synth = app.add_subcommand("synth", "PX, flattened target, ROI and curve from a volume");
  add_common(synth, synth_o);
  synth->add_option("volume", synth_vol, "input volume")->required();

  std::string flatten_vol, flatten_curve;
  auto* flatten_cmd = app.add_subcommand("flatten", "resample a volume along its arch");
  add_common(flatten_cmd, flatten_o);
  flatten_cmd->add_option("volume", flatten_vol, "input volume")->required();
  flatten_cmd->add_option("--curve", flatten_curve, "curve JSON (fitted from the MIP when omitted)");

  std::string deform_flat, deform_curve;
  auto* deform = app.add_subcommand("deform", "place a flattened volume back on its arch");
  add_common(deform, deform_o);
  deform->add_option("flat", deform_flat, "flattened volume")->required();
  deform->add_option("--curve", deform_curve, "curve JSON")->required();

  std::string train_dir;
  auto* train_cmd = app.add_subcommand("train", "train on a directory of synth outputs");
  add_common(train_cmd, train_o);
  train_cmd->add_option("dataset", train_dir, "directory with one synth output per subdirectory")->required();

  nn::GradcheckConfig gc;
  auto* grad = app.add_subcommand("gradcheck", "compare backward() with finite differences");
  grad->add_option("--graphs", gc.graphs, "random graphs");
  grad->add_option("--seed", gc.seed, "graph seed");

  std::string recon_model, recon_px, recon_curve;
  auto* recon = app.add_subcommand("reconstruct", "model + PX + curve to a volume");
  add_common(recon, recon_o);
  recon->add_option("--model", recon_model, "model manifest")->required();
  recon->add_option("--px", recon_px, "PX image (.pgm or single-slice volume)")->required();
  recon->add_option("--curve", recon_curve, "curve JSON")->required();

  std::string eval_a, eval_b;
  double eval_tau = -0.8;
  auto* eval = app.add_subcommand("eval", "PSNR, SSIM, Dice and overall score");
  eval->add_option("a", eval_a, "volume")->required();
  eval->add_option("b", eval_b, "reference volume")->required();
  eval->add_option("--tau", eval_tau, "Dice threshold");

  std::string round_vol;
  auto* round = app.add_subcommand("roundtrip", "flatten then register, compared inside the band");
  add_common(round, round_o, false);
  round->add_option("volume", round_vol, "input volume")->required();

  auto* run = app.add_subcommand("run-all", "phantom, split, synth, train, reconstruct, eval");
  add_common(run, run_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*phantom) {
      const auto cfg = resolve(phantom_o);
      for (const auto& p : cmd_phantom(cfg, phantom_n, require_out(phantom_o))) std::cout << p.string() << "\n";
    } else if (*split) {
      const auto s = cmd_split(split_files, parse_ratio(split_ratio), split_seed, split_o.out);
      std::cout << "train " << s.train.size() << ", val " << s.val.size() << ", test " << s.test.size() << "\n";
    } else if (*synth) {
      cmd_synth(synth_vol, resolve(synth_o), require_out(synth_o));
    } else if (*flatten_cmd) {
      const auto cfg = resolve(flatten_o);
      const Volume3 v = io::read_volume(flatten_vol);
      FVolume flat;
      if (flatten_curve.empty()) {
        flat = synthesize_pair(v, cfg.synth).flat_gt;
      } else {
        const ArcSamples s = sample_equal_arclength(io::read_curve(flatten_curve), cfg.synth.w);
        flat = oral3d::flatten(v, s, cfg.synth.d, cfg.synth.depth_step);
      }
      io::write_flat(require_out(flatten_o), flat);
    } else if (*deform) {
      const auto cfg = resolve(deform_o);
      const FVolume flat = io::read_flat(deform_flat);
      DeformConfig dc = cfg.deform;
      dc.depth_step = flat.depth_step();
      const ArcSamples s = sample_equal_arclength(io::read_curve(deform_curve), flat.w());
      io::write_volume(require_out(deform_o), register_to_arch(flat, s, dc));
    } else if (*train_cmd) {
      const auto cfg = resolve(train_o);
      std::vector<fs::path> dirs;
      for (const auto& e : fs::directory_iterator(train_dir)) {
        if (e.is_directory()) dirs.push_back(e.path());
      }
      std::sort(dirs.begin(), dirs.end());
      std::vector<nn::TrainingExample> data;
      for (const auto& d : dirs) data.push_back(nn::make_example(read_px(d / "px.json"), io::read_flat(d / "flat")));
      nn::ArchDescriptor arch = cfg.arch;
      auto [params, history] = nn::train(std::span<const nn::TrainingExample>(data), cfg.train, arch,
                                         [&](const nn::EpochRecord& r) {
                                           std::cout << "epoch " << r.epoch + 1 << " loss_r " << num(r.loss_r)
                                                     << " loss_p " << num(r.loss_p) << "\n";
                                         });
      nn::save_model(require_out(train_o), params, cfg.train);
    } else if (*grad) {
      const auto rep = nn::run_gradcheck(gc);
      std::cout << "graphs " << rep.graphs << ", coordinates " << rep.checked << ", kink skips "
                << rep.skipped_kinks << ", max params " << rep.max_param_count << "\n";
      std::cout << "max relative error " << rep.max_rel_error << "\n";
      for (const auto& op : rep.missing_ops()) std::cout << "op not exercised: " << op << "\n";
      if (rep.max_rel_error >= 1e-4 || !rep.missing_ops().empty()) return kCheckFailed;
    } else if (*recon) {
      const auto cfg = resolve(recon_o);
      const auto params = nn::load_model(recon_model);
      DeformConfig dc = cfg.deform;
      io::write_volume(require_out(recon_o),
                       reconstruct_curved(read_px(recon_px), io::read_curve(recon_curve), params, dc));
    } else if (*eval) {
      const Volume3 a = io::read_volume(eval_a);
      const Volume3 b = io::read_volume(eval_b);
      const MetricReport r = evaluate(a, b, eval_tau);
      json j = {{"psnr_db", std::isfinite(r.psnr_db) ? json(r.psnr_db) : json("inf")},
                {"ssim", r.ssim},
                {"dice", r.dice},
                {"overall_pct", r.overall_pct ? json(*r.overall_pct) : json(nullptr)}};
      std::cout << j.dump(2) << "\n" << format_metric_table({{fs::path(eval_a).stem().string(), r}});
    } else if (*round) {
      return cmd_roundtrip(round_vol, resolve(round_o), std::cout);
    } else if (*run) {
      const auto cfg = resolve(run_o);
      cmd_run_all(cfg, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
