#include "oral3d/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "oral3d/arch.hpp"
#include "oral3d/deformation.hpp"
#include "oral3d/error.hpp"
#include "oral3d/io.hpp"
#include "oral3d/nn/model_io.hpp"

namespace oral3d {

using nlohmann::json;

namespace {

std::string indexed(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", prefix, i);
  return buf;
}

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json history_json(const std::vector<nn::EpochRecord>& h) {
  json arr = json::array();
  for (const auto& r : h) {
    arr.push_back({{"epoch", r.epoch},
                   {"lr", r.lr},
                   {"loss_r", r.loss_r},
                   {"loss_p", r.loss_p},
                   {"loss_g", r.loss_g},
                   {"loss_d", r.loss_d},
                   {"gen_steps", r.gen_steps},
                   {"disc_steps", r.disc_steps},
                   {"disc_active", r.disc_active}});
  }
  return arr;
}

json report_json(const MetricReport& r) {
  json j = {{"psnr_db", std::isfinite(r.psnr_db) ? json(r.psnr_db) : json("inf")},
            {"ssim", r.ssim},
            {"dice", r.dice}};
  j["overall_pct"] = r.overall_pct ? json(*r.overall_pct) : json(nullptr);
  return j;
}

MethodScores mean_scores(const std::vector<MetricReport>& rs) {
  MethodScores m;
  for (const auto& r : rs) {
    m.psnr_db += r.psnr_db;
    m.ssim += r.ssim;
    m.dice += r.dice;
  }
  const double n = static_cast<double>(rs.size());
  m.psnr_db /= n;
  m.ssim /= n;
  m.dice /= n;
  m.overall_pct = std::isfinite(m.psnr_db) ? overall(m.psnr_db, m.ssim, m.dice) : 0.0;
  return m;
}

MetricReport as_report(const MethodScores& m) {
  return {m.psnr_db, m.ssim, m.dice, std::isfinite(m.psnr_db) ? std::optional<double>(m.overall_pct) : std::nullopt};
}

PhantomSpec phantom_spec(const PipelineConfig& cfg, int i) {
  PhantomSpec s = cfg.phantom;
  s.seed = phantom_seed(cfg.seed, i);
  return s;
}

}  // namespace

std::array<int, 3> split_counts(int n, const std::array<int, 3>& ratio) {
  if (n < 0) throw Error(ErrorCode::Validation, "cannot split a negative count");
  const int total = ratio[0] + ratio[1] + ratio[2];
  if (total <= 0) throw Error(ErrorCode::Validation, "ratio must not be all zero");
  std::array<int, 3> counts{};
  std::array<long, 3> rem{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const long num = static_cast<long>(n) * ratio[i];
    counts[i] = static_cast<int>(num / total);
    rem[i] = num % total;
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (rem[i] > rem[best]) best = i;
    }
    ++counts[best];
    rem[best] = -1;
    ++assigned;
  }
  return counts;
}

Split split_items(std::vector<std::string> items, const std::array<int, 3>& ratio, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(items.begin(), items.end(), rng);
  const auto c = split_counts(static_cast<int>(items.size()), ratio);
  Split s;
  s.train.assign(items.begin(), items.begin() + c[0]);
  s.val.assign(items.begin() + c[0], items.begin() + c[0] + c[1]);
  s.test.assign(items.begin() + c[0] + c[1], items.end());
  return s;
}

Mask3 roundtrip_band(const ArcSamples& samples, Dims3 dims, int d, double depth_step) {
  const double reach = (0.5 * d - 0.5) * depth_step;
  const int last = static_cast<int>(samples.size()) - 1;
  Mask3 m(dims, false);
  for (int j = 0; j < dims.ny; ++j) {
    for (int i = 0; i < dims.nx; ++i) {
      const NearestSample ns = signed_distance(samples, {i + 0.5, j + 0.5});
      if (std::abs(ns.dist) > reach || ns.id == 0 || ns.id == last) continue;
      for (int z = 0; z < dims.nz; ++z) m.set(i, j, z, true);
    }
  }
  return m;
}

RoundtripReport roundtrip(const Volume3& v, const SynthConfig& synth, const DeformConfig& deform_in, double tau) {
  RoundtripReport rep;
  const PairedSample pair = synthesize_pair(v, synth);
  rep.min_radius = min_curvature_radius(pair.curve);
  rep.guard_ok = rep.min_radius > 0.5 * synth.d * synth.depth_step;
  if (!rep.guard_ok) return rep;
  DeformConfig deform = deform_in;
  deform.out_w = v.nx();
  deform.out_d = v.ny();
  deform.depth_step = synth.depth_step;
  const Volume3 back = register_to_arch(pair.flat_gt, pair.samples, deform);
  const Mask3 band = roundtrip_band(pair.samples, v.dims(), synth.d, synth.depth_step);
  rep.band_voxels = band.count();
  if (rep.band_voxels == 0) throw Error(ErrorCode::EmptyBatch, "roundtrip band is empty");
  rep.psnr_db = psnr(back, pair.curved_gt, band);
  rep.dice = dice(back, pair.curved_gt, tau, band);
  for (std::size_t i = 0; i < band.bits().size(); ++i) {
    if (!band.bits()[i]) continue;
    rep.max_abs_error =
        std::max(rep.max_abs_error, std::abs(static_cast<double>(back.values()[i]) - pair.curved_gt.values()[i]));
  }
  return rep;
}

std::vector<fs::path> cmd_phantom(const PipelineConfig& cfg, int n, const fs::path& out_dir) {
  if (n < 1) throw Error(ErrorCode::Validation, "phantom count must be >= 1");
  std::vector<fs::path> out;
  for (int i = 0; i < n; ++i) {
    const auto [vol, curve] = generate_phantom(phantom_spec(cfg, i));
    const fs::path stem = out_dir / indexed("phantom", i);
    io::write_volume(stem, vol);
    io::write_curve(fs::path(stem).concat(".curve.json"), curve);
    out.push_back(fs::path(stem).concat(".json"));
  }
  return out;
}

Split cmd_split(const std::vector<std::string>& files, const std::array<int, 3>& ratio, std::uint64_t seed,
                const fs::path& out_dir) {
  const Split s = split_items(files, ratio, seed);
  io::write_text(out_dir / "train.json", json(s.train).dump(2) + "\n");
  io::write_text(out_dir / "val.json", json(s.val).dump(2) + "\n");
  io::write_text(out_dir / "test.json", json(s.test).dump(2) + "\n");
  return s;
}

void cmd_synth(const fs::path& volume, const PipelineConfig& cfg, const fs::path& out_dir) {
  const Volume3 v = io::read_volume(volume);
  const PairedSample s = synthesize_pair(v, cfg.synth);
  io::write_pgm(out_dir / "px.pgm", s.px);
  io::write_volume(out_dir / "px", Volume3(Dims3{s.px.width(), s.px.height(), 1},
                                            std::vector<float>(s.px.values().begin(), s.px.values().end())));
  io::write_flat(out_dir / "flat", s.flat_gt);
  io::write_volume(out_dir / "roi", s.curved_gt);
  io::write_curve(out_dir / "curve.json", s.curve);
}

int cmd_roundtrip(const fs::path& volume, const PipelineConfig& cfg, std::ostream& log) {
  const Volume3 v = io::read_volume(volume);
  const RoundtripReport r = roundtrip(v, cfg.synth, cfg.deform, cfg.metrics.tau);
  if (!r.guard_ok) {
    log << "warning: min curvature radius " << fixed(r.min_radius, 3) << " <= " << fixed(0.5 * cfg.synth.d * cfg.synth.depth_step, 3)
        << "; the band folds, roundtrip check skipped\n";
    return 0;
  }
  const json j = {{"psnr_db", std::isfinite(r.psnr_db) ? json(r.psnr_db) : json("inf")},
                  {"dice", r.dice},
                  {"max_abs_error", r.max_abs_error},
                  {"band_voxels", r.band_voxels},
                  {"min_radius", r.min_radius}};
  log << j.dump(2) << "\n";
  if (r.psnr_db < 30.0) {
    log << "roundtrip PSNR " << fixed(r.psnr_db, 2) << " dB is below 30 dB\n";
    return 2;
  }
  return 0;
}

std::string format_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t name_w = 4;
  for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());
  std::ostringstream out;
  auto cell = [&out](const std::string& s, std::size_t w, bool left) {
    if (left) {
      out << s << std::string(w > s.size() ? w - s.size() : 0, ' ');
    } else {
      out << std::string(w > s.size() ? w - s.size() : 0, ' ') << s;
    }
  };
  cell("name", name_w, true);
  for (const char* h : {"psnr_db", "ssim", "dice", "overall"}) {
    out << "  ";
    cell(h, 10, false);
  }
  out << "\n";
  for (const auto& [name, r] : rows) {
    cell(name, name_w, true);
    out << "  ";
    cell(fixed(r.psnr_db, 4), 10, false);
    out << "  ";
    cell(fixed(r.ssim, 4), 10, false);
    out << "  ";
    cell(fixed(r.dice, 4), 10, false);
    out << "  ";
    cell(r.overall_pct ? fixed(*r.overall_pct, 2) : "-", 10, false);
    out << "\n";
  }
  return out.str();
}

RunAllSummary cmd_run_all(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  // Phantoms and their synthetic pairs.
  std::vector<std::string> names;
  std::vector<PairedSample> pairs;
  for (int i = 0; i < cfg.phantom_count; ++i) {
    const auto [vol, curve] = generate_phantom(phantom_spec(cfg, i));
    const std::string name = indexed("phantom", i);
    io::write_volume(out / "phantoms" / name, vol);
    io::write_curve(out / "phantoms" / (name + ".curve.json"), curve);
    names.push_back(name);
    pairs.push_back(synthesize_pair(vol, cfg.synth));
  }
  log << "phantoms: " << names.size() << " generated (" << fixed(elapsed(), 1) << " s)\n";

  const Split split = cmd_split(names, cfg.split_ratio, cfg.seed, out / "split");
  auto lookup = [&](const std::vector<std::string>& subset) {
    std::vector<const PairedSample*> ps;
    for (const auto& n : subset) {
      const auto it = std::find(names.begin(), names.end(), n);
      ps.push_back(&pairs[static_cast<std::size_t>(it - names.begin())]);
    }
    return ps;
  };
  const auto train_set = lookup(split.train);
  const auto test_set = lookup(split.test);

  std::vector<nn::TrainingExample> train_ex, test_ex;
  for (const auto* p : train_set) train_ex.push_back(nn::make_example(*p));
  for (const auto* p : test_set) test_ex.push_back(nn::make_example(*p));

  RunAllSummary summary;
  summary.n_train = static_cast<int>(split.train.size());
  summary.n_val = static_cast<int>(split.val.size());
  summary.n_test = static_cast<int>(split.test.size());

  nn::ArchDescriptor arch = cfg.arch;
  arch.patch_size = cfg.train.patch_size;
  const auto untrained = nn::make_params<float>(arch, nn::Init::HeNormal, cfg.train.seed);
  summary.loss_r_untrained = nn::mean_reconstruction_loss(untrained, test_ex);

  auto [params, history] = nn::train(std::span<const nn::TrainingExample>(train_ex), cfg.train, arch,
                                     [&](const nn::EpochRecord& r) {
                                       log << "epoch " << r.epoch + 1 << "/" << cfg.train.epochs << " lr "
                                           << r.lr << " loss_r " << fixed(r.loss_r, 5) << " loss_p "
                                           << fixed(r.loss_p, 5);
                                       if (r.disc_active) {
                                         log << " loss_g " << fixed(r.loss_g, 4) << " loss_d "
                                             << fixed(r.loss_d, 4);
                                       }
                                       log << " (" << fixed(elapsed(), 1) << " s)\n";
                                     });
  summary.history = history;
  summary.loss_r_trained = nn::mean_reconstruction_loss(params, test_ex);
  nn::save_model(out / "model", params, cfg.train);
  io::write_text(out / "history.json", history_json(history).dump(2) + "\n");

  std::vector<std::pair<std::string, MetricReport>> rows;
  std::vector<MetricReport> model_reports, smear_reports;
  json per_sample = json::array();
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const PairedSample& s = *test_set[i];
    const Volume3 recon = reconstruct_curved(s.px, s.curve, params, cfg.deform);
    const Volume3 smear =
        register_to_arch(nn::smear_baseline(s.px, cfg.synth.d, cfg.synth.depth_step), s.samples, cfg.deform);
    const MetricReport rm = evaluate(recon, s.curved_gt, cfg.metrics.tau, cfg.metrics.ssim);
    const MetricReport rs = evaluate(smear, s.curved_gt, cfg.metrics.tau, cfg.metrics.ssim);
    model_reports.push_back(rm);
    smear_reports.push_back(rs);
    rows.emplace_back(split.test[i] + " model", rm);
    rows.emplace_back(split.test[i] + " smear", rs);
    per_sample.push_back({{"name", split.test[i]}, {"model", report_json(rm)}, {"smear", report_json(rs)}});
    if (i == 0) {
      const fs::path pv = out / "previews";
      io::write_pgm(pv / (split.test[i] + "_px.pgm"), s.px);
      io::write_pgm(pv / (split.test[i] + "_gt_mip.pgm"), mip_axial(s.curved_gt));
      io::write_pgm(pv / (split.test[i] + "_model_mip.pgm"), mip_axial(recon));
      io::write_pgm(pv / (split.test[i] + "_smear_mip.pgm"), mip_axial(smear));
    }
  }
  summary.model = mean_scores(model_reports);
  summary.smear = mean_scores(smear_reports);
  rows.emplace_back("mean model", as_report(summary.model));
  rows.emplace_back("mean smear", as_report(summary.smear));

  const json metrics = {{"tau", cfg.metrics.tau},
                        {"samples", per_sample},
                        {"mean", {{"model", report_json(as_report(summary.model))},
                                  {"smear", report_json(as_report(summary.smear))}}},
                        {"loss_r_untrained", summary.loss_r_untrained},
                        {"loss_r_trained", summary.loss_r_trained}};
  io::write_text(out / "metrics.json", metrics.dump(2) + "\n");
  const std::string table = format_metric_table(rows);
  io::write_text(out / "metrics.txt", table);
  io::write_text(out / "config.json", to_json(cfg).dump(2) + "\n");
  log << table;
  log << "held-out loss_r: untrained " << fixed(summary.loss_r_untrained, 5) << ", trained "
      << fixed(summary.loss_r_trained, 5) << " (" << fixed(elapsed(), 1) << " s)\n";
  return summary;
}

}  // namespace oral3d
