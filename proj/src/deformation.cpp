#include "oral3d/deformation.hpp"

#include <cmath>
#include <string>

#include "oral3d/error.hpp"
#include "oral3d/nn/network.hpp"

namespace oral3d {

void DeformConfig::validate() const {
  if (out_w < 1 || out_d < 1) throw Error(ErrorCode::Validation, "deform.out_w and deform.out_d must be >= 1");
  if (!(depth_step > 0.0)) throw Error(ErrorCode::Validation, "deform.depth_step must be > 0");
}

Volume3 register_to_arch(const FVolume& f, const ArcSamples& samples, const DeformConfig& cfg) {
  cfg.validate();
  if (samples.size() != f.w()) {
    throw Error(ErrorCode::Dimension, "arc sample count " + std::to_string(samples.size()) +
                                          " does not match flattened width " + std::to_string(f.w()));
  }
  const int h = f.h();
  const int d = f.d();
  Volume3 out(Dims3{cfg.out_w, cfg.out_d, h}, cfg.fill);
  for (int j = 0; j < cfg.out_d; ++j) {
    for (int i = 0; i < cfg.out_w; ++i) {
      const NearestSample ns = signed_distance(samples, {i + 0.5, j + 0.5});
      const double k_star = ns.dist / cfg.depth_step + 0.5 * d - 0.5;
      if (!(k_star >= 0.0 && k_star <= d - 1)) continue;
      const int k0 = static_cast<int>(std::floor(k_star));
      const int k1 = std::min(k0 + 1, d - 1);
      const double t = k_star - k0;
      for (int z = 0; z < h; ++z) {
        const double v = (1.0 - t) * f.at(ns.id, z, k0) + t * f.at(ns.id, z, k1);
        out.at(i, j, z) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Volume3 reconstruct_curved(const Image2& px, const ArchCurve& curve, const FlatGenerator& generator,
                           const DeformConfig& cfg) {
  const FVolume flat = generator(px);
  return register_to_arch(flat, sample_equal_arclength(curve, flat.w()), cfg);
}

Volume3 reconstruct_curved(const Image2& px, const ArchCurve& curve, const nn::NetParams<float>& gen,
                           const DeformConfig& cfg) {
  return reconstruct_curved(
      px, curve, [&](const Image2& img) { return nn::generator_forward(gen, img, cfg.depth_step); }, cfg);
}

}  // namespace oral3d
