#pragma once

#include <functional>

#include "oral3d/arch.hpp"
#include "oral3d/synthesis.hpp"
#include "oral3d/volume.hpp"

namespace oral3d {

namespace nn {
template <class T>
struct NetParams;
}

struct DeformConfig {
  int out_w = 96;   // output extent along x
  int out_d = 80;   // output extent along y (depth of the axial plane)
  double depth_step = 1.0;
  float fill = kAir;

  void validate() const;
};

/// Embeds the sagittal slices of a flattened volume along the arch and
/// interpolates along depth.
///
/// Every output column at axial voxel (i, j) takes the slice of its nearest
/// arc sample and reads it at the fractional depth index
/// dist / depth_step + d/2 - 0.5, linearly interpolated between the two
/// neighbouring depth samples. Columns whose depth index falls outside
/// [0, d - 1] get the fill value. The result is a Volume3 of dims
/// (out_w, out_d, h) with z as height, so it lines up with the source volume.
Volume3 register_to_arch(const FVolume& f, const ArcSamples& samples, const DeformConfig& cfg);

using FlatGenerator = std::function<FVolume(const Image2&)>;

// generator(px) placed on the arch sampled with px.width() points.
Volume3 reconstruct_curved(const Image2& px, const ArchCurve& curve, const FlatGenerator& generator,
                           const DeformConfig& cfg);

Volume3 reconstruct_curved(const Image2& px, const ArchCurve& curve, const nn::NetParams<float>& gen,
                           const DeformConfig& cfg);

}  // namespace oral3d
