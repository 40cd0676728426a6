#pragma once

#include <cstdint>
#include <utility>

#include "oral3d/arch.hpp"
#include "oral3d/volume.hpp"

namespace oral3d {

/// Volume resampled along the arch: index (u, z, k) is the arc position u,
/// height z and depth sample k, stored u-fastest. Depth sample k sits at the
/// signed normal offset (k + 0.5 - d/2) * depth_step from the curve.
///
/// The storage order is the row-major layout of a (d, h, w) tensor, which is
/// exactly the generator's channels-first output with channels read as depth.
class FVolume {
 public:
  FVolume() = default;
  FVolume(int w, int h, int d, double depth_step, float fill = kAir);
  FVolume(Volume3 grid, double depth_step);

  int w() const { return grid_.nx(); }
  int h() const { return grid_.ny(); }
  int d() const { return grid_.nz(); }
  double depth_step() const { return depth_step_; }
  double offset(int k) const { return (k + 0.5 - 0.5 * d()) * depth_step_; }

  float& at(int u, int z, int k) { return grid_.at(u, z, k); }
  float at(int u, int z, int k) const { return grid_.at(u, z, k); }

  // The (u, z, k) grid viewed as a plain volume, for projections and IO.
  const Volume3& grid() const { return grid_; }
  Volume3& grid() { return grid_; }

  friend bool operator==(const FVolume&, const FVolume&) = default;

 private:
  Volume3 grid_;
  double depth_step_ = 1.0;
};

struct PhantomSpec {
  Dims3 dims{96, 80, 64};
  // Generating arch: y = y_base + curvature * (x - nx/2)^2 + cubic * (x - nx/2)^3
  // over x in nx/2 +- half_span.
  double curvature_min = 0.010;
  double curvature_max = 0.020;
  double cubic_max = 0.00008;  // |cubic| bound
  double y_base_min = 16.0;
  double y_base_max = 22.0;
  double half_span_min = 34.0;
  double half_span_max = 38.0;

  int teeth = 8;
  float tooth_intensity = 0.8f;
  bool band = true;
  float band_intensity = 0.2f;
  double band_half_thickness = 5.0;
  // Width of the partial-volume ramp on every surface, in voxels.
  double edge_width = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthConfig {
  double tau = 0.0;
  int degree = 3;
  int w = 128;
  int d = 32;
  double depth_step = 1.0;
  double mu = 0.1;
  double d_half = 16.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PairedSample {
  Image2 px;
  FVolume flat_gt;
  Volume3 curved_gt;
  ArchCurve curve;
  ArcSamples samples;
  double fit_residual_rms = 0.0;
};

// Procedural CBCT-like phantom plus the curve that generated it.
std::pair<Volume3, ArchCurve> generate_phantom(const PhantomSpec& spec);

// Curved planar reformation along the arch normals.
FVolume flatten(const Volume3& v, const ArcSamples& samples, int d, double depth_step);

// Absorption-only projection along each normal ray; pixel = 1 - 2 exp(-sum a dl).
Image2 simulate_px(const Volume3& v, const ArcSamples& samples, int d, double depth_step, double mu);
// Same projection applied to an already flattened volume.
Image2 beer_lambert_projection(const FVolume& f, double mu);

// Keep voxels within d_half of the arch (signed-distance band), air elsewhere.
Volume3 extract_band_roi(const Volume3& v, const ArcSamples& samples, double d_half);

PairedSample synthesize_pair(const Volume3& v, const SynthConfig& cfg);

}  // namespace oral3d
