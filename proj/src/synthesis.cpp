#include "oral3d/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "oral3d/error.hpp"

namespace oral3d {

namespace {

constexpr int kPhantomCurveSamples = 2048;

// Partial-volume occupancy for a signed distance s (positive inside).
double ramp(double s, double width) { return std::clamp(s / width + 0.5, 0.0, 1.0); }

struct Tooth {
  Point2 center;
  Point2 tangent;
  Point2 normal;
  double z = 0.0;
  double half_t = 1.0;
  double half_n = 1.0;
  double half_z = 1.0;
};

}  // namespace

FVolume::FVolume(int w, int h, int d, double depth_step, float fill)
    : grid_(Dims3{w, h, d}, fill), depth_step_(depth_step) {
  if (!(depth_step > 0.0)) throw Error(ErrorCode::Validation, "depth_step must be > 0");
}

FVolume::FVolume(Volume3 grid, double depth_step) : grid_(std::move(grid)), depth_step_(depth_step) {
  if (!(depth_step > 0.0)) throw Error(ErrorCode::Validation, "depth_step must be > 0");
}

void PhantomSpec::validate() const {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw Error(ErrorCode::Validation, "phantom dims must be >= 1");
  if (teeth < 0) throw Error(ErrorCode::Validation, "tooth count must be >= 0");
  auto intensity_ok = [](float v) { return v > -1.0f && v <= 1.0f; };
  if (!intensity_ok(tooth_intensity) || !intensity_ok(band_intensity)) {
    throw Error(ErrorCode::Validation, "phantom intensities must lie in (-1, 1]");
  }
  if (!(curvature_max >= curvature_min) || !(y_base_max >= y_base_min) || !(half_span_max >= half_span_min) ||
      !(half_span_min > 0.0) || !(cubic_max >= 0.0)) {
    throw Error(ErrorCode::Validation, "phantom arch ranges must be ordered and positive");
  }
  if (!(band_half_thickness > 0.0) || !(edge_width > 0.0)) {
    throw Error(ErrorCode::Validation, "band half-thickness and edge width must be > 0");
  }
}

void SynthConfig::validate() const {
  if (tau < -1.0 || tau > 1.0) throw Error(ErrorCode::Validation, "synth.tau must lie in [-1, 1]");
  if (degree < 1) throw Error(ErrorCode::Validation, "synth.degree must be >= 1");
  if (w < 2) throw Error(ErrorCode::Validation, "synth.w must be >= 2");
  if (d < 1) throw Error(ErrorCode::Validation, "synth.d must be >= 1");
  if (!(depth_step > 0.0)) throw Error(ErrorCode::Validation, "synth.depth_step must be > 0");
  if (!(mu > 0.0)) throw Error(ErrorCode::Validation, "synth.mu must be > 0");
  if (!(d_half > 0.0)) throw Error(ErrorCode::Validation, "synth.d_half must be > 0");
}

std::pair<Volume3, ArchCurve> generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const Dims3 dims = spec.dims;
  const double cx = 0.5 * dims.nx;
  const double a = uniform(spec.curvature_min, spec.curvature_max);
  const double b = uniform(-spec.cubic_max, spec.cubic_max);
  const double yb = uniform(spec.y_base_min, spec.y_base_max);
  const double half_span = uniform(spec.half_span_min, spec.half_span_max);

  ArchCurve curve;
  curve.degree = 3;
  curve.coeffs = {yb + a * cx * cx - b * cx * cx * cx, -2.0 * a * cx + 3.0 * b * cx * cx, a - 3.0 * b * cx, b};
  curve.x_min = cx - half_span;
  curve.x_max = cx + half_span;

  const double band_z0 = uniform(8.0, 12.0) * dims.nz / 64.0;
  const double band_z1 = uniform(25.0, 30.0) * dims.nz / 64.0;
  const double band_t = spec.band_half_thickness * uniform(0.8, 1.2);

  const ArcSamples dense = sample_equal_arclength(curve, kPhantomCurveSamples);
  const double length = dense.step * (kPhantomCurveSamples - 1);

  std::vector<Tooth> teeth;
  teeth.reserve(spec.teeth);
  for (int k = 0; k < spec.teeth; ++k) {
    const double spacing = length / spec.teeth;
    const double s = (k + 0.5) * spacing;
    const int id = std::clamp(static_cast<int>(std::lround(s / dense.step)), 0, kPhantomCurveSamples - 1);
    Tooth t;
    t.center = dense.points[id];
    t.tangent = dense.tangents[id];
    t.normal = dense.normals[id];
    t.z = uniform(34.0, 40.0) * dims.nz / 64.0;
    t.half_t = std::min(uniform(2.8, 3.8), 0.3 * spacing);
    t.half_n = uniform(2.5, 4.5);
    t.half_z = uniform(7.0, 10.0) * dims.nz / 64.0;
    teeth.push_back(t);
  }

  Volume3 vol(dims, kAir);
  const double ew = spec.edge_width;
  std::vector<double> tooth_inplane(teeth.size());
  for (int j = 0; j < dims.ny; ++j) {
    for (int i = 0; i < dims.nx; ++i) {
      const Point2 p{i + 0.5, j + 0.5};
      double band_occ_xy = 0.0;
      if (spec.band) {
        const NearestSample ns = signed_distance(dense, p);
        const Point2 q = dense.points[ns.id];
        const Point2 n = dense.normals[ns.id];
        const double dn = (p.x - q.x) * n.x + (p.y - q.y) * n.y;
        const double inside_x = std::min(p.x - curve.x_min, curve.x_max - p.x);
        band_occ_xy = std::min(ramp(band_t - std::abs(dn), ew), ramp(inside_x, ew));
      }
      bool any_tooth = false;
      for (std::size_t t = 0; t < teeth.size(); ++t) {
        const Tooth& th = teeth[t];
        const double ox = p.x - th.center.x, oy = p.y - th.center.y;
        const double dt = (ox * th.tangent.x + oy * th.tangent.y) / th.half_t;
        const double dn = (ox * th.normal.x + oy * th.normal.y) / th.half_n;
        tooth_inplane[t] = dt * dt + dn * dn;
        any_tooth = any_tooth || tooth_inplane[t] < 4.0;
      }
      if (band_occ_xy == 0.0 && !any_tooth) continue;

      for (int z = 0; z < dims.nz; ++z) {
        double value = kAir;
        if (band_occ_xy > 0.0) {
          const double occ = std::min(band_occ_xy, ramp(std::min(z - band_z0, band_z1 - z), ew));
          value = std::max(value, -1.0 + occ * (spec.band_intensity + 1.0));
        }
        for (std::size_t t = 0; t < teeth.size(); ++t) {
          if (tooth_inplane[t] >= 4.0) continue;
          const Tooth& th = teeth[t];
          const double dz = (z - th.z) / th.half_z;
          const double r = std::sqrt(tooth_inplane[t] + dz * dz);
          const double surface = (1.0 - r) * std::min({th.half_t, th.half_n, th.half_z});
          value = std::max(value, -1.0 + ramp(surface, ew) * (spec.tooth_intensity + 1.0));
        }
        vol.at(i, j, z) = static_cast<float>(value);
      }
    }
  }
  return {std::move(vol), std::move(curve)};
}

FVolume flatten(const Volume3& v, const ArcSamples& samples, int d, double depth_step) {
  if (d < 1) throw Error(ErrorCode::Validation, "flatten depth count must be >= 1");
  if (!(depth_step > 0.0)) throw Error(ErrorCode::Validation, "flatten depth_step must be > 0");
  FVolume f(samples.size(), v.nz(), d, depth_step);
  for (int u = 0; u < samples.size(); ++u) {
    const Point2 p = samples.points[u];
    const Point2 n = samples.normals[u];
    for (int k = 0; k < d; ++k) {
      const double s = f.offset(k);
      // Axial frame -> voxel-index coordinates: centers sit at i + 0.5.
      const double xi = p.x + s * n.x - 0.5;
      const double yi = p.y + s * n.y - 0.5;
      for (int z = 0; z < v.nz(); ++z) {
        f.at(u, z, k) = static_cast<float>(sample_trilinear(v, xi, yi, z));
      }
    }
  }
  return f;
}

Image2 simulate_px(const Volume3& v, const ArcSamples& samples, int d, double depth_step, double mu) {
  if (!(mu > 0.0)) throw Error(ErrorCode::Validation, "attenuation mu must be > 0");
  return beer_lambert_projection(flatten(v, samples, d, depth_step), mu);
}

Image2 beer_lambert_projection(const FVolume& f, double mu) {
  if (!(mu > 0.0)) throw Error(ErrorCode::Validation, "attenuation mu must be > 0");
  const double depth_step = f.depth_step();
  Image2 px(f.w(), f.h());
  for (int z = 0; z < f.h(); ++z) {
    for (int u = 0; u < f.w(); ++u) {
      double path = 0.0;
      for (int k = 0; k < f.d(); ++k) {
        path += mu * std::max(0.0, (f.at(u, z, k) + 1.0) * 0.5) * depth_step;
      }
      px.at(u, z) = static_cast<float>(1.0 - 2.0 * std::exp(-path));
    }
  }
  return px;
}

Volume3 extract_band_roi(const Volume3& v, const ArcSamples& samples, double d_half) {
  if (!(d_half > 0.0)) throw Error(ErrorCode::Validation, "band half-width must be > 0");
  Volume3 out(v.dims(), kAir, v.spacing());
  for (int j = 0; j < v.ny(); ++j) {
    for (int i = 0; i < v.nx(); ++i) {
      const NearestSample ns = signed_distance(samples, {i + 0.5, j + 0.5});
      if (std::abs(ns.dist) > d_half) continue;
      for (int z = 0; z < v.nz(); ++z) out.at(i, j, z) = v.at(i, j, z);
    }
  }
  return out;
}

PairedSample synthesize_pair(const Volume3& v, const SynthConfig& cfg) {
  cfg.validate();
  const Image2 mip = mip_axial(v);
  std::vector<Point2> centerline = centerline_from_mip(mip, cfg.tau, cfg.degree);
  for (auto& p : centerline) {
    p.x += 0.5;
    p.y += 0.5;
  }
  const ArchFit fit = fit_arch(centerline, cfg.degree);

  PairedSample out;
  out.curve = fit.curve;
  out.fit_residual_rms = fit.residual_rms;
  out.samples = sample_equal_arclength(fit.curve, cfg.w);
  out.flat_gt = flatten(v, out.samples, cfg.d, cfg.depth_step);
  out.px = beer_lambert_projection(out.flat_gt, cfg.mu);
  out.curved_gt = extract_band_roi(v, out.samples, cfg.d_half);
  return out;
}

}  // namespace oral3d
