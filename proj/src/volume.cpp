#include "oral3d/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oral3d/error.hpp"

namespace oral3d {

namespace {

void require_dims(Dims3 d) {
  if (d.nx < 1 || d.ny < 1 || d.nz < 1) {
    throw Error(ErrorCode::Dimension, "volume dims must be >= 1, got " + std::to_string(d.nx) + "x" +
                                          std::to_string(d.ny) + "x" + std::to_string(d.nz));
  }
}

}  // namespace

Volume3::Volume3(Dims3 dims, float fill, double spacing) : dims_(dims), spacing_(spacing) {
  require_dims(dims);
  values_.assign(dims.count(), fill);
}

Volume3::Volume3(Dims3 dims, std::vector<float> values, double spacing)
    : dims_(dims), spacing_(spacing), values_(std::move(values)) {
  require_dims(dims);
  if (values_.size() != dims.count()) {
    throw Error(ErrorCode::Dimension, "value count " + std::to_string(values_.size()) +
                                          " does not match dims (" + std::to_string(dims.count()) + ")");
  }
}

bool Volume3::in_range() const {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return v >= -1.0f && v <= 1.0f; });
}

Image2::Image2(int w, int h, float fill) : w_(w), h_(h) {
  if (w < 1 || h < 1) throw Error(ErrorCode::Dimension, "image dims must be >= 1");
  values_.assign(static_cast<std::size_t>(w) * h, fill);
}

Image2::Image2(int w, int h, std::vector<float> values) : w_(w), h_(h), values_(std::move(values)) {
  if (w < 1 || h < 1) throw Error(ErrorCode::Dimension, "image dims must be >= 1");
  if (values_.size() != static_cast<std::size_t>(w) * h) {
    throw Error(ErrorCode::Dimension, "image value count does not match dims");
  }
}

Mask3::Mask3(Dims3 dims, bool fill) : dims_(dims) {
  require_dims(dims);
  bits_.assign(dims.count(), fill ? 1 : 0);
}

std::size_t Mask3::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Volume3 normalize_volume(Dims3 dims, std::span<const float> raw, double lo, double hi) {
  if (!(hi > lo)) {
    throw Error(ErrorCode::InvalidRange, "normalize_volume needs hi > lo (lo=" + std::to_string(lo) +
                                             ", hi=" + std::to_string(hi) + ")");
  }
  if (raw.size() != dims.count()) throw Error(ErrorCode::Dimension, "raw grid size does not match dims");
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = 2.0 * ((static_cast<double>(raw[i]) - lo) / (hi - lo)) - 1.0;
    out[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return Volume3(dims, std::move(out));
}

Image2 mip_axial(const Volume3& v) {
  Image2 out(v.nx(), v.ny(), -std::numeric_limits<float>::infinity());
  for (int z = 0; z < v.nz(); ++z) {
    for (int y = 0; y < v.ny(); ++y) {
      for (int x = 0; x < v.nx(); ++x) {
        out.at(x, y) = std::max(out.at(x, y), v.at(x, y, z));
      }
    }
  }
  return out;
}

double sample_trilinear(const Volume3& v, double x, double y, double z) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double fz = std::floor(z);
  const double tx = x - fx;
  const double ty = y - fy;
  const double tz = z - fz;
  // Exact hits on the last voxel of an axis must still resolve.
  if (!(x >= 0.0 && y >= 0.0 && z >= 0.0 && x <= v.nx() - 1 && y <= v.ny() - 1 && z <= v.nz() - 1)) {
    return kAir;
  }
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int z0 = static_cast<int>(fz);
  const int x1 = std::min(x0 + 1, v.nx() - 1);
  const int y1 = std::min(y0 + 1, v.ny() - 1);
  const int z1 = std::min(z0 + 1, v.nz() - 1);

  const double c00 = v.at(x0, y0, z0) * (1.0 - tx) + v.at(x1, y0, z0) * tx;
  const double c10 = v.at(x0, y1, z0) * (1.0 - tx) + v.at(x1, y1, z0) * tx;
  const double c01 = v.at(x0, y0, z1) * (1.0 - tx) + v.at(x1, y0, z1) * tx;
  const double c11 = v.at(x0, y1, z1) * (1.0 - tx) + v.at(x1, y1, z1) * tx;
  const double c0 = c00 * (1.0 - ty) + c10 * ty;
  const double c1 = c01 * (1.0 - ty) + c11 * ty;
  return c0 * (1.0 - tz) + c1 * tz;
}

Projections orthogonal_projections(const Volume3& v) {
  const int nx = v.nx(), ny = v.ny(), nz = v.nz();
  std::vector<double> sx(static_cast<std::size_t>(ny) * nz, 0.0);
  std::vector<double> sy(static_cast<std::size_t>(nx) * nz, 0.0);
  std::vector<double> sz(static_cast<std::size_t>(nx) * ny, 0.0);
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        const double val = v.at(x, y, z);
        sx[static_cast<std::size_t>(z) * ny + y] += val;
        sy[static_cast<std::size_t>(z) * nx + x] += val;
        sz[static_cast<std::size_t>(y) * nx + x] += val;
      }
    }
  }
  auto to_image = [](int w, int h, const std::vector<double>& sums, int n) {
    std::vector<float> vals(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i) vals[i] = static_cast<float>(sums[i] / n);
    return Image2(w, h, std::move(vals));
  };
  return Projections{to_image(ny, nz, sx, nx), to_image(nx, nz, sy, ny), to_image(nx, ny, sz, nz)};
}

Mask3 threshold_mask(const Volume3& v, double tau) {
  if (!(tau >= -1.0 && tau <= 1.0)) {
    throw Error(ErrorCode::InvalidThreshold, "threshold must lie in [-1, 1], got " + std::to_string(tau));
  }
  Mask3 m(v.dims());
  auto src = v.values();
  auto dst = m.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > tau ? 1 : 0;
  return m;
}

}  // namespace oral3d
