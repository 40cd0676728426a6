#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace oral3d {

// Air in normalized intensity units; used as background and out-of-bounds fill.
inline constexpr float kAir = -1.0f;

struct Dims3 {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

/// Scalar volume in normalized units. Index order is (x: left-right,
/// y: anterior-posterior, z: inferior-superior), stored x-fastest. The axial
/// plane is (x, y).
class Volume3 {
 public:
  Volume3() = default;
  explicit Volume3(Dims3 dims, float fill = kAir, double spacing = 1.0);
  Volume3(Dims3 dims, std::vector<float> values, double spacing = 1.0);

  const Dims3& dims() const { return dims_; }
  int nx() const { return dims_.nx; }
  int ny() const { return dims_.ny; }
  int nz() const { return dims_.nz; }
  double spacing() const { return spacing_; }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims_.ny + static_cast<std::size_t>(y)) * dims_.nx +
           static_cast<std::size_t>(x);
  }
  float& at(int x, int y, int z) { return values_[index(x, y, z)]; }
  float at(int x, int y, int z) const { return values_[index(x, y, z)]; }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  // True when every voxel lies in [-1, 1].
  bool in_range() const;

  friend bool operator==(const Volume3&, const Volume3&) = default;

 private:
  Dims3 dims_{};
  double spacing_ = 1.0;
  std::vector<float> values_;
};

/// 2D intensity image, (w, h), stored x-fastest.
class Image2 {
 public:
  Image2() = default;
  Image2(int w, int h, float fill = kAir);
  Image2(int w, int h, std::vector<float> values);

  int width() const { return w_; }
  int height() const { return h_; }
  float& at(int x, int y) { return values_[static_cast<std::size_t>(y) * w_ + x]; }
  float at(int x, int y) const { return values_[static_cast<std::size_t>(y) * w_ + x]; }
  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  friend bool operator==(const Image2&, const Image2&) = default;

 private:
  int w_ = 0;
  int h_ = 0;
  std::vector<float> values_;
};

class Mask3 {
 public:
  Mask3() = default;
  explicit Mask3(Dims3 dims, bool fill = false);

  const Dims3& dims() const { return dims_; }
  bool at(int x, int y, int z) const {
    return bits_[(static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x] != 0;
  }
  void set(int x, int y, int z, bool v) {
    bits_[(static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x] = v ? 1 : 0;
  }
  std::span<std::uint8_t> bits() { return bits_; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::size_t count() const;

 private:
  Dims3 dims_{};
  std::vector<std::uint8_t> bits_;
};

struct Projections {
  Image2 along_x;  // (ny, nz)
  Image2 along_y;  // (nx, nz)
  Image2 along_z;  // (nx, ny)
};

// Affine map [lo, hi] -> [-1, 1], clamped. Throws InvalidRange when hi <= lo.
Volume3 normalize_volume(Dims3 dims, std::span<const float> raw, double lo, double hi);

// Maximum intensity projection along z.
Image2 mip_axial(const Volume3& v);

// Trilinear interpolation in voxel-index coordinates (voxel centers sit on
// integers). Anything outside the grid reads as air.
double sample_trilinear(const Volume3& v, double x, double y, double z);

// Arithmetic mean along each axis.
Projections orthogonal_projections(const Volume3& v);

// mask = v > tau, tau must lie in [-1, 1].
Mask3 threshold_mask(const Volume3& v, double tau);

}  // namespace oral3d
