#pragma once

#include <limits>
#include <optional>

#include "oral3d/volume.hpp"

namespace oral3d {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

struct SsimConfig {
  int window = 7;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 2.0;

  void validate() const;
};

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double dice = 0.0;
  // Empty when psnr is the identical-volume sentinel.
  std::optional<double> overall_pct;
};

// 10 log10(4 / MSE); kPsnrIdentical when MSE is zero.
double psnr(const Volume3& a, const Volume3& b);
// PSNR over the voxels where mask is set.
double psnr(const Volume3& a, const Volume3& b, const Mask3& mask);

// Mean local SSIM under a separable Gaussian window, evaluated only where
// the window fits entirely inside the volume.
double ssim3(const Volume3& a, const Volume3& b, const SsimConfig& cfg = {});

// 2|A n B| / (|A| + |B|) of the tau-thresholded masks; 1 when both are empty.
double dice(const Volume3& a, const Volume3& b, double tau);
double dice(const Volume3& a, const Volume3& b, double tau, const Mask3& region);

// 100 (psnr/20 + ssim + dice) / 3 with ssim and dice as fractions.
double overall(double psnr_db, double ssim, double dice);

MetricReport evaluate(const Volume3& a, const Volume3& b, double tau, const SsimConfig& cfg = {});

}  // namespace oral3d
