#pragma once

#include <vector>

#include "oral3d/volume.hpp"

namespace oral3d {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Dental arch as y = f(x) in the axial plane.
///
/// Coefficients are ascending powers (c0 + c1 x + ... ). Positions live in the
/// continuous axial frame in which voxel (i, j) covers [i, i+1) x [j, j+1), so
/// its center is (i + 0.5, j + 0.5).
struct ArchCurve {
  int degree = 3;
  std::vector<double> coeffs;
  double x_min = 0.0;
  double x_max = 1.0;

  double eval(double x) const;
  double slope(double x) const;
  double second_derivative(double x) const;
};

struct ArchFit {
  ArchCurve curve;
  double residual_rms = 0.0;
};

/// Equal-arc-length samples along an ArchCurve. Normals are the tangents
/// rotated by +90 degrees, so (-t.y, t.x).
struct ArcSamples {
  std::vector<Point2> points;
  std::vector<Point2> tangents;
  std::vector<Point2> normals;
  double step = 0.0;

  int size() const { return static_cast<int>(points.size()); }
};

struct NearestSample {
  int id = 0;
  double dist = 0.0;
};

// Per-column centroid of pixels above tau, in pixel-index coordinates.
// Throws InsufficientPoints when fewer than degree + 1 columns qualify.
std::vector<Point2> centerline_from_mip(const Image2& img, double tau, int degree = 3);

// Least-squares polynomial fit. x_min/x_max are the extreme x of the input.
ArchFit fit_arch(const std::vector<Point2>& points, int degree = 3);

ArcSamples sample_equal_arclength(const ArchCurve& curve, int w);

// Nearest sample (ties go to the lower index) and the Euclidean distance to
// it, signed by the side of that sample's normal.
NearestSample signed_distance(const ArcSamples& samples, Point2 p);

// Minimum radius of curvature over [x_min, x_max]; +infinity when f'' == 0.
double min_curvature_radius(const ArchCurve& curve);

}  // namespace oral3d
