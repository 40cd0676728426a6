#include "oral3d/arch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "oral3d/error.hpp"

namespace oral3d {

namespace {

constexpr int kArcTableSegments = 4096;
constexpr int kCurvatureGrid = 4097;

}  // namespace

double ArchCurve::eval(double x) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double ArchCurve::slope(double x) const {
  double acc = 0.0;
  for (int p = static_cast<int>(coeffs.size()) - 1; p >= 1; --p) acc = acc * x + p * coeffs[p];
  return acc;
}

double ArchCurve::second_derivative(double x) const {
  double acc = 0.0;
  for (int p = static_cast<int>(coeffs.size()) - 1; p >= 2; --p) acc = acc * x + p * (p - 1) * coeffs[p];
  return acc;
}

std::vector<Point2> centerline_from_mip(const Image2& img, double tau, int degree) {
  std::vector<Point2> pts;
  for (int x = 0; x < img.width(); ++x) {
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < img.height(); ++y) {
      if (img.at(x, y) > tau) {
        sum += y;
        ++n;
      }
    }
    if (n > 0) pts.push_back({static_cast<double>(x), sum / n});
  }
  if (static_cast<int>(pts.size()) < degree + 1) {
    throw Error(ErrorCode::InsufficientPoints, "centerline has " + std::to_string(pts.size()) +
                                                   " columns above threshold, need " +
                                                   std::to_string(degree + 1));
  }
  return pts;
}

ArchFit fit_arch(const std::vector<Point2>& points, int degree) {
  if (degree < 1) throw Error(ErrorCode::Validation, "fit degree must be >= 1");
  const int n = static_cast<int>(points.size());
  if (n < degree + 1) {
    throw Error(ErrorCode::InsufficientPoints,
                "fit needs " + std::to_string(degree + 1) + " points, got " + std::to_string(n));
  }
  Eigen::MatrixXd vander(n, degree + 1);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int j = 0; j <= degree; ++j) {
      vander(i, j) = p;
      p *= points[i].x;
    }
    rhs(i) = points[i].y;
  }
  // Column equilibration keeps raw-power Vandermonde systems well conditioned.
  Eigen::VectorXd col_norm = vander.colwise().norm().transpose();
  for (int j = 0; j <= degree; ++j) {
    if (col_norm(j) == 0.0) throw Error(ErrorCode::DegenerateFit, "all-zero design column");
    vander.col(j) /= col_norm(j);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vander);
  qr.setThreshold(1e-12);
  if (qr.rank() < degree + 1) {
    throw Error(ErrorCode::DegenerateFit, "rank " + std::to_string(qr.rank()) + " design matrix for degree " +
                                              std::to_string(degree));
  }
  const Eigen::VectorXd scaled = qr.solve(rhs);

  ArchFit fit;
  fit.curve.degree = degree;
  fit.curve.coeffs.resize(degree + 1);
  for (int j = 0; j <= degree; ++j) fit.curve.coeffs[j] = scaled(j) / col_norm(j);
  auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                      [](const Point2& a, const Point2& b) { return a.x < b.x; });
  fit.curve.x_min = lo->x;
  fit.curve.x_max = hi->x;

  double ss = 0.0;
  for (const auto& p : points) {
    const double r = p.y - fit.curve.eval(p.x);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  return fit;
}

ArcSamples sample_equal_arclength(const ArchCurve& curve, int w) {
  if (w < 2) throw Error(ErrorCode::Validation, "need at least 2 arc samples");
  if (!(curve.x_max > curve.x_min)) throw Error(ErrorCode::Validation, "curve domain is empty");

  // Cumulative arc length on a dense grid, Simpson's rule per segment.
  const double dx = (curve.x_max - curve.x_min) / kArcTableSegments;
  auto speed = [&](double x) {
    const double s = curve.slope(x);
    return std::sqrt(1.0 + s * s);
  };
  std::vector<double> xs(kArcTableSegments + 1);
  std::vector<double> cum(kArcTableSegments + 1, 0.0);
  for (int i = 0; i <= kArcTableSegments; ++i) xs[i] = curve.x_min + i * dx;
  xs.back() = curve.x_max;
  for (int i = 0; i < kArcTableSegments; ++i) {
    const double a = xs[i], b = xs[i + 1];
    cum[i + 1] = cum[i] + (b - a) / 6.0 * (speed(a) + 4.0 * speed(0.5 * (a + b)) + speed(b));
  }
  const double total = cum.back();

  ArcSamples out;
  out.step = total / (w - 1);
  out.points.resize(w);
  out.tangents.resize(w);
  out.normals.resize(w);
  for (int k = 0; k < w; ++k) {
    double x;
    if (k == 0) {
      x = curve.x_min;
    } else if (k == w - 1) {
      x = curve.x_max;
    } else {
      const double s = k * out.step;
      auto it = std::upper_bound(cum.begin(), cum.end(), s);
      const auto seg = std::clamp<std::ptrdiff_t>(it - cum.begin() - 1, 0, kArcTableSegments - 1);
      const double t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
      x = xs[seg] + t * (xs[seg + 1] - xs[seg]);
    }
    const double fp = curve.slope(x);
    const double inv = 1.0 / std::sqrt(1.0 + fp * fp);
    out.points[k] = {x, curve.eval(x)};
    out.tangents[k] = {inv, fp * inv};
    out.normals[k] = {-fp * inv, inv};
  }
  return out;
}

NearestSample signed_distance(const ArcSamples& samples, Point2 p) {
  if (samples.points.empty()) throw Error(ErrorCode::Validation, "no arc samples");
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples.size(); ++i) {
    const double dx = p.x - samples.points[i].x;
    const double dy = p.y - samples.points[i].y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  const Point2 q = samples.points[best];
  const Point2 n = samples.normals[best];
  const double side = (p.x - q.x) * n.x + (p.y - q.y) * n.y;
  const double d = std::sqrt(best_d2);
  return {best, side < 0.0 ? -d : d};
}

double min_curvature_radius(const ArchCurve& curve) {
  const bool straight = std::all_of(curve.coeffs.begin() + std::min<std::size_t>(2, curve.coeffs.size()),
                                    curve.coeffs.end(), [](double c) { return c == 0.0; });
  if (straight) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kCurvatureGrid; ++i) {
    const double x = curve.x_min + (curve.x_max - curve.x_min) * i / (kCurvatureGrid - 1);
    const double f2 = std::abs(curve.second_derivative(x));
    if (f2 == 0.0) continue;
    const double f1 = curve.slope(x);
    best = std::min(best, std::pow(1.0 + f1 * f1, 1.5) / f2);
  }
  return best;
}

}  // namespace oral3d
