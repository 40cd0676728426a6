#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oral3d/arch.hpp"
#include "oral3d/error.hpp"

using namespace oral3d;

namespace {

// Plain normal-equations least squares with partial-pivot elimination.
std::vector<double> normal_equations_fit(const std::vector<Point2>& pts, int degree) {
  const int n = degree + 1;
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (const auto& p : pts) {
    std::vector<double> pw(2 * n, 1.0);
    for (int k = 1; k < 2 * n; ++k) pw[k] = pw[k - 1] * p.x;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) a[r][c] += pw[r + c];
      a[r][n] += pw[r] * p.y;
    }
  }
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> out(n);
  for (int r = 0; r < n; ++r) out[r] = a[r][n] / a[r][r];
  return out;
}

double poly(const std::vector<double>& c, double x) {
  double y = 0;
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k) y = y * x + c[k];
  return y;
}

double poly_slope(const std::vector<double>& c, double x) {
  double y = 0;
  for (int k = static_cast<int>(c.size()) - 1; k >= 1; --k) y = y * x + k * c[k];
  return y;
}

// Cumulative arc length from x_min to x by a fine trapezoid rule.
double arc_length_to(const ArchCurve& c, double x) {
  const int n = 200000;
  const double h = (x - c.x_min) / n;
  double s = 0;
  for (int i = 0; i < n; ++i) {
    const double a = c.x_min + i * h, b = a + h;
    const double fa = std::sqrt(1 + std::pow(poly_slope(c.coeffs, a), 2));
    const double fb = std::sqrt(1 + std::pow(poly_slope(c.coeffs, b), 2));
    s += 0.5 * h * (fa + fb);
  }
  return s;
}

}  // namespace

TEST_CASE("centerline_from_mip gives per-column centroids") {
  Image2 img(14, 12, -1.0f);
  for (int x = 2; x <= 10; ++x) img.at(x, 7) = 1.0f;
  const auto pts = centerline_from_mip(img, 0.0);
  REQUIRE(pts.size() == 9);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i].x == 2.0 + i);
    CHECK(pts[i].y == 7.0);
  }

  Image2 two(8, 12, -1.0f);
  for (int x = 0; x < 8; ++x) {
    two.at(x, 6) = 0.5f;
    two.at(x, 8) = 0.5f;
  }
  for (const auto& p : centerline_from_mip(two, 0.0)) CHECK(p.y == 7.0);
}

TEST_CASE("centerline_from_mip follows a rasterized parabola band") {
  Image2 img(60, 50, -1.0f);
  auto center = [](double x) { return 10.0 + 0.01 * (x - 30) * (x - 30); };
  for (int x = 0; x < 60; ++x)
    for (int y = 0; y < 50; ++y)
      if (std::abs(y - center(x)) <= 3.0) img.at(x, y) = 0.6f;
  const auto pts = centerline_from_mip(img, 0.0);
  CHECK(pts.size() == 60);
  for (const auto& p : pts) {
    // Exhaustive per-column centroid of the raster.
    double sum = 0;
    int n = 0;
    for (int y = 0; y < 50; ++y)
      if (img.at(static_cast<int>(p.x), y) > 0.0f) {
        sum += y;
        ++n;
      }
    CHECK(p.y == doctest::Approx(sum / n));
    CHECK(std::abs(p.y - center(p.x)) <= 0.5);
  }
}

TEST_CASE("centerline_from_mip needs degree + 1 columns") {
  Image2 img(10, 10, -1.0f);
  img.at(1, 1) = 1.0f;
  img.at(2, 1) = 1.0f;
  try {
    centerline_from_mip(img, 0.0, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientPoints);
  }
}

TEST_CASE("fit_arch recovers exact polynomials") {
  std::vector<Point2> line;
  for (int i = 0; i < 10; ++i) line.push_back({i * 1.0, 2 + 0.5 * i});
  const ArchFit f1 = fit_arch(line, 1);
  CHECK(f1.curve.coeffs[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f1.curve.coeffs[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f1.residual_rms < 1e-9);
  CHECK(f1.curve.x_min == 0.0);
  CHECK(f1.curve.x_max == 9.0);

  std::vector<Point2> cubic;
  for (int i = -10; i <= 12; ++i) cubic.push_back({i * 0.7, 1 + i * 0.7 - 0.01 * std::pow(i * 0.7, 3)});
  const ArchFit f3 = fit_arch(cubic, 3);
  const double want[] = {1.0, 1.0, 0.0, -0.01};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(f3.curve.coeffs[k] - want[k]) < 1e-6);
  CHECK(f3.residual_rms < 1e-9);
}

TEST_CASE("fit_arch matches an independent least-squares solve on noisy data") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> noise(0.0, 0.1);
  const std::vector<double> truth{3.0, -0.4, 0.05, -0.002};
  std::vector<Point2> pts;
  for (int i = 0; i <= 60; ++i) {
    const double x = i * 0.25;
    pts.push_back({x, poly(truth, x) + noise(rng)});
  }
  const ArchFit fit = fit_arch(pts, 3);
  const auto ref = normal_equations_fit(pts, 3);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(fit.curve.coeffs[k] - ref[k]) <= 1e-6 * (1 + std::abs(ref[k])));
  CHECK(fit.residual_rms == doctest::Approx(0.1).epsilon(0.3));
}

TEST_CASE("fit_arch rejects degenerate input") {
  std::vector<Point2> same_x{{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 4}};
  try {
    fit_arch(same_x, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateFit);
  }
  std::vector<Point2> few{{0, 0}, {1, 1}};
  try {
    fit_arch(few, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientPoints);
  }
}

TEST_CASE("sample_equal_arclength on simple curves") {
  const ArchCurve line{1, {0.0, 0.0}, 0.0, 10.0};
  const ArcSamples s = sample_equal_arclength(line, 11);
  REQUIRE(s.size() == 11);
  for (int k = 0; k < 11; ++k) {
    CHECK(s.points[k].x == doctest::Approx(k).epsilon(1e-9));
    CHECK(s.points[k].y == doctest::Approx(0.0));
    CHECK(s.normals[k].x == doctest::Approx(0.0));
    CHECK(s.normals[k].y == doctest::Approx(1.0));
  }
  CHECK(s.step == doctest::Approx(1.0).epsilon(1e-9));

  const ArchCurve diag{1, {0.0, 1.0}, 0.0, 1.0};
  const ArcSamples d = sample_equal_arclength(diag, 2);
  CHECK(d.points[0].x == 0.0);
  CHECK(d.points[1].x == 1.0);
  CHECK(d.points[1].y == doctest::Approx(1.0));
  CHECK(d.step == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("sample_equal_arclength spaces a cubic evenly") {
  const ArchCurve c{3, {20.0, 0.1, 0.004, -0.00003}, 5.0, 85.0};
  const int w = 64;
  const ArcSamples s = sample_equal_arclength(c, w);
  const double total = arc_length_to(c, c.x_max);
  CHECK(s.step * (w - 1) == doctest::Approx(total).epsilon(1e-4));
  for (int k = 0; k < w; ++k) {
    CHECK(s.points[k].y == doctest::Approx(poly(c.coeffs, s.points[k].x)).epsilon(1e-9));
    CHECK(arc_length_to(c, s.points[k].x) == doctest::Approx(k * total / (w - 1)).epsilon(1e-4).scale(1.0));
    const Point2 t = s.tangents[k], n = s.normals[k];
    CHECK(std::hypot(n.x, n.y) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(t.x * n.x + t.y * n.y) < 1e-6);
    CHECK(n.y > 0);
  }
  for (int k = 1; k < w; ++k) {
    const double chord = std::hypot(s.points[k].x - s.points[k - 1].x, s.points[k].y - s.points[k - 1].y);
    CHECK(chord == doctest::Approx(s.step).epsilon(1e-4));
  }
}

TEST_CASE("signed_distance against an exhaustive scan") {
  const ArchCurve line{1, {0.0, 0.0}, 0.0, 10.0};
  const ArcSamples s = sample_equal_arclength(line, 11);
  const NearestSample on = signed_distance(s, s.points[3]);
  CHECK(on.id == 3);
  CHECK(on.dist == 0.0);
  const NearestSample above = signed_distance(s, {2.0, 1.5});
  CHECK(above.id == 2);
  CHECK(above.dist == doctest::Approx(1.5));
  // Equidistant from samples 2 and 3: the lower index wins.
  CHECK(signed_distance(s, {2.5, -1.0}).id == 2);

  const ArchCurve c{3, {30.0, -0.2, 0.01, -0.00005}, 0.0, 60.0};
  const ArcSamples cs = sample_equal_arclength(c, 64);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(-5, 65), uy(0, 60);
  for (int trial = 0; trial < 500; ++trial) {
    const Point2 p{ux(rng), uy(rng)};
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cs.size(); ++k) {
      const double d = std::hypot(p.x - cs.points[k].x, p.y - cs.points[k].y);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    const double side = (p.x - cs.points[best].x) * cs.normals[best].x + (p.y - cs.points[best].y) * cs.normals[best].y;
    const NearestSample ns = signed_distance(cs, p);
    CHECK(ns.id == best);
    CHECK(ns.dist == doctest::Approx(side >= 0 ? bd : -bd));
  }
}

TEST_CASE("signed_distance sign follows the normal near the curve") {
  const ArchCurve c{3, {30.0, -0.2, 0.01, -0.00005}, 0.0, 60.0};
  const ArcSamples s = sample_equal_arclength(c, 64);
  for (int k = 0; k < s.size(); ++k)
    for (double t : {-0.4, -0.1, 0.1, 0.4}) {
      const double tt = t * s.step;
      const Point2 p{s.points[k].x + tt * s.normals[k].x, s.points[k].y + tt * s.normals[k].y};
      const NearestSample ns = signed_distance(s, p);
      CHECK((ns.dist > 0) == (tt > 0));
    }
}

TEST_CASE("min_curvature_radius") {
  CHECK(std::isinf(min_curvature_radius({1, {1.0, 2.0}, 0.0, 5.0})));
  CHECK(std::isinf(min_curvature_radius({3, {1.0, 2.0, 0.0, 0.0}, 0.0, 5.0})));
  CHECK(min_curvature_radius({2, {0.0, 0.0, 0.5}, -2.0, 2.0}) == doctest::Approx(1.0).epsilon(1e-3));

  // Lower arc of a radius-10 circle centred at (0, 10), fitted densely.
  std::vector<Point2> pts;
  for (int i = 0; i <= 200; ++i) {
    const double x = -5.0 + i * 0.05;
    pts.push_back({x, 10.0 - std::sqrt(100.0 - x * x)});
  }
  const ArchFit fit = fit_arch(pts, 6);
  CHECK(min_curvature_radius(fit.curve) == doctest::Approx(10.0).epsilon(0.02));
}
