#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oral3d/error.hpp"
#include "oral3d/nn/gradcheck.hpp"
#include "oral3d/nn/graph.hpp"

using namespace oral3d;
using namespace oral3d::nn;

namespace {

Tensor<double> random_tensor(Shape s, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<double> t(std::move(s));
  for (double& x : t.data) x = n(rng);
  return t;
}

// Direct-loop reference convolution of a (C, H, W) map.
Tensor<double> conv2d_ref(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride,
                          int pad) {
  const int c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int co = w.dim(0), k = w.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  Tensor<double> y({co, ho, wo});
  for (int o = 0; o < co; ++o)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) {
        double s = b.data[o];
        for (int ci = 0; ci < c; ++ci)
          for (int a = 0; a < k; ++a)
            for (int bb = 0; bb < k; ++bb) {
              const int yy = i * stride - pad + a, xx = j * stride - pad + bb;
              if (yy < 0 || xx < 0 || yy >= h || xx >= wd) continue;
              s += w.data[((o * c + ci) * k + a) * k + bb] * x.data[(ci * h + yy) * wd + xx];
            }
        y.data[(o * ho + i) * wo + j] = s;
      }
  return y;
}

Tensor<double> conv3d_ref(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride,
                          int pad) {
  const int c = x.dim(0), dd = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), k = w.dim(2);
  auto out = [&](int n) { return (n + 2 * pad - k) / stride + 1; };
  const int od = out(dd), oh = out(h), ow = out(wd);
  Tensor<double> y({co, od, oh, ow});
  for (int o = 0; o < co; ++o)
    for (int p = 0; p < od; ++p)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double s = b.data[o];
          for (int ci = 0; ci < c; ++ci)
            for (int e = 0; e < k; ++e)
              for (int a = 0; a < k; ++a)
                for (int f = 0; f < k; ++f) {
                  const int zz = p * stride - pad + e, yy = i * stride - pad + a, xx = j * stride - pad + f;
                  if (zz < 0 || yy < 0 || xx < 0 || zz >= dd || yy >= h || xx >= wd) continue;
                  s += w.data[(((o * c + ci) * k + e) * k + a) * k + f] * x.data[((ci * dd + zz) * h + yy) * wd + xx];
                }
          y.data[((o * od + p) * oh + i) * ow + j] = s;
        }
  return y;
}

void check_close(const Tensor<double>& a, const Tensor<double>& b, double tol) {
  REQUIRE(a.shape == b.shape);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) <= tol);
}

}  // namespace

TEST_CASE("convolution matches direct loops") {
  std::mt19937_64 rng(1);
  for (int stride : {1, 2})
    for (int pad : {0, 1}) {
      Graph<double> g;
      const Tensor<double> x = random_tensor({3, 7, 9}, rng), w = random_tensor({4, 3, 3, 3}, rng),
                           b = random_tensor({4}, rng);
      const auto y = g.conv(g.input(x), g.input(w), g.input(b), {stride, pad});
      check_close(g.value(y), conv2d_ref(x, w, b, stride, pad), 1e-12);
    }
  for (int stride : {1, 2}) {
    Graph<double> g;
    const Tensor<double> x = random_tensor({2, 6, 5, 7}, rng), w = random_tensor({3, 2, 4, 4, 4}, rng),
                         b = random_tensor({3}, rng);
    const auto y = g.conv(g.input(x), g.input(w), g.input(b), {stride, 1});
    check_close(g.value(y), conv3d_ref(x, w, b, stride, 1), 1e-12);
  }
}

TEST_CASE("shape ops") {
  Graph<double> g;
  const auto x = g.input(Tensor<double>({1, 2, 2}, {1, 2, 3, 4}));
  const auto u = g.upsample2x(x);
  CHECK(g.value(u).shape == Shape{1, 4, 4});
  CHECK(g.value(u).data == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});

  const auto y = g.input(Tensor<double>({2, 2, 2}, {5, 6, 7, 8, 9, 10, 11, 12}));
  const std::vector<Graph<double>::Var> parts{x, y};
  const auto c = g.concat(parts);
  CHECK(g.value(c).shape == Shape{3, 2, 2});
  CHECK(g.value(c).data[4] == 5);

  const auto m0 = g.mean_axis(y, 0);
  CHECK(g.value(m0).data == std::vector<double>{7, 8, 9, 10});
  const auto m2 = g.mean_axis(y, 2);
  CHECK(g.value(m2).data == std::vector<double>{5.5, 7.5, 9.5, 11.5});
  CHECK(g.value(g.mean(y)).data[0] == 8.5);

  const auto cr = g.crop(y, {1, 0, 1}, {1, 2, 1});
  CHECK(g.value(cr).data == std::vector<double>{10, 12});
  CHECK(g.value(g.reshape(cr, {2})).shape == Shape{2});

  const std::vector<Graph<double>::Var> ws{x, x};
  const std::vector<double> wt{2.0, -0.5};
  CHECK(g.value(g.weighted_sum(ws, wt)).data == std::vector<double>{1.5, 3, 4.5, 6});
  CHECK(g.value(g.squared_error(x, g.input(Tensor<double>({1, 2, 2}, 0.0)))).data[0] == 7.5);
  CHECK(g.value(g.leaky_relu(g.input(Tensor<double>({2}, {-1, 2})), 0.2)).data == std::vector<double>{-0.2, 2});
  CHECK(g.value(g.step(g.input(Tensor<double>({3}, {-1, 0, 1})), 0.0)).data == std::vector<double>{0, 0, 1});
}

TEST_CASE("gradient of an unused parameter is exactly zero") {
  std::mt19937_64 rng(2);
  Graph<double> g;
  const auto a = g.parameter(random_tensor({3}, rng));
  const auto unused = g.parameter(random_tensor({3}, rng));
  const auto loss = g.mean(g.tanh(a));
  g.backward(loss);
  for (double v : g.grad(unused).data) CHECK(v == 0.0);
  for (double v : g.grad(a).data) CHECK(v != 0.0);
}

TEST_CASE("linear layer with squared error matches the closed form") {
  std::mt19937_64 rng(3);
  const int c = 4, n = 25;
  const Tensor<double> x = random_tensor({c, 1, n}, rng);
  const Tensor<double> target = random_tensor({1, 1, n}, rng);
  const Tensor<double> w0 = random_tensor({1, c, 1, 1}, rng), b0 = random_tensor({1}, rng);

  Graph<double> g;
  const auto w = g.parameter(w0), b = g.parameter(b0);
  const auto y = g.conv(g.input(x), w, b, {1, 0});
  g.backward(g.squared_error(y, g.input(target)));

  // Design matrix A = [x^T | 1], theta = [w; b]. Gradient of |A theta - t|^2 / n
  // is 2/n (A^T A theta - A^T t).
  const int p = c + 1;
  std::vector<double> ata(p * p, 0.0), att(p, 0.0), theta(p);
  for (int k = 0; k < c; ++k) theta[k] = w0.data[k];
  theta[c] = b0.data[0];
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(p, 1.0);
    for (int k = 0; k < c; ++k) row[k] = x.data[k * n + i];
    for (int r = 0; r < p; ++r) {
      att[r] += row[r] * target.data[i];
      for (int s = 0; s < p; ++s) ata[r * p + s] += row[r] * row[s];
    }
  }
  std::vector<double> grad(p);
  for (int r = 0; r < p; ++r) {
    double s = 0;
    for (int q = 0; q < p; ++q) s += ata[r * p + q] * theta[q];
    grad[r] = 2.0 / n * (s - att[r]);
  }
  for (int k = 0; k < c; ++k) CHECK(std::abs(g.grad(w).data[k] - grad[k]) <= 1e-10);
  CHECK(std::abs(g.grad(b).data[0] - grad[c]) <= 1e-10);
}

TEST_CASE("backward refuses to differentiate through step") {
  Graph<double> g;
  const auto p = g.parameter(Tensor<double>({2}, {0.5, -0.5}));
  const auto loss = g.mean(g.step(p, 0.0));
  try {
    g.backward(loss);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedOperation);
  }

  // A step that only sees inputs is off the gradient path.
  Graph<double> h;
  const auto q = h.parameter(Tensor<double>({2}, {0.5, -0.5}));
  const auto mask = h.step(h.input(Tensor<double>({2}, {1.0, -1.0})), 0.0);
  h.backward(h.squared_error(q, mask));
  CHECK(h.grad(q).data[0] == doctest::Approx(-0.5));
}

TEST_CASE("random graphs agree with central differences") {
  GradcheckConfig cfg;
  cfg.graphs = 25;
  cfg.seed = 123;
  const GradcheckReport r = run_gradcheck(cfg);
  CHECK(r.graphs == 25);
  CHECK(r.checked > 1000);
  CHECK(r.max_param_count <= 5000);
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.missing_ops().empty());
}
