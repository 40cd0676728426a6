#include "oral3d/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "oral3d/error.hpp"

namespace oral3d::nn {

namespace {

using G = Graph<double>;
using Var = G::Var;

constexpr Op kDifferentiable[] = {Op::Conv,        Op::Concat, Op::Upsample2x,   Op::LeakyRelu, Op::Tanh,
                                  Op::Sigmoid,     Op::Mean,   Op::MeanAxis,     Op::SquaredError, Op::Crop,
                                  Op::Reshape,     Op::WeightedSum};

/// Replays one random architecture. Structure comes from a fixed seed, so
/// every build produces the same tape; parameter values are drawn on the
/// first build and reused afterwards.
class RandomNet {
 public:
  explicit RandomNet(std::uint64_t seed) : seed_(seed) {}

  Var build(G& g) {
    rng_.seed(seed_);
    next_param_ = 0;
    const bool volumetric = coin(0.35);
    const int c = pick(1, 3);
    Shape shape = volumetric ? Shape{c, pick(4, 5), pick(4, 5), pick(4, 5)} : Shape{c, 2 * pick(2, 4), 2 * pick(2, 4)};
    Var x = g.input(random_tensor(shape, 1.0));
    const int blocks = pick(2, 4);
    for (int b = 0; b < blocks; ++b) x = block(g, x, volumetric);
    return head(g, x);
  }

  std::vector<Tensor<double>>& params() { return values_; }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  Tensor<double> random_tensor(const Shape& s, double scale) {
    Tensor<double> t(s);
    std::normal_distribution<double> n(0.0, scale);
    for (double& v : t.data) v = n(rng_);
    return t;
  }

  Var param(G& g, const Shape& s, double scale) {
    // Draw from the structure stream either way so the replay stays aligned.
    Tensor<double> fresh = random_tensor(s, scale);
    if (next_param_ == values_.size()) values_.push_back(std::move(fresh));
    return g.parameter(values_[next_param_++]);
  }

  Var conv(G& g, Var x, int cout, int k, ConvSpec spec, bool volumetric) {
    const int cin = g.value(x).dim(0);
    Shape ws = volumetric ? Shape{cout, cin, k, k, k} : Shape{cout, cin, k, k};
    const double fan = static_cast<double>(shape_count(ws)) / cout;
    const Var w = param(g, ws, 1.0 / std::sqrt(fan));
    const Var b = param(g, {cout}, 0.3);
    return g.conv(x, w, b, spec);
  }

  Var activate(G& g, Var x) {
    switch (pick(0, 2)) {
      case 0: return g.leaky_relu(x, 0.2);
      case 1: return g.tanh(x);
      default: return g.sigmoid(x);
    }
  }

  Var block(G& g, Var x, bool volumetric) {
    const Shape s = g.value(x).shape;
    const int spatial_min = *std::min_element(s.begin() + 1, s.end());
    switch (pick(0, 6)) {
      case 0: {  // strided or padded conv
        const bool down = spatial_min >= 4 && coin(0.5);
        const int k = down ? 3 : (coin(0.5) ? 3 : 1);
        return activate(g, conv(g, x, pick(2, 6), k, {down ? 2 : 1, k / 2}, volumetric));
      }
      case 1: {  // dense-style concat of a same-size branch
        const Var fresh = activate(g, conv(g, x, pick(1, 4), 3, {1, 1}, volumetric));
        const Var parts[] = {x, fresh};
        return g.concat(parts);
      }
      case 2: {
        if (volumetric || spatial_min > 6) return activate(g, x);
        return g.upsample2x(x);
      }
      case 3: {
        if (spatial_min < 3) return activate(g, x);
        std::vector<int> offset(s.size(), 0);
        Shape extent = s;
        for (std::size_t a = 1; a < s.size(); ++a) {
          extent[a] = s[a] - pick(0, 1);
          offset[a] = pick(0, s[a] - extent[a]);
        }
        return g.crop(x, offset, extent);
      }
      case 4: {
        const Var y = activate(g, x);
        const Var xs[] = {x, y};
        const double w[] = {std::uniform_real_distribution<double>(-1.5, 1.5)(rng_),
                            std::uniform_real_distribution<double>(-1.5, 1.5)(rng_)};
        return g.weighted_sum(xs, w);
      }
      case 5: {
        const Var flat = g.reshape(x, {static_cast<int>(shape_count(s))});
        return g.reshape(activate(g, flat), s);
      }
      default:
        return activate(g, conv(g, x, pick(2, 6), 1, {1, 0}, volumetric));
    }
  }

  Var head(G& g, Var x) {
    const Shape s = g.value(x).shape;
    switch (pick(0, 2)) {
      case 0: return g.mean(x);
      case 1: return g.squared_error(x, g.input(random_tensor(s, 0.5)));
      default: {
        const Var m = g.mean_axis(x, pick(0, static_cast<int>(s.size()) - 1));
        const Var a = g.sigmoid(g.mean(m));
        const Var e = g.squared_error(m, g.input(random_tensor(g.value(m).shape, 0.5)));
        const Var xs[] = {a, e};
        const double w[] = {0.7, 1.3};
        return g.weighted_sum(xs, w);
      }
    }
  }

  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<Tensor<double>> values_;
  std::size_t next_param_ = 0;
};

double evaluate(RandomNet& net, std::vector<std::uint8_t>* signs) {
  G g;
  const Var loss = net.build(g);
  if (signs) *signs = g.leaky_signs();
  return g.value(loss).data[0];
}

}  // namespace

std::vector<std::string> GradcheckReport::missing_ops() const {
  std::vector<std::string> out;
  for (Op op : kDifferentiable) {
    if (!ops_seen.count(op)) out.emplace_back(op_name(op));
  }
  return out;
}

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  if (cfg.graphs < 1 || !(cfg.h > 0) || !(cfg.floor > 0) || cfg.coords_per_graph < 1) {
    throw Error(ErrorCode::Validation, "gradcheck needs graphs >= 1, h > 0, floor > 0, coords_per_graph >= 1");
  }
  GradcheckReport rep;
  std::mt19937_64 seeds(cfg.seed);
  std::mt19937_64 coord_rng(cfg.seed ^ 0x5bd1e995ULL);
  while (rep.graphs < cfg.graphs) {
    RandomNet net(seeds());
    std::vector<Tensor<double>> analytic;
    std::vector<std::uint8_t> base_signs;
    {
      G g;
      const Var loss = net.build(g);
      const int count = static_cast<int>(std::accumulate(
          net.params().begin(), net.params().end(), std::size_t{0},
          [](std::size_t acc, const Tensor<double>& t) { return acc + t.size(); }));
      if (count == 0 || count > cfg.max_params) continue;
      rep.max_param_count = std::max(rep.max_param_count, count);
      g.backward(loss);
      for (int id = 0; id < g.size(); ++id) {
        if (g.op(id) == Op::Parameter) analytic.push_back(g.grad(G::Var{id}));
        rep.ops_seen.insert(g.op(id));
      }
      base_signs = g.leaky_signs();
    }

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t p = 0; p < net.params().size(); ++p) {
      for (std::size_t i = 0; i < net.params()[p].size(); ++i) coords.emplace_back(p, i);
    }
    if (static_cast<int>(coords.size()) > cfg.coords_per_graph) {
      std::shuffle(coords.begin(), coords.end(), coord_rng);
      coords.resize(cfg.coords_per_graph);
    }

    for (const auto& [p, i] : coords) {
      double& w = net.params()[p].data[i];
      const double saved = w;
      std::vector<std::uint8_t> sp, sm;
      w = saved + cfg.h;
      const double fp = evaluate(net, &sp);
      w = saved - cfg.h;
      const double fm = evaluate(net, &sm);
      w = saved;
      if (sp != base_signs || sm != base_signs) {
        ++rep.skipped_kinks;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * cfg.h);
      const double a = analytic[p].data[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), cfg.floor});
      ++rep.checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_graph = rep.graphs;
      }
    }
    ++rep.graphs;
  }
  return rep;
}

}  // namespace oral3d::nn
