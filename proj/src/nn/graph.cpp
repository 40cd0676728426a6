#include "oral3d/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Core>

#include "oral3d/error.hpp"

namespace oral3d::nn {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ')';
  return os.str();
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Parameter: return "parameter";
    case Op::Conv: return "conv";
    case Op::Concat: return "concat";
    case Op::Upsample2x: return "upsample2x";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Mean: return "mean";
    case Op::MeanAxis: return "mean_axis";
    case Op::SquaredError: return "squared_error";
    case Op::Crop: return "crop";
    case Op::Reshape: return "reshape";
    case Op::WeightedSum: return "weighted_sum";
    case Op::Step: return "step";
  }
  return "unknown";
}

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapR = Eigen::Map<MatR<T>>;
template <class T>
using CMapR = Eigen::Map<const MatR<T>>;

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorCode::Dimension, what); }

}  // namespace

template <class T>
typename Graph<T>::Var Graph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
std::vector<T>& Graph<T>::grad_buffer(int id) {
  auto& g = nodes_[id].grad;
  if (g.empty()) g.assign(nodes_[id].value.size(), T(0));
  return g;
}

template <class T>
Tensor<T> Graph<T>::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor<T>(n.value.shape, T(0));
  return Tensor<T>(n.value.shape, n.grad);
}

template <class T>
typename Graph<T>::Var Graph<T>::input(Tensor<T> value) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::parameter(Tensor<T> value) {
  Node n;
  n.op = Op::Parameter;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

template <class T>
void Graph<T>::im2col(const ConvGeom& g, const T* x, T* cols) const {
  const std::size_t ncol = g.cols();
  std::size_t row = 0;
  for (int c = 0; c < g.cin; ++c) {
    for (int a = 0; a < g.kd; ++a) {
      for (int b = 0; b < g.kh; ++b) {
        for (int e = 0; e < g.kw; ++e, ++row) {
          T* dst = cols + row * ncol;
          for (int od = 0; od < g.dout; ++od) {
            const int iz = od * g.sd - g.pd + a;
            for (int oh = 0; oh < g.hout; ++oh) {
              const int iy = oh * g.sh - g.ph + b;
              T* out = dst + (static_cast<std::size_t>(od) * g.hout + oh) * g.wout;
              if (iz < 0 || iz >= g.din || iy < 0 || iy >= g.hin) {
                std::fill(out, out + g.wout, T(0));
                continue;
              }
              const T* src = x + ((static_cast<std::size_t>(c) * g.din + iz) * g.hin + iy) * g.win;
              for (int ow = 0; ow < g.wout; ++ow) {
                const int ix = ow * g.sw - g.pw + e;
                out[ow] = (ix >= 0 && ix < g.win) ? src[ix] : T(0);
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void Graph<T>::col2im(const ConvGeom& g, const T* cols, T* dx) const {
  const std::size_t ncol = g.cols();
  std::size_t row = 0;
  for (int c = 0; c < g.cin; ++c) {
    for (int a = 0; a < g.kd; ++a) {
      for (int b = 0; b < g.kh; ++b) {
        for (int e = 0; e < g.kw; ++e, ++row) {
          const T* src = cols + row * ncol;
          for (int od = 0; od < g.dout; ++od) {
            const int iz = od * g.sd - g.pd + a;
            if (iz < 0 || iz >= g.din) continue;
            for (int oh = 0; oh < g.hout; ++oh) {
              const int iy = oh * g.sh - g.ph + b;
              if (iy < 0 || iy >= g.hin) continue;
              const T* in = src + (static_cast<std::size_t>(od) * g.hout + oh) * g.wout;
              T* dst = dx + ((static_cast<std::size_t>(c) * g.din + iz) * g.hin + iy) * g.win;
              for (int ow = 0; ow < g.wout; ++ow) {
                const int ix = ow * g.sw - g.pw + e;
                if (ix >= 0 && ix < g.win) dst[ix] += in[ow];
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
typename Graph<T>::Var Graph<T>::conv(Var x, Var w, Var b, ConvSpec spec) {
  const Tensor<T>& xv = nodes_[x.id].value;
  const Tensor<T>& wv = nodes_[w.id].value;
  const Tensor<T>& bv = nodes_[b.id].value;
  const bool volumetric = xv.rank() == 4;
  if (!(xv.rank() == 3 || volumetric) || wv.rank() != xv.rank() + 1) {
    shape_error("conv input " + shape_string(xv.shape) + " incompatible with weight " + shape_string(wv.shape));
  }
  if (spec.stride < 1 || spec.pad < 0) shape_error("conv stride must be >= 1 and pad >= 0");
  ConvGeom g;
  g.cin = xv.dim(0);
  g.cout = wv.dim(0);
  if (wv.dim(1) != g.cin) shape_error("conv weight expects " + std::to_string(wv.dim(1)) + " input channels, got " +
                                      std::to_string(g.cin));
  if (bv.rank() != 1 || bv.dim(0) != g.cout) shape_error("conv bias shape " + shape_string(bv.shape));
  if (volumetric) {
    g.din = xv.dim(1);
    g.hin = xv.dim(2);
    g.win = xv.dim(3);
    g.kd = wv.dim(2);
    g.kh = wv.dim(3);
    g.kw = wv.dim(4);
    g.sd = spec.stride;
    g.pd = spec.pad;
  } else {
    g.hin = xv.dim(1);
    g.win = xv.dim(2);
    g.kh = wv.dim(2);
    g.kw = wv.dim(3);
  }
  g.sh = g.sw = spec.stride;
  g.ph = g.pw = spec.pad;
  g.dout = (g.din + 2 * g.pd - g.kd) / g.sd + 1;
  g.hout = (g.hin + 2 * g.ph - g.kh) / g.sh + 1;
  g.wout = (g.win + 2 * g.pw - g.kw) / g.sw + 1;
  if (g.din + 2 * g.pd < g.kd || g.hin + 2 * g.ph < g.kh || g.win + 2 * g.pw < g.kw) {
    shape_error("conv kernel larger than padded input " + shape_string(xv.shape));
  }
  g.pointwise = g.kd == 1 && g.kh == 1 && g.kw == 1 && spec.stride == 1 && spec.pad == 0;

  Node n;
  n.op = Op::Conv;
  n.in = {x.id, w.id, b.id};
  n.needs_grad = nodes_[x.id].needs_grad || nodes_[w.id].needs_grad || nodes_[b.id].needs_grad;
  n.geom = g;
  n.value = volumetric ? Tensor<T>({g.cout, g.dout, g.hout, g.wout}) : Tensor<T>({g.cout, g.hout, g.wout});

  const auto K = static_cast<Eigen::Index>(g.rows());
  const auto N = static_cast<Eigen::Index>(g.cols());
  const T* cols_ptr = xv.data.data();
  if (!g.pointwise) {
    n.cols.resize(g.rows() * g.cols());
    im2col(g, xv.data.data(), n.cols.data());
    cols_ptr = n.cols.data();
  }
  CMapR<T> wm(wv.data.data(), g.cout, K);
  CMapR<T> cm(cols_ptr, K, N);
  MapR<T> om(n.value.data.data(), g.cout, N);
  om.noalias() = wm * cm;
  for (int co = 0; co < g.cout; ++co) om.row(co).array() += bv.data[co];
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::concat(std::span<const Var> xs) {
  if (xs.empty()) shape_error("concat of nothing");
  const Shape& first = nodes_[xs[0].id].value.shape;
  Shape out_shape = first;
  out_shape[0] = 0;
  Node n;
  n.op = Op::Concat;
  for (Var v : xs) {
    const Shape& s = nodes_[v.id].value.shape;
    if (s.size() != first.size() || !std::equal(s.begin() + 1, s.end(), first.begin() + 1)) {
      shape_error("concat shape mismatch " + shape_string(s) + " vs " + shape_string(first));
    }
    out_shape[0] += s[0];
    n.in.push_back(v.id);
    n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
  }
  n.value = Tensor<T>(out_shape);
  auto dst = n.value.data.begin();
  for (Var v : xs) dst = std::copy(nodes_[v.id].value.data.begin(), nodes_[v.id].value.data.end(), dst);
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::upsample2x(Var x) {
  const Tensor<T>& xv = nodes_[x.id].value;
  if (xv.rank() != 3) shape_error("upsample2x expects (C, H, W), got " + shape_string(xv.shape));
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Node n;
  n.op = Op::Upsample2x;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  n.value = Tensor<T>({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < 2 * h; ++y) {
      const T* src = xv.data.data() + (static_cast<std::size_t>(ch) * h + y / 2) * w;
      T* dst = n.value.data.data() + (static_cast<std::size_t>(ch) * 2 * h + y) * 2 * w;
      for (int xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
    }
  }
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::leaky_relu(Var x, T slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  n.scalar = slope;
  n.value = nodes_[x.id].value;
  for (T& v : n.value.data) v = v > T(0) ? v : slope * v;
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::tanh(Var x) {
  Node n;
  n.op = Op::Tanh;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  n.value = nodes_[x.id].value;
  for (T& v : n.value.data) v = std::tanh(v);
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::sigmoid(Var x) {
  Node n;
  n.op = Op::Sigmoid;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  n.value = nodes_[x.id].value;
  for (T& v : n.value.data) v = T(1) / (T(1) + std::exp(-v));
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::mean(Var x) {
  const Tensor<T>& xv = nodes_[x.id].value;
  Node n;
  n.op = Op::Mean;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  double acc = 0.0;
  for (T v : xv.data) acc += v;
  n.value = Tensor<T>(Shape{}, static_cast<T>(acc / static_cast<double>(xv.size())));
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::mean_axis(Var x, int axis) {
  const Tensor<T>& xv = nodes_[x.id].value;
  if (axis < 0 || axis >= xv.rank()) shape_error("mean_axis axis out of range for " + shape_string(xv.shape));
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (int i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  const int len = xv.dim(axis);
  Shape out_shape = xv.shape;
  out_shape.erase(out_shape.begin() + axis);

  Node n;
  n.op = Op::MeanAxis;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  n.axis = axis;
  n.value = Tensor<T>(out_shape);
  std::vector<double> acc(inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int a = 0; a < len; ++a) {
      const T* src = xv.data.data() + (o * len + a) * inner;
      for (std::size_t i = 0; i < inner; ++i) acc[i] += src[i];
    }
    T* dst = n.value.data.data() + o * inner;
    for (std::size_t i = 0; i < inner; ++i) dst[i] = static_cast<T>(acc[i] / len);
  }
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::squared_error(Var a, Var b) {
  const Tensor<T>& av = nodes_[a.id].value;
  const Tensor<T>& bv = nodes_[b.id].value;
  if (av.shape != bv.shape) {
    shape_error("squared_error shape mismatch " + shape_string(av.shape) + " vs " + shape_string(bv.shape));
  }
  Node n;
  n.op = Op::SquaredError;
  n.in = {a.id, b.id};
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av.data[i]) - static_cast<double>(bv.data[i]);
    acc += d * d;
  }
  n.value = Tensor<T>(Shape{}, static_cast<T>(acc / static_cast<double>(av.size())));
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::crop(Var x, std::vector<int> offset, Shape extent) {
  const Tensor<T>& xv = nodes_[x.id].value;
  if (static_cast<int>(offset.size()) != xv.rank() || static_cast<int>(extent.size()) != xv.rank()) {
    shape_error("crop rank mismatch for " + shape_string(xv.shape));
  }
  for (int i = 0; i < xv.rank(); ++i) {
    if (offset[i] < 0 || extent[i] < 1 || offset[i] + extent[i] > xv.dim(i)) {
      shape_error("crop window " + shape_string(offset) + "+" + shape_string(extent) + " outside " +
                  shape_string(xv.shape));
    }
  }
  Node n;
  n.op = Op::Crop;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  n.offset = offset;
  n.value = Tensor<T>(extent);
  // Walk the output in row-major order, copying contiguous innermost runs.
  const int r = xv.rank();
  std::vector<int> idx(r, 0);
  const std::size_t run = static_cast<std::size_t>(extent[r - 1]);
  const std::size_t nruns = n.value.size() / run;
  for (std::size_t k = 0; k < nruns; ++k) {
    std::size_t src = 0;
    for (int i = 0; i < r; ++i) src = src * xv.dim(i) + (offset[i] + idx[i]);
    std::copy_n(xv.data.data() + src, run, n.value.data.data() + k * run);
    for (int i = r - 2; i >= 0; --i) {
      if (++idx[i] < extent[i]) break;
      idx[i] = 0;
    }
  }
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::reshape(Var x, Shape shape) {
  if (shape_count(shape) != nodes_[x.id].value.size()) {
    shape_error("reshape " + shape_string(nodes_[x.id].value.shape) + " -> " + shape_string(shape));
  }
  Node n;
  n.op = Op::Reshape;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  n.value = Tensor<T>(std::move(shape), nodes_[x.id].value.data);
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::weighted_sum(std::span<const Var> xs, std::span<const T> weights) {
  if (xs.empty() || xs.size() != weights.size()) shape_error("weighted_sum needs one weight per input");
  const Shape& s0 = nodes_[xs[0].id].value.shape;
  Node n;
  n.op = Op::WeightedSum;
  n.weights.assign(weights.begin(), weights.end());
  n.value = Tensor<T>(s0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor<T>& v = nodes_[xs[i].id].value;
    if (v.shape != s0) shape_error("weighted_sum shape mismatch " + shape_string(v.shape));
    n.in.push_back(xs[i].id);
    n.needs_grad = n.needs_grad || nodes_[xs[i].id].needs_grad;
    for (std::size_t j = 0; j < v.size(); ++j) n.value.data[j] += weights[i] * v.data[j];
  }
  return push(std::move(n));
}

template <class T>
typename Graph<T>::Var Graph<T>::step(Var x, T threshold) {
  Node n;
  n.op = Op::Step;
  n.in = {x.id};
  n.needs_grad = nodes_[x.id].needs_grad;
  n.scalar = threshold;
  n.value = nodes_[x.id].value;
  for (T& v : n.value.data) v = v > threshold ? T(1) : T(0);
  return push(std::move(n));
}

template <class T>
std::vector<std::uint8_t> Graph<T>::leaky_signs() const {
  std::vector<std::uint8_t> out;
  for (const Node& n : nodes_) {
    if (n.op != Op::LeakyRelu) continue;
    for (T v : nodes_[n.in[0]].value.data) out.push_back(v > T(0) ? 1 : 0);
  }
  return out;
}

template <class T>
void Graph<T>::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1) {
    shape_error("backward target must be a scalar, got " + shape_string(nodes_[loss.id].value.shape));
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!nodes_[loss.id].needs_grad) return;
  grad_buffer(loss.id)[0] = T(1);

  for (int id = loss.id; id >= 0; --id) {
    if (nodes_[id].grad.empty() || !nodes_[id].needs_grad) continue;
    const Op op = nodes_[id].op;
    if (op == Op::Input || op == Op::Parameter) continue;
    if (op == Op::Step) {
      throw Error(ErrorCode::UnsupportedOperation, std::string("no derivative rule for '") + op_name(op) +
                                                       "' on the gradient path");
    }
    // Parents may be reallocated by grad_buffer(); re-fetch by index.
    auto wants = [&](int in) { return nodes_[nodes_[id].in[in]].needs_grad; };
    auto parent_grad = [&](int in) -> std::vector<T>& { return grad_buffer(nodes_[id].in[in]); };
    const std::vector<T>& g = nodes_[id].grad;
    const Tensor<T>& y = nodes_[id].value;

    switch (op) {
      case Op::Conv: {
        const ConvGeom& geom = nodes_[id].geom;
        const auto K = static_cast<Eigen::Index>(geom.rows());
        const auto N = static_cast<Eigen::Index>(geom.cols());
        CMapR<T> gm(g.data(), geom.cout, N);
        const T* cols_ptr = geom.pointwise ? nodes_[nodes_[id].in[0]].value.data.data() : nodes_[id].cols.data();
        CMapR<T> cm(cols_ptr, K, N);
        if (wants(1)) {
          MapR<T> dw(parent_grad(1).data(), geom.cout, K);
          dw.noalias() += gm * cm.transpose();
        }
        if (wants(2)) {
          auto& db = parent_grad(2);
          // Plain loop: Eigen's vectorised sum peels by address alignment.
          for (int co = 0; co < geom.cout; ++co) {
            const T* row = g.data() + static_cast<std::size_t>(co) * N;
            T acc = T(0);
            for (Eigen::Index i = 0; i < N; ++i) acc += row[i];
            db[co] += acc;
          }
        }
        if (wants(0)) {
          CMapR<T> wm(nodes_[nodes_[id].in[1]].value.data.data(), geom.cout, K);
          auto& dx = parent_grad(0);
          if (geom.pointwise) {
            MapR<T> dxm(dx.data(), K, N);
            dxm.noalias() += wm.transpose() * gm;
          } else {
            MatR<T> dcols = wm.transpose() * gm;
            col2im(geom, dcols.data(), dx.data());
          }
        }
        break;
      }
      case Op::Concat: {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < nodes_[id].in.size(); ++i) {
          const std::size_t len = nodes_[nodes_[id].in[i]].value.size();
          if (wants(static_cast<int>(i))) {
            auto& dx = parent_grad(static_cast<int>(i));
            for (std::size_t j = 0; j < len; ++j) dx[j] += g[pos + j];
          }
          pos += len;
        }
        break;
      }
      case Op::Upsample2x: {
        if (!wants(0)) break;
        auto& dx = parent_grad(0);
        const int c = y.dim(0), h2 = y.dim(1), w2 = y.dim(2);
        const int h = h2 / 2, w = w2 / 2;
        for (int ch = 0; ch < c; ++ch) {
          for (int yy = 0; yy < h2; ++yy) {
            const T* src = g.data() + (static_cast<std::size_t>(ch) * h2 + yy) * w2;
            T* dst = dx.data() + (static_cast<std::size_t>(ch) * h + yy / 2) * w;
            for (int xx = 0; xx < w2; ++xx) dst[xx / 2] += src[xx];
          }
        }
        break;
      }
      case Op::LeakyRelu: {
        if (!wants(0)) break;
        const auto& xv = nodes_[nodes_[id].in[0]].value.data;
        const T slope = nodes_[id].scalar;
        auto& dx = parent_grad(0);
        for (std::size_t j = 0; j < g.size(); ++j) dx[j] += xv[j] > T(0) ? g[j] : slope * g[j];
        break;
      }
      case Op::Tanh: {
        if (!wants(0)) break;
        auto& dx = parent_grad(0);
        for (std::size_t j = 0; j < g.size(); ++j) dx[j] += g[j] * (T(1) - y.data[j] * y.data[j]);
        break;
      }
      case Op::Sigmoid: {
        if (!wants(0)) break;
        auto& dx = parent_grad(0);
        for (std::size_t j = 0; j < g.size(); ++j) dx[j] += g[j] * y.data[j] * (T(1) - y.data[j]);
        break;
      }
      case Op::Mean: {
        if (!wants(0)) break;
        auto& dx = parent_grad(0);
        const T share = g[0] / static_cast<T>(dx.size());
        for (T& v : dx) v += share;
        break;
      }
      case Op::MeanAxis: {
        if (!wants(0)) break;
        const Tensor<T>& xv = nodes_[nodes_[id].in[0]].value;
        const int axis = nodes_[id].axis;
        std::size_t outer = 1, inner = 1;
        for (int i = 0; i < axis; ++i) outer *= xv.dim(i);
        for (int i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
        const int len = xv.dim(axis);
        auto& dx = parent_grad(0);
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = g.data() + o * inner;
          for (int a = 0; a < len; ++a) {
            T* dst = dx.data() + (o * len + a) * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i] / static_cast<T>(len);
          }
        }
        break;
      }
      case Op::SquaredError: {
        const auto& av = nodes_[nodes_[id].in[0]].value.data;
        const auto& bv = nodes_[nodes_[id].in[1]].value.data;
        const T scale = T(2) * g[0] / static_cast<T>(av.size());
        if (wants(0)) {
          auto& da = parent_grad(0);
          for (std::size_t j = 0; j < av.size(); ++j) da[j] += scale * (av[j] - bv[j]);
        }
        if (wants(1)) {
          auto& db = parent_grad(1);
          for (std::size_t j = 0; j < av.size(); ++j) db[j] -= scale * (av[j] - bv[j]);
        }
        break;
      }
      case Op::Crop: {
        if (!wants(0)) break;
        const Tensor<T>& xv = nodes_[nodes_[id].in[0]].value;
        const auto& offset = nodes_[id].offset;
        auto& dx = parent_grad(0);
        const int r = xv.rank();
        std::vector<int> idx(r, 0);
        const std::size_t run = static_cast<std::size_t>(y.dim(r - 1));
        const std::size_t nruns = y.size() / run;
        for (std::size_t k = 0; k < nruns; ++k) {
          std::size_t dst = 0;
          for (int i = 0; i < r; ++i) dst = dst * xv.dim(i) + (offset[i] + idx[i]);
          for (std::size_t j = 0; j < run; ++j) dx[dst + j] += g[k * run + j];
          for (int i = r - 2; i >= 0; --i) {
            if (++idx[i] < y.dim(i)) break;
            idx[i] = 0;
          }
        }
        break;
      }
      case Op::Reshape: {
        if (!wants(0)) break;
        auto& dx = parent_grad(0);
        for (std::size_t j = 0; j < g.size(); ++j) dx[j] += g[j];
        break;
      }
      case Op::WeightedSum: {
        for (std::size_t i = 0; i < nodes_[id].in.size(); ++i) {
          if (!wants(static_cast<int>(i))) continue;
          auto& dx = parent_grad(static_cast<int>(i));
          const T w = nodes_[id].weights[i];
          for (std::size_t j = 0; j < g.size(); ++j) dx[j] += w * g[j];
        }
        break;
      }
      default:
        throw Error(ErrorCode::UnsupportedOperation, std::string("no derivative rule for '") + op_name(op) + "'");
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace oral3d::nn
