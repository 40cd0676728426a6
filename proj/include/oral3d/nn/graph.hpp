#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oral3d/nn/tensor.hpp"

namespace oral3d::nn {

enum class Op {
  Input,
  Parameter,
  Conv,
  Concat,
  Upsample2x,
  LeakyRelu,
  Tanh,
  Sigmoid,
  Mean,
  MeanAxis,
  SquaredError,
  Crop,
  Reshape,
  WeightedSum,
  // Forward-only: has no derivative rule, backward() refuses to pass through it.
  Step,
};

const char* op_name(Op op);

struct ConvSpec {
  int stride = 1;
  int pad = 0;
};

/// Reverse-mode tape over whole tensors.
///
/// Nodes are appended in evaluation order, so the tape order is already a
/// topological order and backward() walks it from the loss to the leaves.
/// Values are computed eagerly. Gradients are only produced for nodes that
/// depend on a Parameter.
template <class T>
class Graph {
 public:
  struct Var {
    int id = -1;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor<T> value);
  Var parameter(Tensor<T> value);

  // x: (C, H, W) with w: (Co, C, k, k), or x: (C, D, H, W) with
  // w: (Co, C, k, k, k). b: (Co).
  Var conv(Var x, Var w, Var b, ConvSpec spec);
  // Concatenate along axis 0 (channels).
  Var concat(std::span<const Var> xs);
  // Nearest-neighbour x2 upsampling of a (C, H, W) map.
  Var upsample2x(Var x);
  Var leaky_relu(Var x, T slope);
  Var tanh(Var x);
  Var sigmoid(Var x);
  // Mean of all elements, shape {}.
  Var mean(Var x);
  // Mean along one axis; the axis is removed from the shape.
  Var mean_axis(Var x, int axis);
  // mean((a - b)^2), shape {}.
  Var squared_error(Var a, Var b);
  Var crop(Var x, std::vector<int> offset, Shape extent);
  Var reshape(Var x, Shape shape);
  // sum_i weights[i] * xs[i]; all inputs share one shape.
  Var weighted_sum(std::span<const Var> xs, std::span<const T> weights);
  Var step(Var x, T threshold);

  const Tensor<T>& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the last backward() target with respect to v (zeros when
  // v did not influence it).
  Tensor<T> grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].needs_grad; }

  // Throws UnsupportedOperation if a Step node lies on a gradient path.
  void backward(Var loss);

  int size() const { return static_cast<int>(nodes_.size()); }
  Op op(int id) const { return nodes_[id].op; }

  // Sign pattern of every LeakyRelu input, in tape order. Finite-difference
  // checks use it to detect perturbations that cross a kink.
  std::vector<std::uint8_t> leaky_signs() const;

 private:
  struct ConvGeom {
    int cin = 0, din = 1, hin = 1, win = 1;
    int kd = 1, kh = 1, kw = 1;
    int sd = 1, sh = 1, sw = 1;
    int pd = 0, ph = 0, pw = 0;
    int dout = 1, hout = 1, wout = 1;
    int cout = 0;
    bool pointwise = false;
    std::size_t rows() const { return static_cast<std::size_t>(cin) * kd * kh * kw; }
    std::size_t cols() const { return static_cast<std::size_t>(dout) * hout * wout; }
  };

  struct Node {
    Op op = Op::Input;
    std::vector<int> in;
    Tensor<T> value;
    std::vector<T> grad;
    bool needs_grad = false;
    // op attributes
    ConvGeom geom;
    std::vector<T> cols;
    T scalar = T(0);
    int axis = 0;
    std::vector<int> offset;
    std::vector<T> weights;
  };

  Var push(Node node);
  std::vector<T>& grad_buffer(int id);
  void im2col(const ConvGeom& g, const T* x, T* cols) const;
  void col2im(const ConvGeom& g, const T* cols, T* dx) const;

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace oral3d::nn
