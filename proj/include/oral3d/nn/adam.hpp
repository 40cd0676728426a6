#pragma once

#include <cstdint>
#include <vector>

#include "oral3d/nn/network.hpp"
#include "oral3d/nn/tensor.hpp"

namespace oral3d::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t t = 0;
};

// One bias-corrected Adam update over a parameter list. grads must match
// params in order and shape; state is lazily sized on first use.
template <class T>
void adam_step(std::vector<NamedTensor<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               double lr, const AdamConfig& cfg = {});

extern template void adam_step<float>(std::vector<NamedTensor<float>>&, const std::vector<Tensor<float>>&,
                                      AdamState<float>&, double, const AdamConfig&);
extern template void adam_step<double>(std::vector<NamedTensor<double>>&, const std::vector<Tensor<double>>&,
                                       AdamState<double>&, double, const AdamConfig&);

}  // namespace oral3d::nn
