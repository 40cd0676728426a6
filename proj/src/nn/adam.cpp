#include "oral3d/nn/adam.hpp"

#include <cmath>

#include "oral3d/error.hpp"

namespace oral3d::nn {

template <class T>
void adam_step(std::vector<NamedTensor<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               double lr, const AdamConfig& cfg) {
  if (grads.size() != params.size()) throw Error(ErrorCode::Dimension, "one gradient per parameter tensor");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.size(), T(0));
      state.v.emplace_back(p.value.size(), T(0));
    }
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value.data;
    const auto& g = grads[i].data;
    if (g.size() != w.size()) throw Error(ErrorCode::Dimension, "gradient shape mismatch for " + params[i].name);
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
      w[j] = static_cast<T>(w[j] - update);
    }
  }
}

template void adam_step<float>(std::vector<NamedTensor<float>>&, const std::vector<Tensor<float>>&,
                               AdamState<float>&, double, const AdamConfig&);
template void adam_step<double>(std::vector<NamedTensor<double>>&, const std::vector<Tensor<double>>&,
                                AdamState<double>&, double, const AdamConfig&);

}  // namespace oral3d::nn
