#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oral3d/nn/graph.hpp"
#include "oral3d/nn/tensor.hpp"
#include "oral3d/synthesis.hpp"
#include "oral3d/volume.hpp"

namespace oral3d::nn {

inline constexpr double kLeakySlope = 0.2;

/// Layer-count contract shared by the generator and the discriminator.
///
/// Generator: a 3x3 stem, then `stages` encoder stages (stride-2 conv + dense
/// block A, which grows channels by dense_layers * growth), then the mirrored
/// decoder (x2 upsampling, skip concatenation, dense block B which fuses back
/// to a fixed channel count), a final 3x3 conv to `depth` channels and tanh.
/// Output channels are read as depth, giving a (W, H, depth) flattened volume.
///
/// Discriminator: `disc_layers` stride-2 4x4x4 convs starting at disc_base
/// channels (doubling each layer), a 3x3x3 conv to one channel, spatial mean,
/// sigmoid.
struct ArchDescriptor {
  int in_h = 64;
  int in_w = 128;
  int stages = 3;
  int base_channels = 16;
  int growth = 8;
  int dense_layers = 2;
  int depth = 32;
  int patch_size = 24;
  int disc_base = 8;
  int disc_layers = 3;

  void validate() const;
  // Channel count after encoder stage s (s = 0 is the stem).
  int encoder_channels(int s) const { return base_channels + s * dense_layers * growth; }
  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
};

template <class T>
struct NetParams {
  ArchDescriptor arch;
  std::vector<NamedTensor<T>> generator;
  std::vector<NamedTensor<T>> discriminator;

  std::size_t parameter_count() const;

  template <class U>
  NetParams<U> cast() const {
    NetParams<U> out;
    out.arch = arch;
    for (const auto& p : generator) out.generator.push_back({p.name, p.value.template cast<U>()});
    for (const auto& p : discriminator) out.discriminator.push_back({p.name, p.value.template cast<U>()});
    return out;
  }
};

enum class Init { Zero, HeNormal };

// Parameter shapes derived from the descriptor, in a fixed order.
template <class T>
NetParams<T> make_params(const ArchDescriptor& arch, Init init, std::uint64_t seed);

// Graph builders. `params` are Vars bound to the tensors of the matching
// NetParams list, in order. input: (1, in_h, in_w). Returns (depth, in_h, in_w).
template <class T>
typename Graph<T>::Var generator_graph(Graph<T>& g, const ArchDescriptor& arch,
                                       std::span<const typename Graph<T>::Var> params,
                                       typename Graph<T>::Var input);
// patch: (1, p, p, p). Returns the sigmoid score, shape {}.
template <class T>
typename Graph<T>::Var discriminator_graph(Graph<T>& g, const ArchDescriptor& arch,
                                           std::span<const typename Graph<T>::Var> params,
                                           typename Graph<T>::Var patch);

template <class T>
std::vector<typename Graph<T>::Var> bind(Graph<T>& g, const std::vector<NamedTensor<T>>& params, bool trainable);

// px as a (1, h, w) tensor.
template <class T>
Tensor<T> image_tensor(const Image2& px);
// FVolume as its (d, h, w) channels-first tensor (same memory order).
template <class T>
Tensor<T> flat_tensor(const FVolume& f);
FVolume tensor_to_flat(const Tensor<float>& t, double depth_step);

FVolume generator_forward(const NetParams<float>& params, const Image2& px, double depth_step = 1.0);
// Score in (0, 1) for a cubic patch of side arch.patch_size.
double discriminator_forward(const NetParams<float>& params, const Tensor<float>& patch);

// Replicates each PX pixel along depth.
FVolume smear_baseline(const Image2& px, int d, double depth_step = 1.0);

extern template NetParams<float> make_params<float>(const ArchDescriptor&, Init, std::uint64_t);
extern template NetParams<double> make_params<double>(const ArchDescriptor&, Init, std::uint64_t);

}  // namespace oral3d::nn
