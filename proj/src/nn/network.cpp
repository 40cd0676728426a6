#include "oral3d/nn/network.hpp"

#include <cmath>
#include <random>

#include "oral3d/error.hpp"

namespace oral3d::nn {

void ArchDescriptor::validate() const {
  if (stages < 1 || base_channels < 1 || growth < 1 || dense_layers < 0 || depth < 1) {
    throw Error(ErrorCode::Validation, "generator descriptor needs stages, base, growth, depth >= 1");
  }
  const int factor = 1 << stages;
  if (in_h < factor || in_w < factor || in_h % factor != 0 || in_w % factor != 0) {
    throw Error(ErrorCode::Validation, "generator input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                                           " must be divisible by 2^stages = " + std::to_string(factor));
  }
  if (disc_layers < 1 || disc_base < 1 || patch_size < (1 << disc_layers)) {
    throw Error(ErrorCode::Validation, "discriminator needs patch_size >= 2^disc_layers");
  }
}

template <class T>
std::size_t NetParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : generator) n += p.value.size();
  for (const auto& p : discriminator) n += p.value.size();
  return n;
}

namespace {

struct ParamSpec {
  std::string name;
  Shape shape;
  int fan_in;
  double gain;
};

std::vector<ParamSpec> generator_specs(const ArchDescriptor& a) {
  std::vector<ParamSpec> specs;
  auto conv = [&specs](const std::string& name, int cout, int cin, int k, double gain) {
    specs.push_back({name + ".w", {cout, cin, k, k}, cin * k * k, gain});
    specs.push_back({name + ".b", {cout}, cin * k * k, 0.0});
  };
  const double he = 2.0;
  conv("stem", a.base_channels, 1, 3, he);
  for (int s = 1; s <= a.stages; ++s) {
    const int c = a.encoder_channels(s - 1);
    const std::string p = "enc" + std::to_string(s);
    conv(p + ".down", c, c, 3, he);
    for (int l = 0; l < a.dense_layers; ++l) conv(p + ".dense" + std::to_string(l), a.growth, c + l * a.growth, 3, he);
  }
  int current = a.encoder_channels(a.stages);
  for (int s = a.stages; s >= 1; --s) {
    const int skip = a.encoder_channels(s - 1);
    const int out = s > 1 ? skip : a.depth;
    const std::string p = "dec" + std::to_string(s);
    conv(p + ".fuse", out, current + skip, 1, he);
    for (int l = 0; l < a.dense_layers; ++l) {
      conv(p + ".dense" + std::to_string(l), a.growth, out + l * a.growth, 3, he);
    }
    conv(p + ".merge", out, out + a.dense_layers * a.growth, 1, he);
    current = out;
  }
  conv("final", a.depth, a.depth, 3, 1.0);
  return specs;
}

std::vector<ParamSpec> discriminator_specs(const ArchDescriptor& a) {
  std::vector<ParamSpec> specs;
  int cin = 1;
  for (int l = 0; l < a.disc_layers; ++l) {
    const int cout = a.disc_base << l;
    const std::string p = "disc" + std::to_string(l);
    specs.push_back({p + ".w", {cout, cin, 4, 4, 4}, cin * 64, 2.0});
    specs.push_back({p + ".b", {cout}, cin * 64, 0.0});
    cin = cout;
  }
  specs.push_back({"disc_out.w", {1, cin, 3, 3, 3}, cin * 27, 1.0});
  specs.push_back({"disc_out.b", {1}, cin * 27, 0.0});
  return specs;
}

template <class T>
std::vector<NamedTensor<T>> instantiate(const std::vector<ParamSpec>& specs, Init init, std::mt19937_64& rng) {
  std::vector<NamedTensor<T>> out;
  out.reserve(specs.size());
  for (const auto& s : specs) {
    Tensor<T> t(s.shape, T(0));
    if (init == Init::HeNormal && s.gain > 0.0) {
      std::normal_distribution<double> dist(0.0, std::sqrt(s.gain / s.fan_in));
      for (T& v : t.data) v = static_cast<T>(dist(rng));
    }
    out.push_back({s.name, std::move(t)});
  }
  return out;
}

template <class T>
class ParamCursor {
 public:
  explicit ParamCursor(std::span<const typename Graph<T>::Var> p) : p_(p) {}
  typename Graph<T>::Var next() {
    if (i_ >= p_.size()) throw Error(ErrorCode::Dimension, "too few parameters bound for the descriptor");
    return p_[i_++];
  }
  void expect_done() const {
    if (i_ != p_.size()) throw Error(ErrorCode::Dimension, "more parameters bound than the descriptor uses");
  }

 private:
  std::span<const typename Graph<T>::Var> p_;
  std::size_t i_ = 0;
};

template <class T>
typename Graph<T>::Var conv_act(Graph<T>& g, ParamCursor<T>& pc, typename Graph<T>::Var x, ConvSpec spec) {
  auto w = pc.next();
  auto b = pc.next();
  return g.leaky_relu(g.conv(x, w, b, spec), static_cast<T>(kLeakySlope));
}

template <class T>
typename Graph<T>::Var dense_layers(Graph<T>& g, ParamCursor<T>& pc, typename Graph<T>::Var x, int layers) {
  using Var = typename Graph<T>::Var;
  for (int l = 0; l < layers; ++l) {
    Var fresh = conv_act(g, pc, x, {1, 1});
    const Var parts[] = {x, fresh};
    x = g.concat(parts);
  }
  return x;
}

}  // namespace

template <class T>
NetParams<T> make_params(const ArchDescriptor& arch, Init init, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  NetParams<T> p;
  p.arch = arch;
  p.generator = instantiate<T>(generator_specs(arch), init, rng);
  p.discriminator = instantiate<T>(discriminator_specs(arch), init, rng);
  return p;
}

template <class T>
std::vector<typename Graph<T>::Var> bind(Graph<T>& g, const std::vector<NamedTensor<T>>& params, bool trainable) {
  std::vector<typename Graph<T>::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(trainable ? g.parameter(p.value) : g.input(p.value));
  return vars;
}

template <class T>
typename Graph<T>::Var generator_graph(Graph<T>& g, const ArchDescriptor& arch,
                                       std::span<const typename Graph<T>::Var> params,
                                       typename Graph<T>::Var input) {
  using Var = typename Graph<T>::Var;
  const Shape& in_shape = g.value(input).shape;
  if (in_shape != Shape{1, arch.in_h, arch.in_w}) {
    throw Error(ErrorCode::Dimension, "generator expects input (1, " + std::to_string(arch.in_h) + ", " +
                                          std::to_string(arch.in_w) + "), got " + shape_string(in_shape));
  }
  ParamCursor<T> pc(params);
  std::vector<Var> skips;
  Var x = conv_act(g, pc, input, {1, 1});
  skips.push_back(x);
  for (int s = 1; s <= arch.stages; ++s) {
    x = conv_act(g, pc, x, {2, 1});
    x = dense_layers(g, pc, x, arch.dense_layers);
    skips.push_back(x);
  }
  for (int s = arch.stages; s >= 1; --s) {
    x = g.upsample2x(x);
    const Var parts[] = {x, skips[s - 1]};
    x = g.concat(parts);
    x = conv_act(g, pc, x, {1, 0});
    x = dense_layers(g, pc, x, arch.dense_layers);
    x = conv_act(g, pc, x, {1, 0});
  }
  auto w = pc.next();
  auto b = pc.next();
  pc.expect_done();
  return g.tanh(g.conv(x, w, b, {1, 1}));
}

template <class T>
typename Graph<T>::Var discriminator_graph(Graph<T>& g, const ArchDescriptor& arch,
                                           std::span<const typename Graph<T>::Var> params,
                                           typename Graph<T>::Var patch) {
  const int p = arch.patch_size;
  const Shape& shape = g.value(patch).shape;
  if (shape != Shape{1, p, p, p}) {
    throw Error(ErrorCode::Dimension, "discriminator expects patch (1, " + std::to_string(p) + ", " +
                                          std::to_string(p) + ", " + std::to_string(p) + "), got " +
                                          shape_string(shape));
  }
  ParamCursor<T> pc(params);
  auto x = patch;
  for (int l = 0; l < arch.disc_layers; ++l) x = conv_act(g, pc, x, {2, 1});
  auto w = pc.next();
  auto b = pc.next();
  pc.expect_done();
  auto logits = g.conv(x, w, b, {1, 1});
  return g.sigmoid(g.mean(logits));
}

template <class T>
Tensor<T> image_tensor(const Image2& px) {
  Tensor<T> t({1, px.height(), px.width()});
  std::copy(px.values().begin(), px.values().end(), t.data.begin());
  return t;
}

template <class T>
Tensor<T> flat_tensor(const FVolume& f) {
  Tensor<T> t({f.d(), f.h(), f.w()});
  const auto vals = f.grid().values();
  std::copy(vals.begin(), vals.end(), t.data.begin());
  return t;
}

FVolume tensor_to_flat(const Tensor<float>& t, double depth_step) {
  if (t.rank() != 3) throw Error(ErrorCode::Dimension, "flattened volume tensor must be (d, h, w)");
  return FVolume(Volume3(Dims3{t.dim(2), t.dim(1), t.dim(0)}, t.data), depth_step);
}

FVolume generator_forward(const NetParams<float>& params, const Image2& px, double depth_step) {
  if (px.width() != params.arch.in_w || px.height() != params.arch.in_h) {
    throw Error(ErrorCode::Dimension, "PX is " + std::to_string(px.width()) + "x" + std::to_string(px.height()) +
                                          ", generator expects " + std::to_string(params.arch.in_w) + "x" +
                                          std::to_string(params.arch.in_h));
  }
  Graph<float> g;
  const auto vars = nn::bind(g, params.generator, false);
  const auto out = generator_graph<float>(g, params.arch, vars, g.input(image_tensor<float>(px)));
  return tensor_to_flat(g.value(out), depth_step);
}

double discriminator_forward(const NetParams<float>& params, const Tensor<float>& patch) {
  const int p = params.arch.patch_size;
  Tensor<float> in = patch;
  if (patch.rank() == 3 && patch.shape == Shape{p, p, p}) in.shape = {1, p, p, p};
  Graph<float> g;
  const auto vars = nn::bind(g, params.discriminator, false);
  return g.value(discriminator_graph<float>(g, params.arch, vars, g.input(std::move(in)))).data[0];
}

FVolume smear_baseline(const Image2& px, int d, double depth_step) {
  if (d < 1) throw Error(ErrorCode::Validation, "smear depth must be >= 1");
  FVolume f(px.width(), px.height(), d, depth_step);
  for (int k = 0; k < d; ++k) {
    for (int z = 0; z < px.height(); ++z) {
      for (int u = 0; u < px.width(); ++u) f.at(u, z, k) = px.at(u, z);
    }
  }
  return f;
}

template struct NetParams<float>;
template struct NetParams<double>;
template NetParams<float> make_params<float>(const ArchDescriptor&, Init, std::uint64_t);
template NetParams<double> make_params<double>(const ArchDescriptor&, Init, std::uint64_t);
template std::vector<Graph<float>::Var> bind<float>(Graph<float>&, const std::vector<NamedTensor<float>>&, bool);
template std::vector<Graph<double>::Var> bind<double>(Graph<double>&, const std::vector<NamedTensor<double>>&, bool);
template Graph<float>::Var generator_graph<float>(Graph<float>&, const ArchDescriptor&,
                                                  std::span<const Graph<float>::Var>, Graph<float>::Var);
template Graph<double>::Var generator_graph<double>(Graph<double>&, const ArchDescriptor&,
                                                    std::span<const Graph<double>::Var>, Graph<double>::Var);
template Graph<float>::Var discriminator_graph<float>(Graph<float>&, const ArchDescriptor&,
                                                      std::span<const Graph<float>::Var>, Graph<float>::Var);
template Graph<double>::Var discriminator_graph<double>(Graph<double>&, const ArchDescriptor&,
                                                        std::span<const Graph<double>::Var>, Graph<double>::Var);
template Tensor<float> image_tensor<float>(const Image2&);
template Tensor<double> image_tensor<double>(const Image2&);
template Tensor<float> flat_tensor<float>(const FVolume&);
template Tensor<double> flat_tensor<double>(const FVolume&);

}  // namespace oral3d::nn
