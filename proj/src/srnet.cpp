#include "medsr/srnet.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>

namespace medsr {

std::string to_string(AxisMode mode) { return mode == AxisMode::TwoAxes ? "two_axes" : "one_axis"; }

AxisMode parse_axis_mode(const std::string& text) {
  if (text == "two_axes") return AxisMode::TwoAxes;
  if (text == "one_axis") return AxisMode::OneAxis;
  throw std::invalid_argument("unknown axis mode '" + text + "'");
}

std::string to_string(ShuffleAxis axis) { return axis == ShuffleAxis::Rows ? "rows" : "cols"; }

ShuffleAxis parse_shuffle_axis(const std::string& text) {
  if (text == "rows") return ShuffleAxis::Rows;
  if (text == "cols") return ShuffleAxis::Cols;
  throw std::invalid_argument("unknown shuffle axis '" + text + "'");
}

void SRNetConfig::validate() const {
  if (scale_factor != 1 && scale_factor != 2 && scale_factor != 4) {
    throw std::invalid_argument("scale factor must be 1, 2 or 4, got " + std::to_string(scale_factor));
  }
  if (base_filters == 0) throw std::invalid_argument("base_filters must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be non-negative");
}

std::size_t SRNetConfig::upscale_channels() const {
  return axis_mode == AxisMode::TwoAxes ? scale_factor * scale_factor : scale_factor;
}

namespace {

std::uint64_t next_identity() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

std::vector<std::pair<std::size_t, std::size_t>> topology(const SRNetConfig& c) {
  const std::size_t f = c.base_filters;
  std::vector<std::pair<std::size_t, std::size_t>> t = {
      {1, f}, {f, f}, {f, f}, {f, f}, {f, f}, {f, c.upscale_channels()}};
  if (c.enable_second_block) {
    t.insert(t.end(), {{1, f}, {f, f}, {f, f}, {f, 1}});
  }
  return t;
}

template <typename T>
BasicTensor<T> as_batch(const BasicTensor<T>& input) {
  if (input.rank() == 2) return input.reshaped({1, 1, input.dim(0), input.dim(1)});
  if (input.rank() == 4 && input.dim(1) == 1) return input;
  throw std::invalid_argument("SRNet input must be h x w or N x 1 x h x w, got " + to_string(input.shape()));
}

template <typename T>
BasicTensor<T> upscale(const SRNetConfig& c, const BasicTensor<T>& maps) {
  if (c.axis_mode == AxisMode::TwoAxes) return pixel_shuffle_2d(maps, c.scale_factor);
  return pixel_shuffle_1d(maps, c.scale_factor, c.shuffle_axis);
}

template <typename T>
BasicTensor<T> downscale(const SRNetConfig& c, const BasicTensor<T>& image) {
  if (c.axis_mode == AxisMode::TwoAxes) return pixel_unshuffle_2d(image, c.scale_factor);
  return pixel_unshuffle_1d(image, c.scale_factor, c.shuffle_axis);
}

template <typename T>
BasicTensor<T> conv_relu(const BasicTensor<T>& x, const ConvLayer<T>& layer) {
  auto z = conv2d_forward(x, layer);
  for (auto& v : z.data()) v = v > T{0} ? v : T{0};
  return z;
}

template <typename T>
BasicTensor<T> conv_skip_relu(const BasicTensor<T>& x, const ConvLayer<T>& layer, const BasicTensor<T>* skip) {
  auto z = conv2d_forward(x, layer);
  if (skip) add_inplace(z, *skip);
  for (auto& v : z.data()) v = v > T{0} ? v : T{0};
  return z;
}

template <typename T>
BasicTensor<T> as_target(const BasicTensor<T>& target, const Shape& expected) {
  if (target.rank() == 2 && target.size() == element_count(expected)) return target.reshaped(expected);
  return target;
}

}  // namespace

template <typename T>
BasicSRNet<T>::BasicSRNet(SRNetConfig config, std::vector<ConvLayer<T>> layers)
    : config_(config), layers_(std::move(layers)), identity_(next_identity()) {
  config_.validate();
  const auto topo = topology(config_);
  if (layers_.size() != topo.size()) {
    throw std::invalid_argument("SRNet expects " + std::to_string(topo.size()) + " layers, got " +
                                std::to_string(layers_.size()));
  }
  for (std::size_t i = 0; i < topo.size(); ++i) {
    const Shape w{topo[i].second, topo[i].first, 3, 3};
    require_same_shape(layers_[i].weights.shape(), w, ("conv" + std::to_string(i + 1) + " weights").c_str());
    require_same_shape(layers_[i].bias.shape(), Shape{topo[i].second},
                       ("conv" + std::to_string(i + 1) + " bias").c_str());
  }
}

template <typename T>
std::size_t BasicSRNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += count_parameters(l);
  return n;
}

template <typename T>
std::vector<ConvLayer<T>>& BasicSRNet<T>::mutable_layers() {
  ++revision_;
  return layers_;
}

template <typename T>
template <typename U>
BasicSRNet<U> BasicSRNet<T>::cast() const {
  std::vector<ConvLayer<U>> layers;
  layers.reserve(layers_.size());
  for (const auto& l : layers_) {
    ConvLayer<U> c;
    c.weights = l.weights.template cast<U>();
    c.bias = l.bias.template cast<U>();
    layers.push_back(std::move(c));
  }
  return BasicSRNet<U>(config_, std::move(layers));
}

template <typename T>
BasicSRNet<T> build_network(const SRNetConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::vector<ConvLayer<T>> layers;
  for (const auto& [in, out] : topology(config)) {
    ConvLayer<T> layer(in, out);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in * 9)));
    for (auto& w : layer.weights.data()) w = static_cast<T>(dist(rng));
    layers.push_back(std::move(layer));
  }
  return BasicSRNet<T>(config, std::move(layers));
}

template <typename T>
ForwardTrace<T> forward(const BasicSRNet<T>& net, const BasicTensor<T>& input) {
  const auto& c = net.config();
  const auto& L = net.layers();
  ForwardTrace<T> t;
  t.net_identity = net.identity();
  t.net_revision = net.revision();
  auto& li = t.layer_inputs;
  li.reserve(L.size());

  li.push_back(as_batch(input));
  li.push_back(conv_relu(li[0], L[0]));
  li.push_back(conv_relu(li[1], L[1]));
  li.push_back(conv_skip_relu(li[2], L[2], c.enable_short_skips ? &li[1] : nullptr));
  li.push_back(conv_relu(li[3], L[3]));
  li.push_back(conv_skip_relu(li[4], L[4], c.enable_long_skip ? &li[1] : nullptr));
  t.upscale_maps = c.relu_before_shuffle ? conv_relu(li[5], L[5]) : conv2d_forward(li[5], L[5]);
  t.intermediate_hr = upscale(c, t.upscale_maps);

  if (!c.enable_second_block) {
    t.final_hr = t.intermediate_hr;
    return t;
  }
  li.push_back(t.intermediate_hr);
  li.push_back(conv_relu(li[6], L[6]));
  li.push_back(conv_relu(li[7], L[7]));
  li.push_back(conv_skip_relu(li[8], L[8], c.enable_short_skips ? &li[7] : nullptr));
  t.final_hr = c.relu_on_output ? conv_relu(li[9], L[9]) : conv2d_forward(li[9], L[9]);
  return t;
}

template <typename T>
BasicTensor<T> infer(const BasicSRNet<T>& net, const BasicTensor<T>& input) {
  const auto& c = net.config();
  const auto& L = net.layers();
  const auto x = as_batch(input);
  const auto a1 = conv_relu(x, L[0]);
  auto a = conv_relu(a1, L[1]);
  a = conv_skip_relu(a, L[2], c.enable_short_skips ? &a1 : nullptr);
  a = conv_relu(a, L[3]);
  a = conv_skip_relu(a, L[4], c.enable_long_skip ? &a1 : nullptr);
  a = c.relu_before_shuffle ? conv_relu(a, L[5]) : conv2d_forward(a, L[5]);
  auto hr = upscale(c, a);
  if (!c.enable_second_block) return hr;
  const auto a7 = conv_relu(hr, L[6]);
  a = conv_relu(a7, L[7]);
  a = conv_skip_relu(a, L[8], c.enable_short_skips ? &a7 : nullptr);
  return c.relu_on_output ? conv_relu(a, L[9]) : conv2d_forward(a, L[9]);
}

template <typename T>
double loss_full(const ForwardTrace<T>& trace, const BasicTensor<T>& target, double lambda) {
  const auto tgt = as_target(target, trace.final_hr.shape());
  require_same_shape(trace.final_hr.shape(), tgt.shape(), "loss_full target");
  double loss = l1_loss(trace.final_hr, tgt);
  if (lambda != 0.0) loss += lambda * l1_loss(trace.intermediate_hr, tgt);
  return loss;
}

template <typename T>
NetGradients<T> backward(const BasicSRNet<T>& net, const ForwardTrace<T>& trace, const BasicTensor<T>& target,
                         double lambda) {
  if (trace.net_identity != net.identity() || trace.net_revision != net.revision()) {
    throw std::invalid_argument("backward: trace was not produced by the current parameters of this network");
  }
  const auto& c = net.config();
  const auto& L = net.layers();
  const auto& li = trace.layer_inputs;
  const auto tgt = as_target(target, trace.final_hr.shape());
  require_same_shape(trace.final_hr.shape(), tgt.shape(), "backward target");

  NetGradients<T> grads(L.size());
  BasicTensor<T> g_hr;
  if (c.enable_second_block) {
    auto g = l1_loss_grad(trace.final_hr, tgt);
    if (c.relu_on_output) g = relu_backward(trace.final_hr, g);
    grads[9] = conv2d_backward(li[9], L[9], g);
    const auto g_z9 = relu_backward(li[9], grads[9].input);
    grads[8] = conv2d_backward(li[8], L[8], g_z9);
    const auto g_z8 = relu_backward(li[8], grads[8].input);
    grads[7] = conv2d_backward(li[7], L[7], g_z8);
    auto g_a7 = std::move(grads[7].input);
    if (c.enable_short_skips) add_inplace(g_a7, g_z9);
    const auto g_z7 = relu_backward(li[7], g_a7);
    grads[6] = conv2d_backward(li[6], L[6], g_z7);
    g_hr = std::move(grads[6].input);
    if (lambda != 0.0) axpy_inplace(g_hr, static_cast<T>(lambda), l1_loss_grad(trace.intermediate_hr, tgt));
  } else {
    g_hr = l1_loss_grad(trace.final_hr, tgt);
    for (auto& v : g_hr.data()) v *= static_cast<T>(1.0 + lambda);
  }

  auto g_u = downscale(c, g_hr);
  if (c.relu_before_shuffle) g_u = relu_backward(trace.upscale_maps, g_u);
  grads[5] = conv2d_backward(li[5], L[5], g_u);
  const auto g_z5 = relu_backward(li[5], grads[5].input);
  grads[4] = conv2d_backward(li[4], L[4], g_z5);
  const auto g_z4 = relu_backward(li[4], grads[4].input);
  grads[3] = conv2d_backward(li[3], L[3], g_z4);
  const auto g_z3 = relu_backward(li[3], grads[3].input);
  grads[2] = conv2d_backward(li[2], L[2], g_z3);
  const auto g_z2 = relu_backward(li[2], grads[2].input);
  grads[1] = conv2d_backward(li[1], L[1], g_z2);
  auto g_a1 = std::move(grads[1].input);
  if (c.enable_short_skips) add_inplace(g_a1, g_z3);
  if (c.enable_long_skip) add_inplace(g_a1, g_z5);
  const auto g_z1 = relu_backward(li[1], g_a1);
  grads[0] = conv2d_backward(li[0], L[0], g_z1, false);

  for (auto& g : grads) g.input = BasicTensor<T>();
  return grads;
}

#define MEDSR_INSTANTIATE_NET(T)                                                                         \
  template class BasicSRNet<T>;                                                                          \
  template BasicSRNet<T> build_network(const SRNetConfig&, std::uint64_t);                               \
  template ForwardTrace<T> forward(const BasicSRNet<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> infer(const BasicSRNet<T>&, const BasicTensor<T>&);                            \
  template double loss_full(const ForwardTrace<T>&, const BasicTensor<T>&, double);                      \
  template NetGradients<T> backward(const BasicSRNet<T>&, const ForwardTrace<T>&, const BasicTensor<T>&, \
                                    double);

MEDSR_INSTANTIATE_NET(float)
MEDSR_INSTANTIATE_NET(double)
template BasicSRNet<double> BasicSRNet<float>::cast<double>() const;
template BasicSRNet<float> BasicSRNet<double>::cast<float>() const;
template BasicSRNet<float> BasicSRNet<float>::cast<float>() const;

#undef MEDSR_INSTANTIATE_NET

}  // namespace medsr
