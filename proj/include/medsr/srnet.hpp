#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "medsr/ops.hpp"
#include "medsr/shuffle.hpp"
#include "medsr/tensor.hpp"

namespace medsr {

enum class AxisMode { TwoAxes, OneAxis };

std::string to_string(AxisMode mode);
AxisMode parse_axis_mode(const std::string& text);
std::string to_string(ShuffleAxis axis);
ShuffleAxis parse_shuffle_axis(const std::string& text);

struct SRNetConfig {
  std::size_t scale_factor = 2;
  AxisMode axis_mode = AxisMode::TwoAxes;
  // Upscaled axis of the single-axis shuffle; ignored for TwoAxes.
  ShuffleAxis shuffle_axis = ShuffleAxis::Rows;
  std::size_t base_filters = 32;

  bool enable_second_block = true;
  bool enable_intermediate_loss = true;
  bool enable_short_skips = true;
  bool enable_long_skip = true;

  // Activation placement switches for conv6 and conv10. Off: both emit raw values.
  bool relu_before_shuffle = false;
  bool relu_on_output = false;

  double lambda = 1.0;

  /// Throws std::invalid_argument for r outside {1,2,4}, zero filters, negative lambda.
  void validate() const;
  /// Output channels of conv6: r^2 for two axes, r for one axis.
  std::size_t upscale_channels() const;
  /// Weight of the intermediate term actually used by the loss.
  double effective_lambda() const { return enable_intermediate_loss ? lambda : 0.0; }

  friend bool operator==(const SRNetConfig&, const SRNetConfig&) = default;
};

/// Ten 3x3 conv layers (six without the second block) around a sub-pixel
/// upscaling layer:
///
///   conv1 conv2 conv3(+conv1) conv4 conv5(+conv1) conv6 | shuffle | conv7 conv8 conv9(+conv7) conv10
///
/// Skip sums join before the ReLU of the receiving layer.
template <typename T>
class BasicSRNet {
 public:
  BasicSRNet() = default;
  BasicSRNet(SRNetConfig config, std::vector<ConvLayer<T>> layers);

  const SRNetConfig& config() const { return config_; }
  const std::vector<ConvLayer<T>>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  /// Mutable access for optimizers and loaders. Bumps the revision so traces
  /// recorded before the change are rejected by backward().
  std::vector<ConvLayer<T>>& mutable_layers();

  std::uint64_t identity() const { return identity_; }
  std::uint64_t revision() const { return revision_; }

  template <typename U>
  BasicSRNet<U> cast() const;

  /// Parameters (and config) compare equal; identity/revision ignored.
  friend bool operator==(const BasicSRNet& a, const BasicSRNet& b) {
    return a.config_ == b.config_ && a.layers_ == b.layers_;
  }

 private:
  SRNetConfig config_;
  std::vector<ConvLayer<T>> layers_;
  std::uint64_t identity_ = 0;
  std::uint64_t revision_ = 0;
};

using SRNet = BasicSRNet<float>;
using SRNet64 = BasicSRNet<double>;

/// Cached activations of one forward pass, kept for backward().
template <typename T>
struct ForwardTrace {
  BasicTensor<T> intermediate_hr;  // shuffle output, f1
  BasicTensor<T> final_hr;         // conv10 output (== intermediate_hr without block 2)

  // Inputs to each conv layer in order, plus post-activation maps used by ReLU masks.
  std::vector<BasicTensor<T>> layer_inputs;
  BasicTensor<T> upscale_maps;  // conv6 output after optional activation

  std::uint64_t net_identity = 0;
  std::uint64_t net_revision = 0;
};

template <typename T>
using NetGradients = std::vector<ConvGradients<T>>;

/// He-normal weights (std sqrt(2 / fan_in)), zero biases, deterministic in seed.
template <typename T>
BasicSRNet<T> build_network(const SRNetConfig& config, std::uint64_t seed);

/// input: N x 1 x h x w (or h x w). Output spatial extents are r times the input on
/// the configured axes.
template <typename T>
ForwardTrace<T> forward(const BasicSRNet<T>& net, const BasicTensor<T>& input);

/// Final output only; keeps no activations beyond what the next layer needs.
template <typename T>
BasicTensor<T> infer(const BasicSRNet<T>& net, const BasicTensor<T>& input);

/// L1(final, target) + lambda * L1(intermediate, target), both as means.
template <typename T>
double loss_full(const ForwardTrace<T>& trace, const BasicTensor<T>& target, double lambda);

/// Gradient of loss_full(trace, target, lambda) for every layer's weights and bias.
template <typename T>
NetGradients<T> backward(const BasicSRNet<T>& net, const ForwardTrace<T>& trace,
                         const BasicTensor<T>& target, double lambda);

}  // namespace medsr
