#pragma once

#include <array>
#include <cstddef>

#include "medsr/tensor.hpp"

namespace medsr {

/// 3x3 convolution filter bank: weights O x C x 3 x 3 and one bias per output channel.
template <typename T>
struct ConvLayer {
  BasicTensor<T> weights;
  BasicTensor<T> bias;

  ConvLayer() = default;
  ConvLayer(std::size_t in_channels, std::size_t out_channels)
      : weights({out_channels, in_channels, 3, 3}), bias({out_channels}) {}

  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t out_channels() const { return weights.dim(0); }

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

/// out_channels * (in_channels * 9 + 1).
template <typename T>
std::size_t count_parameters(const ConvLayer<T>& layer) {
  return layer.out_channels() * (layer.in_channels() * 9 + 1);
}

template <typename T>
struct ConvGradients {
  BasicTensor<T> input;    // empty when not requested
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

/// Same-size 3x3 convolution with one voxel of zero padding.
/// input: N x C x H x W, returns N x O x H x W.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvLayer<T>& layer);

/// Gradients of conv2d_forward w.r.t. input, weights and bias given the
/// gradient of the loss w.r.t. its output. Set want_input_grad=false to skip
/// the input gradient (first layer of a network).
template <typename T>
ConvGradients<T> conv2d_backward(const BasicTensor<T>& input, const ConvLayer<T>& layer,
                                 const BasicTensor<T>& upstream, bool want_input_grad = true);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

/// Passes upstream where the forward input (or output; same sign) is > 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& forward_input, const BasicTensor<T>& upstream);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// a += b, shapes must match.
template <typename T>
void add_inplace(BasicTensor<T>& a, const BasicTensor<T>& b);

/// a += scale * b, shapes must match.
template <typename T>
void axpy_inplace(BasicTensor<T>& a, T scale, const BasicTensor<T>& b);

/// Mean absolute difference. Accumulates in double regardless of T.
template <typename T>
double l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

/// d l1_loss / d pred = sign(pred - target) / element_count, with sign(0) = 0.
template <typename T>
BasicTensor<T> l1_loss_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target);

/// Sampled 2D Gaussian at offsets {-1,0,1}^2, normalized to sum 1, row-major.
std::array<double, 9> gaussian_kernel_3x3(double sigma);

/// 3x3 Gaussian blur with replicate padding. Accepts H x W, or any tensor
/// whose trailing two axes are spatial (each leading plane blurred separately).
template <typename T>
BasicTensor<T> gaussian_blur_3x3(const BasicTensor<T>& image, double sigma);

}  // namespace medsr
