#include "medsr/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace medsr {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Target im2col columns per chunk. Chunks always hold whole image rows and
// depend only on the geometry, so results never depend on the caller.
constexpr std::size_t kChunkColumns = 512;

struct ConvGeometry {
  std::size_t n, c, h, w, o;
  std::size_t plane() const { return h * w; }
  std::size_t rows() const { return n * h; }
  std::size_t k() const { return c * 9; }
  std::size_t rows_per_chunk() const { return std::max<std::size_t>(1, kChunkColumns / w); }
};

template <typename T>
ConvGeometry check_conv(const BasicTensor<T>& input, const ConvLayer<T>& layer) {
  const auto& ws = layer.weights.shape();
  if (ws.size() != 4 || ws[2] != 3 || ws[3] != 3) {
    throw std::invalid_argument("conv2d: weights must be O x C x 3 x 3, got " + to_string(ws));
  }
  if (layer.bias.shape() != Shape{ws[0]}) {
    throw std::invalid_argument("conv2d: bias shape " + to_string(layer.bias.shape()) +
                                " does not match weights " + to_string(ws));
  }
  const auto& is = input.shape();
  if (is.size() != 4 || is[1] != ws[1]) {
    throw std::invalid_argument("conv2d: input " + to_string(is) + " incompatible with weights " +
                                to_string(ws));
  }
  return {is[0], is[1], is[2], is[3], ws[0]};
}

// Column j of a chunk starting at global row r0 is pixel (j % w) of global
// row r0 + j / w; global row r is image row r % h of sample r / h.
template <typename T>
void im2col(const T* in, const ConvGeometry& g, std::size_t r0, std::size_t nrows, T* cols) {
  const std::size_t w = g.w, len = nrows * w;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* row = cols + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * len;
        for (std::size_t r = 0; r < nrows; ++r) {
          const std::size_t n = (r0 + r) / g.h, y = (r0 + r) % g.h;
          T* dst = row + r * w;
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + w, T{0});
            continue;
          }
          const T* src = in + (n * g.c + c) * g.plane() + static_cast<std::size_t>(sy) * w;
          if (kx == 1) {
            std::copy(src, src + w, dst);
          } else if (kx == 0) {
            dst[0] = T{0};
            std::copy(src, src + w - 1, dst + 1);
          } else {
            std::copy(src + 1, src + w, dst);
            dst[w - 1] = T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, std::size_t r0, std::size_t nrows, T* out) {
  const std::size_t w = g.w, len = nrows * w;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = cols + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * len;
        for (std::size_t r = 0; r < nrows; ++r) {
          const std::size_t n = (r0 + r) / g.h, y = (r0 + r) % g.h;
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
          const T* src = row + r * w;
          T* dst = out + (n * g.c + c) * g.plane() + static_cast<std::size_t>(sy) * w;
          if (kx == 1) {
            for (std::size_t x = 0; x < w; ++x) dst[x] += src[x];
          } else if (kx == 0) {
            for (std::size_t x = 1; x < w; ++x) dst[x - 1] += src[x];
          } else {
            for (std::size_t x = 0; x + 1 < w; ++x) dst[x + 1] += src[x];
          }
        }
      }
    }
  }
}

// Copies between channel-major chunk rows (o x len) and the N x O x H x W tensor.
template <typename T, bool ToTensor>
void scatter_rows(T* tensor, T* chunk, const ConvGeometry& g, std::size_t channels, std::size_t r0,
                  std::size_t nrows) {
  const std::size_t w = g.w, len = nrows * w;
  for (std::size_t o = 0; o < channels; ++o) {
    for (std::size_t r = 0; r < nrows; ++r) {
      const std::size_t n = (r0 + r) / g.h, y = (r0 + r) % g.h;
      T* t = tensor + (n * channels + o) * g.plane() + y * w;
      T* ch = chunk + o * len + r * w;
      if constexpr (ToTensor) {
        std::copy(ch, ch + w, t);
      } else {
        std::copy(t, t + w, ch);
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvLayer<T>& layer) {
  const ConvGeometry g = check_conv(input, layer);
  BasicTensor<T> out({g.n, g.o, g.h, g.w});

  const Eigen::Map<const RowMat<T>> weights(layer.weights.raw(), g.o, g.k());
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(layer.bias.raw(), g.o);
  std::vector<T> cols_buf;
  RowMat<T> result;
  for (std::size_t r0 = 0; r0 < g.rows(); r0 += g.rows_per_chunk()) {
    const std::size_t nrows = std::min(g.rows_per_chunk(), g.rows() - r0), len = nrows * g.w;
    cols_buf.resize(g.k() * len);
    im2col(input.raw(), g, r0, nrows, cols_buf.data());
    const Eigen::Map<const RowMat<T>> cols(cols_buf.data(), g.k(), len);
    result.noalias() = weights * cols;
    result.colwise() += bias;
    scatter_rows<T, true>(out.raw(), result.data(), g, g.o, r0, nrows);
  }
  return out;
}

template <typename T>
ConvGradients<T> conv2d_backward(const BasicTensor<T>& input, const ConvLayer<T>& layer,
                                 const BasicTensor<T>& upstream, bool want_input_grad) {
  const ConvGeometry g = check_conv(input, layer);
  require_same_shape(upstream.shape(), Shape{g.n, g.o, g.h, g.w}, "conv2d_backward upstream");

  ConvGradients<T> grads;
  grads.weights = BasicTensor<T>(layer.weights.shape());
  grads.bias = BasicTensor<T>(layer.bias.shape());
  if (want_input_grad) grads.input = BasicTensor<T>(input.shape());

  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t o = 0; o < g.o; ++o) {
      const T* src = upstream.raw() + (n * g.o + o) * g.plane();
      T acc{0};
      for (std::size_t p = 0; p < g.plane(); ++p) acc += src[p];
      grads.bias[o] += acc;
    }
  }

  const Eigen::Map<const RowMat<T>> weights(layer.weights.raw(), g.o, g.k());
  Eigen::Map<RowMat<T>> grad_weights(grads.weights.raw(), g.o, g.k());
  std::vector<T> cols_buf, up_buf;
  RowMat<T> dcols;
  for (std::size_t r0 = 0; r0 < g.rows(); r0 += g.rows_per_chunk()) {
    const std::size_t nrows = std::min(g.rows_per_chunk(), g.rows() - r0), len = nrows * g.w;
    cols_buf.resize(g.k() * len);
    up_buf.resize(g.o * len);
    im2col(input.raw(), g, r0, nrows, cols_buf.data());
    scatter_rows<T, false>(const_cast<T*>(upstream.raw()), up_buf.data(), g, g.o, r0, nrows);
    const Eigen::Map<const RowMat<T>> cols(cols_buf.data(), g.k(), len);
    const Eigen::Map<const RowMat<T>> up(up_buf.data(), g.o, len);
    grad_weights.noalias() += up * cols.transpose();
    if (want_input_grad) {
      dcols.noalias() = weights.transpose() * up;
      col2im_add(dcols.data(), g, r0, nrows, grads.input.raw());
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& forward_input, const BasicTensor<T>& upstream) {
  require_same_shape(forward_input.shape(), upstream.shape(), "relu_backward");
  BasicTensor<T> out = upstream;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(forward_input[i] > T{0})) out[i] = T{0};
  }
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  BasicTensor<T> out = a;
  add_inplace(out, b);
  return out;
}

template <typename T>
void add_inplace(BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
void axpy_inplace(BasicTensor<T>& a, T scale, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

template <typename T>
double l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "l1_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  }
  return sum / static_cast<double>(pred.size());
}

template <typename T>
BasicTensor<T> l1_loss_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "l1_loss_grad");
  BasicTensor<T> grad(pred.shape());
  const T step = T{1} / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    grad[i] = d > T{0} ? step : (d < T{0} ? -step : T{0});
  }
  return grad;
}

std::array<double, 9> gaussian_kernel_3x3(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("gaussian blur sigma must be positive, got " + std::to_string(sigma));
  }
  std::array<double, 9> k{};
  double sum = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const double v = std::exp(-static_cast<double>(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)] = v;
      sum += v;
    }
  }
  for (auto& v : k) v /= sum;
  return k;
}

template <typename T>
BasicTensor<T> gaussian_blur_3x3(const BasicTensor<T>& image, double sigma) {
  const auto kernel = gaussian_kernel_3x3(sigma);
  if (image.rank() < 2) throw std::invalid_argument("gaussian_blur_3x3: need at least 2 axes");
  const std::size_t h = image.dim(image.rank() - 2);
  const std::size_t w = image.dim(image.rank() - 1);
  const std::size_t planes = image.size() / (h * w);
  BasicTensor<T> out(image.shape());
  const auto clamp = [](long v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(hi) - 1));
  };
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = image.raw() + p * h * w;
    T* dst = out.raw() + p * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          const std::size_t sy = clamp(static_cast<long>(y) + dy, h);
          for (int dx = -1; dx <= 1; ++dx) {
            const std::size_t sx = clamp(static_cast<long>(x) + dx, w);
            acc += kernel[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)] * src[sy * w + sx];
          }
        }
        dst[y * w + x] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

#define MEDSR_INSTANTIATE_OPS(T)                                                                 \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const ConvLayer<T>&);            \
  template ConvGradients<T> conv2d_backward(const BasicTensor<T>&, const ConvLayer<T>&,          \
                                            const BasicTensor<T>&, bool);                        \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                           \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template void add_inplace(BasicTensor<T>&, const BasicTensor<T>&);                             \
  template void axpy_inplace(BasicTensor<T>&, T, const BasicTensor<T>&);                         \
  template double l1_loss(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> l1_loss_grad(const BasicTensor<T>&, const BasicTensor<T>&);            \
  template BasicTensor<T> gaussian_blur_3x3(const BasicTensor<T>&, double);

MEDSR_INSTANTIATE_OPS(float)
MEDSR_INSTANTIATE_OPS(double)

#undef MEDSR_INSTANTIATE_OPS

}  // namespace medsr
