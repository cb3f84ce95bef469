#pragma once

#include <string>

#include "medsr/tensor.hpp"
#include "medsr/volume.hpp"

namespace medsr {

enum class InterpMethod { Nearest, Bilinear, Bicubic, Lanczos };

std::string to_string(InterpMethod m);
InterpMethod parse_interp_method(const std::string& text);

/// Resamples an H x W image by the given factors. Output extents are
/// round(n * factor). Sample centres map as src = (x + 0.5) / factor - 0.5,
/// borders replicate, and kernel weights are renormalized to sum to one.
/// Bicubic uses a = -0.5, Lanczos three lobes. When shrinking, the kernel is
/// stretched by 1/factor.
Tensor resize(const Tensor& image, double factor_y, double factor_x, InterpMethod method);
inline Tensor resize(const Tensor& image, double factor, InterpMethod method) {
  return resize(image, factor, factor, method);
}

/// Separable per-axis application of the same kernels. Spacing is divided by
/// the factor on each axis.
Volume resize_volume(const Volume& v, double factor_x, double factor_y, double factor_z, InterpMethod method);

}  // namespace medsr
