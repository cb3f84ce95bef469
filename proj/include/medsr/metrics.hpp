#pragma once

#include "medsr/tensor.hpp"

namespace medsr {

/// 10 log10(peak^2 / MSE) in dB; +infinity when the images are identical.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Mean local SSIM over the valid region of an 11x11 Gaussian window
/// (sigma 1.5) with K1 = 0.01, K2 = 0.03.
double ssim(const Tensor& a, const Tensor& b, double dynamic_range = 1.0);

/// Information fidelity of `distorted` with respect to `reference`.
///
/// Simplified scalar-GSM form: a three-level Laplacian-style pyramid (band =
/// image minus its [1 4 6 4 1]/16 blur, then decimate the blur), 3x3 local
/// statistics per subband, and a per-coefficient gain/noise channel model
///   g = cov(c, d) / var(c),  sv2 = var(d) - g cov(c, d)
/// giving 0.5 log2(1 + g^2 var(c) / sv2). The result is the sum over subbands
/// of the mean per-coefficient information. Both extents must be >= 32.
double ifc(const Tensor& reference, const Tensor& distorted);

/// Rounds [0,1] intensities to 8-bit levels expressed on 0..255.
Tensor quantize_8bit(const Tensor& image);

}  // namespace medsr
