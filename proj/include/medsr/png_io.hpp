#pragma once

#include <filesystem>

#include "medsr/tensor.hpp"

namespace medsr {

/// Writes an H x W image with values in [0,1] as grayscale PNG, quantized as
/// round(v * (2^bit_depth - 1)). bit_depth is 8 or 16. Output bytes are
/// deterministic for identical input.
void write_png_gray(const std::filesystem::path& path, const Tensor& image, int bit_depth = 8);

struct PngImage {
  Tensor pixels;  // H x W in [0,1]
  int bit_depth = 8;
};

/// Reads an 8- or 16-bit grayscale PNG. Other colour types are rejected.
PngImage read_png_gray(const std::filesystem::path& path);

}  // namespace medsr
