#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "medsr/tensor.hpp"

namespace medsr {

using NamedImage = std::pair<std::string, Tensor>;

/// Tiles the original and each candidate left to right, each under a text
/// label, and writes an 8-bit grayscale PNG. All images must share a shape.
/// Returns the canvas that was written.
Tensor export_comparison(const Tensor& original, const std::vector<NamedImage>& candidates,
                         const std::filesystem::path& path, const std::string& original_label = "original");

/// Draws `text` in a 5x7 bitmap font with its top-left corner at (y, x).
/// Lowercase is rendered as uppercase; unknown characters as a filled box.
void draw_text(Tensor& canvas, const std::string& text, std::size_t y, std::size_t x, float value = 1.0f);

}  // namespace medsr
