#include "medsr/figure.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>

#include "medsr/png_io.hpp"

namespace medsr {

namespace {

constexpr std::size_t kGlyphW = 5, kGlyphH = 7, kAdvance = 6;
constexpr std::size_t kLabelH = 11, kGap = 4;

// Rows top to bottom; bit 4 is the leftmost column.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
};

const std::array<std::uint8_t, 7>& glyph(char c) {
  static constexpr std::array<std::uint8_t, 7> box{0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont)
    if (g.c == up) return g.rows;
  return box;
}

}  // namespace

void draw_text(Tensor& canvas, const std::string& text, std::size_t y, std::size_t x, float value) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& rows = glyph(text[i]);
    for (std::size_t gy = 0; gy < kGlyphH; ++gy)
      for (std::size_t gx = 0; gx < kGlyphW; ++gx) {
        const std::size_t py = y + gy, px = x + i * kAdvance + gx;
        if (py >= canvas.dim(0) || px >= canvas.dim(1)) continue;
        if (rows[gy] & (0x10 >> gx)) canvas.at(py, px) = value;
      }
  }
}

Tensor export_comparison(const Tensor& original, const std::vector<NamedImage>& candidates,
                         const std::filesystem::path& path, const std::string& original_label) {
  if (original.rank() != 2) throw std::invalid_argument("export_comparison expects H x W images");
  if (candidates.empty()) throw std::invalid_argument("export_comparison needs at least one candidate");
  for (const auto& [name, img] : candidates) require_same_shape(img.shape(), original.shape(), name.c_str());

  const std::size_t h = original.dim(0), w = original.dim(1), panels = candidates.size() + 1;
  Tensor canvas({kLabelH + h, panels * w + (panels - 1) * kGap}, 0.0f);
  auto place = [&](const std::string& label, const Tensor& img, std::size_t index) {
    const std::size_t x0 = index * (w + kGap);
    const std::size_t max_chars = std::max<std::size_t>(1, (w + 1) / kAdvance);
    draw_text(canvas, label.substr(0, max_chars), 2, x0 + 1);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) canvas.at(kLabelH + y, x0 + x) = std::clamp(img.at(y, x), 0.0f, 1.0f);
  };
  place(original_label, original, 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) place(candidates[i].first, candidates[i].second, i + 1);
  write_png_gray(path, canvas, 8);
  return canvas;
}

}  // namespace medsr
