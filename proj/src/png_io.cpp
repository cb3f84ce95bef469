#include "medsr/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace medsr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_failure(png_structp png, png_const_charp message) {
  auto* origin = static_cast<const std::string*>(png_get_error_ptr(png));
  throw std::runtime_error(*origin + ": " + message);
}

void png_warning_ignored(png_structp, png_const_charp) {}

}  // namespace

void write_png_gray(const std::filesystem::path& path, const Tensor& image, int bit_depth) {
  if (image.rank() != 2) throw std::invalid_argument("write_png_gray expects an H x W image");
  if (bit_depth != 8 && bit_depth != 16) {
    throw std::invalid_argument(path.string() + ": unsupported PNG bit depth " + std::to_string(bit_depth));
  }
  const std::size_t h = image.dim(0), w = image.dim(1);
  const std::size_t bytes_per = bit_depth / 8;
  const double max_level = bit_depth == 8 ? 255.0 : 65535.0;
  std::vector<png_byte> rows(h * w * bytes_per);
  for (std::size_t i = 0; i < h * w; ++i) {
    const auto level = static_cast<unsigned>(std::lround(std::clamp<double>(image[i], 0.0, 1.0) * max_level));
    if (bytes_per == 1) {
      rows[i] = static_cast<png_byte>(level);
    } else {
      rows[2 * i] = static_cast<png_byte>(level >> 8);  // PNG samples are big-endian
      rows[2 * i + 1] = static_cast<png_byte>(level & 0xff);
    }
  }

  const std::string origin = path.string();
  File file(std::fopen(origin.c_str(), "wb"));
  if (!file) throw std::runtime_error(origin + ": cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, const_cast<std::string*>(&origin), png_failure,
                                            png_warning_ignored);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, file.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < h; ++y) png_write_row(png, rows.data() + y * w * bytes_per);
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

PngImage read_png_gray(const std::filesystem::path& path) {
  const std::string origin = path.string();
  File file(std::fopen(origin.c_str(), "rb"));
  if (!file) throw std::runtime_error(origin + ": cannot open");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error(origin + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, const_cast<std::string*>(&origin), png_failure,
                                           png_warning_ignored);
  png_infop info = png_create_info_struct(png);
  PngImage result;
  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info), colour = png_get_color_type(png, info);
    if (colour != PNG_COLOR_TYPE_GRAY) throw std::runtime_error(origin + ": PNG is not single-channel grayscale");
    if (depth != 8 && depth != 16) {
      throw std::runtime_error(origin + ": unsupported PNG bit depth " + std::to_string(depth));
    }
    const std::size_t bytes_per = depth / 8;
    std::vector<png_byte> rows(static_cast<std::size_t>(w) * h * bytes_per);
    for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, rows.data() + y * w * bytes_per, nullptr);
    png_read_end(png, nullptr);
    const double max_level = depth == 8 ? 255.0 : 65535.0;
    result.bit_depth = depth;
    result.pixels = Tensor({h, w});
    for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
      const unsigned level = bytes_per == 1 ? rows[i] : (unsigned(rows[2 * i]) << 8) | rows[2 * i + 1];
      result.pixels[i] = static_cast<float>(level / max_level);
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return result;
}

}  // namespace medsr
