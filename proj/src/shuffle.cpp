#include "medsr/shuffle.hpp"

#include <stdexcept>
#include <string>

namespace medsr {
namespace {

void require_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) throw std::invalid_argument(std::string(what) + ": expected N x C x H x W, got " + to_string(s));
}

void require_factor(std::size_t r, const char* what) {
  if (r == 0) throw std::invalid_argument(std::string(what) + ": scale factor must be >= 1");
}

}  // namespace

template <typename T>
BasicTensor<T> pixel_shuffle_2d(const BasicTensor<T>& maps, std::size_t r) {
  require_rank4(maps.shape(), "pixel_shuffle_2d");
  require_factor(r, "pixel_shuffle_2d");
  const auto n = maps.dim(0), c = maps.dim(1), h = maps.dim(2), w = maps.dim(3);
  if (c != r * r) {
    throw std::invalid_argument("pixel_shuffle_2d: need r^2 = " + std::to_string(r * r) +
                                " channels, got " + std::to_string(c));
  }
  BasicTensor<T> out({n, 1, h * r, w * r});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < h * r; ++y)
      for (std::size_t x = 0; x < w * r; ++x)
        out.at(b, 0, y, x) = maps.at(b, (y % r) * r + (x % r), y / r, x / r);
  return out;
}

template <typename T>
BasicTensor<T> pixel_unshuffle_2d(const BasicTensor<T>& image, std::size_t r) {
  require_rank4(image.shape(), "pixel_unshuffle_2d");
  require_factor(r, "pixel_unshuffle_2d");
  const auto n = image.dim(0), hh = image.dim(2), ww = image.dim(3);
  if (image.dim(1) != 1 || hh % r != 0 || ww % r != 0) {
    throw std::invalid_argument("pixel_unshuffle_2d: shape " + to_string(image.shape()) +
                                " not divisible by r=" + std::to_string(r));
  }
  BasicTensor<T> out({n, r * r, hh / r, ww / r});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < hh; ++y)
      for (std::size_t x = 0; x < ww; ++x)
        out.at(b, (y % r) * r + (x % r), y / r, x / r) = image.at(b, 0, y, x);
  return out;
}

template <typename T>
BasicTensor<T> pixel_shuffle_1d(const BasicTensor<T>& maps, std::size_t r, ShuffleAxis axis) {
  require_rank4(maps.shape(), "pixel_shuffle_1d");
  require_factor(r, "pixel_shuffle_1d");
  const auto n = maps.dim(0), c = maps.dim(1), h = maps.dim(2), w = maps.dim(3);
  if (c != r) {
    throw std::invalid_argument("pixel_shuffle_1d: need r = " + std::to_string(r) + " channels, got " +
                                std::to_string(c));
  }
  const bool rows = axis == ShuffleAxis::Rows;
  BasicTensor<T> out({n, 1, rows ? h * r : h, rows ? w : w * r});
  const auto oh = out.dim(2), ow = out.dim(3);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        out.at(b, 0, y, x) = rows ? maps.at(b, y % r, y / r, x) : maps.at(b, x % r, y, x / r);
  return out;
}

template <typename T>
BasicTensor<T> pixel_unshuffle_1d(const BasicTensor<T>& image, std::size_t r, ShuffleAxis axis) {
  require_rank4(image.shape(), "pixel_unshuffle_1d");
  require_factor(r, "pixel_unshuffle_1d");
  const auto n = image.dim(0), hh = image.dim(2), ww = image.dim(3);
  const bool rows = axis == ShuffleAxis::Rows;
  if (image.dim(1) != 1 || (rows ? hh % r : ww % r) != 0) {
    throw std::invalid_argument("pixel_unshuffle_1d: shape " + to_string(image.shape()) +
                                " not divisible by r=" + std::to_string(r));
  }
  BasicTensor<T> out({n, r, rows ? hh / r : hh, rows ? ww : ww / r});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < hh; ++y)
      for (std::size_t x = 0; x < ww; ++x) {
        if (rows) {
          out.at(b, y % r, y / r, x) = image.at(b, 0, y, x);
        } else {
          out.at(b, x % r, y, x / r) = image.at(b, 0, y, x);
        }
      }
  return out;
}

#define MEDSR_INSTANTIATE_SHUFFLE(T)                                                        \
  template BasicTensor<T> pixel_shuffle_2d(const BasicTensor<T>&, std::size_t);             \
  template BasicTensor<T> pixel_unshuffle_2d(const BasicTensor<T>&, std::size_t);           \
  template BasicTensor<T> pixel_shuffle_1d(const BasicTensor<T>&, std::size_t, ShuffleAxis); \
  template BasicTensor<T> pixel_unshuffle_1d(const BasicTensor<T>&, std::size_t, ShuffleAxis);

MEDSR_INSTANTIATE_SHUFFLE(float)
MEDSR_INSTANTIATE_SHUFFLE(double)

#undef MEDSR_INSTANTIATE_SHUFFLE

}  // namespace medsr
