#pragma once

#include <cstddef>

#include "medsr/tensor.hpp"

namespace medsr {

enum class ShuffleAxis { Rows, Cols };

// Sub-pixel rearrangements. Low-resolution maps are channel-first
// (N x C x h x w); the high-resolution result is a single map N x 1 x H x W.
//
// Two axes:  out(y, x) = maps((y mod r) * r + (x mod r), y / r, x / r)
// One axis (rows): out(y, x) = maps(y mod r, y / r, x)
// One axis (cols): out(y, x) = maps(x mod r, y, x / r)

template <typename T>
BasicTensor<T> pixel_shuffle_2d(const BasicTensor<T>& maps, std::size_t r);

template <typename T>
BasicTensor<T> pixel_unshuffle_2d(const BasicTensor<T>& image, std::size_t r);

template <typename T>
BasicTensor<T> pixel_shuffle_1d(const BasicTensor<T>& maps, std::size_t r, ShuffleAxis axis);

template <typename T>
BasicTensor<T> pixel_unshuffle_1d(const BasicTensor<T>& image, std::size_t r, ShuffleAxis axis);

}  // namespace medsr
