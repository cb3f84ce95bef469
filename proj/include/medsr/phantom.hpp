#pragma once

#include <cstdint>
#include <string>

#include "medsr/volume.hpp"

namespace medsr {

enum class PhantomKind { Spheres, Ramps, SheppLike };

std::string to_string(PhantomKind k);
PhantomKind parse_phantom_kind(const std::string& text);

/// Deterministic synthetic volume: soft-edged shapes over a smooth, slowly
/// varying background, min-max normalized to [0,1]. Every extent must be >= 32.
Volume generate_phantom(PhantomKind kind, std::size_t width, std::size_t height, std::size_t depth,
                        std::uint64_t seed);

}  // namespace medsr
