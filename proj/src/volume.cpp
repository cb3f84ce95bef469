#include "medsr/volume.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace medsr {

std::string to_string(VolumeAxes axes) {
  switch (axes) {
    case VolumeAxes::XY: return "XY";
    case VolumeAxes::Z: return "Z";
    case VolumeAxes::XYZ: return "XYZ";
  }
  return "?";
}

VolumeAxes parse_volume_axes(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
  if (t == "XY") return VolumeAxes::XY;
  if (t == "Z") return VolumeAxes::Z;
  if (t == "XYZ") return VolumeAxes::XYZ;
  throw std::invalid_argument("unknown axes '" + text + "' (expected XY, Z or XYZ)");
}

Volume::Volume(std::size_t w, std::size_t h, std::size_t d, float fill)
    : width(w), height(h), depth(d), voxels(w * h * d, fill) {}

void Volume::validate() const {
  if (width == 0 || height == 0 || depth == 0) throw std::invalid_argument("volume extents must be positive");
  if (voxels.size() != width * height * depth) {
    throw std::invalid_argument("volume holds " + std::to_string(voxels.size()) + " voxels, extents need " +
                                std::to_string(width * height * depth));
  }
  for (float v : voxels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("volume intensity outside [0,1]: " + std::to_string(v));
  }
  for (double s : spacing_mm) {
    if (!(s > 0.0)) throw std::invalid_argument("voxel spacing must be positive");
  }
}

Tensor Volume::axial(std::size_t z) const {
  Tensor t({height, width});
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) t.at(y, x) = at(y, x, z);
  return t;
}

void Volume::set_axial(std::size_t z, const Tensor& slice) {
  require_same_shape(slice.shape(), Shape{height, width}, "set_axial");
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) at(y, x, z) = slice.at(y, x);
}

Tensor Volume::coronal(std::size_t y) const {
  Tensor t({depth, width});
  for (std::size_t x = 0; x < width; ++x)
    for (std::size_t z = 0; z < depth; ++z) t.at(z, x) = at(y, x, z);
  return t;
}

void Volume::set_coronal(std::size_t y, const Tensor& plane) {
  require_same_shape(plane.shape(), Shape{depth, width}, "set_coronal");
  for (std::size_t x = 0; x < width; ++x)
    for (std::size_t z = 0; z < depth; ++z) at(y, x, z) = plane.at(z, x);
}

Tensor Volume::sagittal(std::size_t x) const {
  Tensor t({depth, height});
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t z = 0; z < depth; ++z) t.at(z, y) = at(y, x, z);
  return t;
}

Volume normalize_min_max(const Volume& v) {
  Volume out = v;
  if (v.voxels.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(v.voxels.begin(), v.voxels.end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi - lo;
  for (auto& x : out.voxels) x = range > 0 ? static_cast<float>((x - lo) / range) : 0.0f;
  // Compose with any mapping the input already carried.
  const double scale = range > 0 ? range : 1.0;
  out.intensity.offset = v.intensity.offset + v.intensity.scale * lo;
  out.intensity.scale = v.intensity.scale * scale;
  return out;
}

Volume center_crop_to_multiple(const Volume& v, std::size_t r, VolumeAxes axes) {
  if (r == 0) throw std::invalid_argument("crop factor must be >= 1");
  const bool xy = axes != VolumeAxes::Z, z = axes != VolumeAxes::XY;
  const std::size_t w = xy ? v.width / r * r : v.width;
  const std::size_t h = xy ? v.height / r * r : v.height;
  const std::size_t d = z ? v.depth / r * r : v.depth;
  if (w == 0 || h == 0 || d == 0) throw std::invalid_argument("volume smaller than the scale factor");
  const std::size_t ox = (v.width - w) / 2, oy = (v.height - h) / 2, oz = (v.depth - d) / 2;
  Volume out(w, h, d);
  out.spacing_mm = v.spacing_mm;
  out.intensity = v.intensity;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < d; ++k) out.at(y, x, k) = v.at(y + oy, x + ox, k + oz);
  return out;
}

}  // namespace medsr
