#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "medsr/tensor.hpp"

namespace medsr {

enum class VolumeAxes { XY, Z, XYZ };

std::string to_string(VolumeAxes axes);
VolumeAxes parse_volume_axes(const std::string& text);

/// Maps stored [0,1] intensities back to the source range: source = offset + scale * v.
struct IntensityMapping {
  double offset = 0.0;
  double scale = 1.0;
  friend bool operator==(const IntensityMapping&, const IntensityMapping&) = default;
};

/// 3D grayscale image with intensities in [0,1]. Voxels are stored row-major
/// over (y, x, z), so depth is the fastest-varying index.
struct Volume {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t depth = 0;
  std::vector<float> voxels;
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};  // x, y, z
  IntensityMapping intensity;

  Volume() = default;
  Volume(std::size_t w, std::size_t h, std::size_t d, float fill = 0.0f);

  std::size_t index(std::size_t y, std::size_t x, std::size_t z) const { return (y * width + x) * depth + z; }
  float& at(std::size_t y, std::size_t x, std::size_t z) { return voxels[index(y, x, z)]; }
  float at(std::size_t y, std::size_t x, std::size_t z) const { return voxels[index(y, x, z)]; }

  /// Throws std::invalid_argument when extents are zero, the voxel count is off,
  /// or any intensity lies outside [0,1].
  void validate() const;

  // Plane views. Axial: height x width at fixed z. Coronal: depth x width at
  // fixed y. Sagittal: depth x height at fixed x. Depth is always the row axis
  // of planes that contain it.
  Tensor axial(std::size_t z) const;
  void set_axial(std::size_t z, const Tensor& slice);
  Tensor coronal(std::size_t y) const;
  void set_coronal(std::size_t y, const Tensor& plane);
  Tensor sagittal(std::size_t x) const;

  friend bool operator==(const Volume&, const Volume&) = default;
};

/// Rescales intensities to span [0,1] and records the inverse mapping.
/// A constant volume maps to zeros with scale 1.
Volume normalize_min_max(const Volume& v);

/// Centre crop so the extents along the selected axes are multiples of r.
Volume center_crop_to_multiple(const Volume& v, std::size_t r, VolumeAxes axes);

}  // namespace medsr
