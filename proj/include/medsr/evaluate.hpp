#pragma once

#include <functional>
#include <string>
#include <vector>

#include "medsr/resize.hpp"
#include "medsr/volume.hpp"

namespace medsr {

struct MetricRow {
  std::string image_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double ifc = 0.0;  // NaN when the compared planes are smaller than 32 pixels
};

struct MetricOptions {
  // Compare 8-bit quantized images (peak 255) instead of [0,1] floats (peak 1).
  bool eight_bit = false;
  double peak() const { return eight_bit ? 255.0 : 1.0; }
};

struct MetricReport {
  std::vector<MetricRow> rows;  // sorted by image_id
  std::string degradation;      // description written into the CSV header
  MetricOptions options;

  MetricRow aggregate() const;
  std::string to_csv() const;
  std::string to_table() const;
};

struct DatasetItem {
  std::string id;
  Volume volume;
};

/// Maps a degraded volume back to the ground-truth extents.
using Reconstructor = std::function<Volume(const Volume& lr)>;

/// Reconstructor that upsamples by r on the degraded axes with a fixed kernel.
Reconstructor interpolation_reconstructor(InterpMethod method, std::size_t r, VolumeAxes axes);

/// PSNR over all voxels; SSIM and IFC averaged over the planes spanned by the
/// degraded axes (axial for XY, coronal for Z, both for XYZ).
MetricRow compare_volumes(const Volume& reference, const Volume& candidate, VolumeAxes axes,
                          const MetricOptions& options = {});

/// Degrades each volume by box averaging, reconstructs it and scores the
/// result against the original.
MetricReport evaluate(const Reconstructor& method, const std::vector<DatasetItem>& dataset, std::size_t r,
                      VolumeAxes axes, const MetricOptions& options = {});

}  // namespace medsr
