#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "medsr/volume_io.hpp"

namespace medsr {

struct PreparedEntry {
  std::string name;
  Split split = Split::Train;
  std::filesystem::path hr;  // absolute
  std::filesystem::path lr;
};

/// Directory written by prepare_dataset: hr/<name>.json, lr/<name>.json and
/// dataset.json describing r, axes, seed and the split of every volume.
struct PreparedDataset {
  std::filesystem::path root;
  std::size_t r = 2;
  VolumeAxes axes = VolumeAxes::XY;
  std::uint64_t seed = 1;
  std::vector<PreparedEntry> entries;

  std::vector<PreparedEntry> split(Split s) const;
};

/// Normalizes each manifest volume to [0,1], centre-crops it to multiples of
/// r on the degraded axes and writes the HR/LR pair. Refuses a non-empty
/// output directory unless `force` is set, in which case it is replaced.
PreparedDataset prepare_dataset(const DatasetManifest& manifest, const std::filesystem::path& manifest_dir,
                                const std::filesystem::path& out_dir, bool force);

PreparedDataset load_prepared_dataset(const std::filesystem::path& dir);

}  // namespace medsr
