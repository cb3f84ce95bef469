#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "medsr/volume.hpp"

namespace medsr {

inline constexpr int kVolumeFormatVersion = 1;

/// Raw format: `path` is a JSON sidecar; voxels live next to it in a flat
/// float32 little-endian file (same stem, .raw), ordered (y, x, z) with z fastest.
void save_volume_raw(const Volume& volume, const std::filesystem::path& sidecar);

/// PNG stack: directory of slice_0000.png... (axial slices ascending in z)
/// plus stack.json holding extents, spacing, intensity mapping and bit depth.
void save_volume_png(const Volume& volume, const std::filesystem::path& directory, int bit_depth = 16);

/// Dispatches on the path: a directory is read as a PNG stack, anything else
/// as a raw-format sidecar. Errors name the offending file.
Volume load_volume(const std::filesystem::path& path);

/// Saves as a PNG stack when `path` has no extension, otherwise as raw.
void save_volume(const Volume& volume, const std::filesystem::path& path);

enum class Split { Train, Test };
std::string to_string(Split s);
Split parse_split(const std::string& text);

struct ManifestEntry {
  std::string path;  // relative paths resolve against the manifest's directory
  Split split = Split::Train;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::size_t r = 2;
  VolumeAxes axes = VolumeAxes::XY;
  std::uint64_t seed = 1;

  /// Unique paths, r in {1, 2, 4}; with require_both_splits, train and test
  /// must each be non-empty.
  void validate(bool require_both_splits = false) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace medsr
