#include "medsr/volume_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "le_bytes.hpp"
#include "medsr/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace medsr {

namespace {

[[noreturn]] void reject(const fs::path& file, const std::string& what) {
  throw std::runtime_error(file.string() + ": " + what);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) reject(path, "cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    reject(path, std::string("malformed JSON: ") + e.what());
  }
}

// Write to a sibling temporary, then rename over the target.
void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) reject(tmp, "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) reject(tmp, "write failed");
  }
  fs::rename(tmp, path);
}

json geometry_json(const Volume& v) {
  return {{"format_version", kVolumeFormatVersion},
          {"extents", {v.width, v.height, v.depth}},
          {"spacing_mm", {v.spacing_mm[0], v.spacing_mm[1], v.spacing_mm[2]}},
          {"intensity", {{"offset", v.intensity.offset}, {"scale", v.intensity.scale}}}};
}

Volume geometry_from_json(const json& j, const fs::path& origin) {
  try {
    if (j.at("format_version").get<int>() != kVolumeFormatVersion) {
      reject(origin, "unsupported format_version " + j.at("format_version").dump());
    }
    const auto ext = j.at("extents").get<std::vector<long long>>();
    const auto sp = j.at("spacing_mm").get<std::vector<double>>();
    if (ext.size() != 3 || sp.size() != 3) reject(origin, "extents and spacing_mm need 3 entries");
    for (long long e : ext)
      if (e <= 0) reject(origin, "extents must be positive");
    Volume v(static_cast<std::size_t>(ext[0]), static_cast<std::size_t>(ext[1]), static_cast<std::size_t>(ext[2]));
    v.spacing_mm = {sp[0], sp[1], sp[2]};
    for (double s : sp)
      if (!(s > 0.0)) reject(origin, "spacing_mm must be positive");
    if (j.contains("intensity")) {
      v.intensity.offset = j["intensity"].at("offset").get<double>();
      v.intensity.scale = j["intensity"].at("scale").get<double>();
    }
    return v;
  } catch (const json::exception& e) {
    reject(origin, std::string("malformed header: ") + e.what());
  }
}

Volume load_raw(const fs::path& sidecar) {
  const json j = read_json(sidecar);
  Volume v = geometry_from_json(j, sidecar);
  std::string data_name;
  try {
    data_name = j.at("data_file").get<std::string>();
  } catch (const json::exception&) {
    reject(sidecar, "missing data_file");
  }
  const fs::path data_path = sidecar.parent_path() / data_name;
  std::ifstream in(data_path, std::ios::binary);
  if (!in) reject(data_path, "cannot open voxel data");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != v.voxels.size() * 4) {
    reject(data_path, "holds " + std::to_string(bytes.size()) + " bytes, extents need " +
                          std::to_string(v.voxels.size() * 4));
  }
  detail::ByteReader reader(bytes, data_path.string());
  for (auto& x : v.voxels) x = reader.f32();
  try {
    v.validate();
  } catch (const std::invalid_argument& e) {
    reject(data_path, e.what());
  }
  return v;
}

Volume load_png_stack(const fs::path& dir) {
  const fs::path header = dir / "stack.json";
  const json j = read_json(header);
  Volume v = geometry_from_json(j, header);
  const int bit_depth = j.value("bit_depth", 0);
  if (bit_depth != 8 && bit_depth != 16) reject(header, "unsupported bit_depth " + std::to_string(bit_depth));

  std::size_t slices = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("slice_", 0) == 0 && e.path().extension() == ".png") ++slices;
  }
  if (slices != v.depth) {
    reject(dir, "directory holds " + std::to_string(slices) + " slices, stack.json declares " +
                    std::to_string(v.depth));
  }
  for (std::size_t z = 0; z < v.depth; ++z) {
    char name[32];
    std::snprintf(name, sizeof name, "slice_%04zu.png", z);
    const fs::path file = dir / name;
    if (!fs::exists(file)) reject(file, "missing slice");
    const PngImage img = read_png_gray(file);
    if (img.pixels.dim(0) != v.height || img.pixels.dim(1) != v.width) {
      reject(file, "slice is " + to_string(img.pixels.shape()) + ", expected [" + std::to_string(v.height) + "x" +
                       std::to_string(v.width) + "]");
    }
    if (img.bit_depth != bit_depth) reject(file, "bit depth differs from stack.json");
    v.set_axial(z, img.pixels);
  }
  return v;
}

}  // namespace

void save_volume_raw(const Volume& volume, const fs::path& sidecar) {
  volume.validate();
  fs::path data = sidecar;
  data.replace_extension(".raw");
  if (data == sidecar) reject(sidecar, "sidecar must not use the .raw extension");
  std::vector<std::uint8_t> bytes;
  bytes.reserve(volume.voxels.size() * 4);
  for (float x : volume.voxels) detail::put_f32(bytes, x);
  write_file_atomic(data, std::string(bytes.begin(), bytes.end()));
  json j = geometry_json(volume);
  j["data_file"] = data.filename().string();
  j["dtype"] = "float32-le";
  j["order"] = "y,x,z (z fastest)";
  write_file_atomic(sidecar, j.dump(2) + "\n");
}

void save_volume_png(const Volume& volume, const fs::path& directory, int bit_depth) {
  volume.validate();
  if (bit_depth != 8 && bit_depth != 16) {
    reject(directory, "unsupported bit depth " + std::to_string(bit_depth));
  }
  fs::create_directories(directory);
  for (const auto& e : fs::directory_iterator(directory)) {
    const auto name = e.path().filename().string();
    if (name.rfind("slice_", 0) == 0 && e.path().extension() == ".png") fs::remove(e.path());
  }
  for (std::size_t z = 0; z < volume.depth; ++z) {
    char name[32];
    std::snprintf(name, sizeof name, "slice_%04zu.png", z);
    write_png_gray(directory / name, volume.axial(z), bit_depth);
  }
  json j = geometry_json(volume);
  j["bit_depth"] = bit_depth;
  write_file_atomic(directory / "stack.json", j.dump(2) + "\n");
}

Volume load_volume(const fs::path& path) {
  if (fs::is_directory(path)) return load_png_stack(path);
  return load_raw(path);
}

void save_volume(const Volume& volume, const fs::path& path) {
  if (path.has_extension()) {
    save_volume_raw(volume, path);
  } else {
    save_volume_png(volume, path);
  }
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + text + "' (expected train or test)");
}

void DatasetManifest::validate(bool require_both_splits) const {
  if (r != 1 && r != 2 && r != 4) throw std::invalid_argument("manifest r must be 1, 2 or 4");
  std::set<std::string> seen;
  std::size_t train = 0, test = 0;
  for (const auto& e : entries) {
    if (!seen.insert(e.path).second) throw std::invalid_argument("manifest lists '" + e.path + "' twice");
    (e.split == Split::Train ? train : test)++;
  }
  if (require_both_splits && (train == 0 || test == 0)) {
    throw std::invalid_argument("manifest needs at least one train and one test volume");
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  const json j = read_json(path);
  DatasetManifest m;
  try {
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("path").get<std::string>(), parse_split(e.at("split").get<std::string>())});
    }
    m.r = j.value("r", std::size_t{2});
    m.axes = parse_volume_axes(j.value("axes", std::string("XY")));
    m.seed = j.value("seed", std::uint64_t{1});
    m.validate();
  } catch (const json::exception& e) {
    reject(path, std::string("malformed manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    reject(path, e.what());
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  manifest.validate();
  json entries = json::array();
  for (const auto& e : manifest.entries) entries.push_back({{"path", e.path}, {"split", to_string(e.split)}});
  const json j = {{"entries", entries}, {"r", manifest.r}, {"axes", to_string(manifest.axes)}, {"seed", manifest.seed}};
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace medsr
