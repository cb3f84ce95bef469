#include "medsr/dataset.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "medsr/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace medsr {

std::vector<PreparedEntry> PreparedDataset::split(Split s) const {
  std::vector<PreparedEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

PreparedDataset prepare_dataset(const DatasetManifest& manifest, const fs::path& manifest_dir, const fs::path& out_dir,
                                bool force) {
  manifest.validate();
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!force) throw std::runtime_error(out_dir.string() + ": output directory is not empty (use --force)");
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir / "hr");
  fs::create_directories(out_dir / "lr");

  PreparedDataset ds;
  ds.root = fs::absolute(out_dir);
  ds.r = manifest.r;
  ds.axes = manifest.axes;
  ds.seed = manifest.seed;
  json entries = json::array();
  std::set<std::string> names;
  for (const auto& e : manifest.entries) {
    const fs::path src = fs::path(e.path).is_absolute() ? fs::path(e.path) : manifest_dir / e.path;
    std::string name = fs::path(e.path).stem().string();
    if (name.empty()) name = fs::path(e.path).filename().string();
    if (!names.insert(name).second) throw std::runtime_error("two manifest entries map to the name '" + name + "'");

    const Volume hr = center_crop_to_multiple(normalize_min_max(load_volume(src)), manifest.r, manifest.axes);
    const Volume lr = degrade_volume(hr, manifest.r, manifest.axes);
    PreparedEntry pe{name, e.split, ds.root / "hr" / (name + ".json"), ds.root / "lr" / (name + ".json")};
    save_volume_raw(hr, pe.hr);
    save_volume_raw(lr, pe.lr);
    entries.push_back({{"name", name},
                       {"split", to_string(e.split)},
                       {"hr", "hr/" + name + ".json"},
                       {"lr", "lr/" + name + ".json"},
                       {"hr_extents", {hr.width, hr.height, hr.depth}},
                       {"lr_extents", {lr.width, lr.height, lr.depth}}});
    ds.entries.push_back(pe);
  }
  const json j = {{"r", ds.r},
                  {"axes", to_string(ds.axes)},
                  {"seed", ds.seed},
                  {"degradation", "box average"},
                  {"entries", entries}};
  std::ofstream(out_dir / "dataset.json") << j.dump(2) << "\n";
  return ds;
}

PreparedDataset load_prepared_dataset(const fs::path& dir) {
  const fs::path header = dir / "dataset.json";
  std::ifstream in(header);
  if (!in) throw std::runtime_error(header.string() + ": cannot open (run prepare first)");
  PreparedDataset ds;
  ds.root = fs::absolute(dir);
  try {
    const json j = json::parse(in);
    ds.r = j.at("r").get<std::size_t>();
    ds.axes = parse_volume_axes(j.at("axes").get<std::string>());
    ds.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
      ds.entries.push_back({e.at("name").get<std::string>(), parse_split(e.at("split").get<std::string>()),
                            ds.root / e.at("hr").get<std::string>(), ds.root / e.at("lr").get<std::string>()});
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(header.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace medsr
