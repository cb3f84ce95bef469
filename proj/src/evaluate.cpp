#include "medsr/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "medsr/metrics.hpp"
#include "medsr/pipeline.hpp"

namespace medsr {

namespace {

std::string format_value(double v, int precision) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// Means over finite-or-infinite values; NaN entries are skipped.
double mean_of(const std::vector<MetricRow>& rows, double MetricRow::*field) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (std::isnan(r.*field)) continue;
    total += r.*field;
    ++n;
  }
  return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

MetricRow MetricReport::aggregate() const {
  return {"mean", mean_of(rows, &MetricRow::psnr_db), mean_of(rows, &MetricRow::ssim), mean_of(rows, &MetricRow::ifc)};
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "# degradation: " << (degradation.empty() ? "unspecified" : degradation) << "\n";
  os << "# psnr peak: " << options.peak() << (options.eight_bit ? " (8-bit quantized)" : " (normalized [0,1])")
     << "\n";
  os << "image_id,psnr_db,ssim,ifc\n";
  auto line = [&](const MetricRow& r) {
    os << r.image_id << ',' << format_value(r.psnr_db, 6) << ',' << format_value(r.ssim, 6) << ','
       << format_value(r.ifc, 6) << '\n';
  };
  for (const auto& r : rows) line(r);
  if (!rows.empty()) line(aggregate());
  return os.str();
}

std::string MetricReport::to_table() const {
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.image_id.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "image_id" << std::right << std::setw(12) << "PSNR [dB]"
     << std::setw(10) << "SSIM" << std::setw(10) << "IFC" << '\n';
  auto line = [&](const MetricRow& r) {
    os << std::left << std::setw(static_cast<int>(width)) << r.image_id << std::right << std::setw(12)
       << format_value(r.psnr_db, 3) << std::setw(10) << format_value(r.ssim, 4) << std::setw(10)
       << format_value(r.ifc, 3) << '\n';
  };
  for (const auto& r : rows) line(r);
  if (!rows.empty()) {
    os << std::string(width + 32, '-') << '\n';
    line(aggregate());
  }
  os << "PSNR peak " << options.peak() << (options.eight_bit ? " on 8-bit images" : " on [0,1] images") << '\n';
  return os.str();
}

Reconstructor interpolation_reconstructor(InterpMethod method, std::size_t r, VolumeAxes axes) {
  const double fxy = axes != VolumeAxes::Z ? static_cast<double>(r) : 1.0;
  const double fz = axes != VolumeAxes::XY ? static_cast<double>(r) : 1.0;
  return [=](const Volume& lr) { return resize_volume(lr, fxy, fxy, fz, method); };
}

MetricRow compare_volumes(const Volume& reference, const Volume& candidate, VolumeAxes axes,
                          const MetricOptions& options) {
  if (reference.width != candidate.width || reference.height != candidate.height ||
      reference.depth != candidate.depth) {
    throw std::invalid_argument("compare_volumes: reconstruction extents differ from the reference");
  }
  auto prep = [&](const Tensor& t) { return options.eight_bit ? quantize_8bit(t) : t; };
  const double range = options.peak();

  MetricRow row;
  {
    const std::size_t n = reference.voxels.size();
    Tensor a({n}, reference.voxels), b({n}, candidate.voxels);
    row.psnr_db = psnr(prep(a), prep(b), range);
  }
  double ssim_total = 0.0, ifc_total = 0.0;
  std::size_t planes = 0;
  bool ifc_ok = true;
  auto score = [&](const Tensor& ref, const Tensor& cand) {
    const Tensor x = prep(ref), y = prep(cand);
    ssim_total += ssim(x, y, range);
    if (ref.dim(0) >= 32 && ref.dim(1) >= 32) {
      ifc_total += ifc(x, y);
    } else {
      ifc_ok = false;
    }
    ++planes;
  };
  if (axes != VolumeAxes::Z) {
    for (std::size_t z = 0; z < reference.depth; ++z) score(reference.axial(z), candidate.axial(z));
  }
  if (axes != VolumeAxes::XY) {
    for (std::size_t y = 0; y < reference.height; ++y) score(reference.coronal(y), candidate.coronal(y));
  }
  row.ssim = ssim_total / static_cast<double>(planes);
  row.ifc = ifc_ok ? ifc_total / static_cast<double>(planes) : std::numeric_limits<double>::quiet_NaN();
  return row;
}

MetricReport evaluate(const Reconstructor& method, const std::vector<DatasetItem>& dataset, std::size_t r,
                      VolumeAxes axes, const MetricOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  MetricReport report;
  report.options = options;
  report.degradation = "box average, r=" + std::to_string(r) + ", axes=" + to_string(axes);
  for (const auto& item : dataset) {
    const Volume hr = center_crop_to_multiple(item.volume, r, axes);
    const Volume rec = method(degrade_volume(hr, r, axes));
    MetricRow row = compare_volumes(hr, rec, axes, options);
    row.image_id = item.id;
    report.rows.push_back(row);
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const MetricRow& a, const MetricRow& b) { return a.image_id < b.image_id; });
  return report;
}

}  // namespace medsr
