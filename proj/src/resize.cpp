#include "medsr/resize.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace medsr {

std::string to_string(InterpMethod m) {
  switch (m) {
    case InterpMethod::Nearest: return "nearest";
    case InterpMethod::Bilinear: return "bilinear";
    case InterpMethod::Bicubic: return "bicubic";
    case InterpMethod::Lanczos: return "lanczos";
  }
  return "?";
}

InterpMethod parse_interp_method(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "nearest") return InterpMethod::Nearest;
  if (t == "bilinear") return InterpMethod::Bilinear;
  if (t == "bicubic") return InterpMethod::Bicubic;
  if (t == "lanczos") return InterpMethod::Lanczos;
  throw std::invalid_argument("unknown interpolation method '" + text +
                              "' (expected nearest, bilinear, bicubic or lanczos)");
}

namespace {

double support(InterpMethod m) {
  switch (m) {
    case InterpMethod::Nearest: return 0.5;
    case InterpMethod::Bilinear: return 1.0;
    case InterpMethod::Bicubic: return 2.0;
    case InterpMethod::Lanczos: return 3.0;
  }
  return 0.0;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kernel(InterpMethod m, double t) {
  t = std::abs(t);
  switch (m) {
    case InterpMethod::Nearest: return t < 0.5 ? 1.0 : 0.0;
    case InterpMethod::Bilinear: return t < 1.0 ? 1.0 - t : 0.0;
    case InterpMethod::Bicubic: {
      constexpr double a = -0.5;
      if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
      if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
      return 0.0;
    }
    case InterpMethod::Lanczos: return t < 3.0 ? sinc(t) * sinc(t / 3.0) : 0.0;
  }
  return 0.0;
}

struct Taps {
  std::vector<std::size_t> index;  // n_out * width source indices (replicated borders)
  std::vector<double> weight;
  std::size_t width = 0;
};

std::size_t output_extent(std::size_t n, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw std::invalid_argument("resize factor must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * factor)));
}

Taps make_taps(std::size_t n_in, std::size_t n_out, double factor, InterpMethod m) {
  Taps taps;
  const auto clamp_index = [&](long long i) {
    return static_cast<std::size_t>(std::clamp<long long>(i, 0, static_cast<long long>(n_in) - 1));
  };
  if (m == InterpMethod::Nearest) {
    taps.width = 1;
    for (std::size_t x = 0; x < n_out; ++x) {
      taps.index.push_back(clamp_index(static_cast<long long>(std::floor((x + 0.5) / factor))));
      taps.weight.push_back(1.0);
    }
    return taps;
  }
  const double stretch = std::max(1.0, 1.0 / factor);
  const double reach = support(m) * stretch;
  taps.width = static_cast<std::size_t>(std::ceil(reach)) * 2 + 1;
  for (std::size_t x = 0; x < n_out; ++x) {
    const double centre = (x + 0.5) / factor - 0.5;
    const long long first = static_cast<long long>(std::floor(centre)) - static_cast<long long>(taps.width / 2) + 1;
    double total = 0.0;
    const std::size_t base = taps.weight.size();
    for (std::size_t k = 0; k < taps.width; ++k) {
      const long long i = first + static_cast<long long>(k);
      const double w = kernel(m, (static_cast<double>(i) - centre) / stretch);
      taps.index.push_back(clamp_index(i));
      taps.weight.push_back(w);
      total += w;
    }
    for (std::size_t k = 0; k < taps.width; ++k) taps.weight[base + k] /= total;
  }
  return taps;
}

// One separable pass along `axis` of a row-major 3D array.
std::vector<double> resample_axis(const std::vector<double>& src, std::array<std::size_t, 3> dims, int axis,
                                  std::size_t n_out, double factor, InterpMethod m) {
  const Taps taps = make_taps(dims[axis], n_out, factor, m);
  std::array<std::size_t, 3> out_dims = dims;
  out_dims[axis] = n_out;
  const auto strides = [](const std::array<std::size_t, 3>& d) {
    return std::array<std::size_t, 3>{d[1] * d[2], d[2], 1};
  };
  const auto ss = strides(dims), ds = strides(out_dims);
  const int a1 = axis == 0 ? 1 : 0, a2 = axis == 2 ? 1 : 2;
  std::vector<double> dst(out_dims[0] * out_dims[1] * out_dims[2]);
  for (std::size_t i = 0; i < dims[a1]; ++i)
    for (std::size_t j = 0; j < dims[a2]; ++j) {
      const std::size_t so = i * ss[a1] + j * ss[a2], dof = i * ds[a1] + j * ds[a2];
      for (std::size_t x = 0; x < n_out; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps.width; ++k) {
          acc += taps.weight[x * taps.width + k] * src[so + taps.index[x * taps.width + k] * ss[axis]];
        }
        dst[dof + x * ds[axis]] = acc;
      }
    }
  return dst;
}

}  // namespace

Tensor resize(const Tensor& image, double factor_y, double factor_x, InterpMethod method) {
  if (image.rank() != 2) throw std::invalid_argument("resize expects an H x W image, got " + to_string(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1);
  const std::size_t ho = output_extent(h, factor_y), wo = output_extent(w, factor_x);
  std::vector<double> buf(image.data().begin(), image.data().end());
  buf = resample_axis(buf, {h, w, 1}, 1, wo, factor_x, method);
  buf = resample_axis(buf, {h, wo, 1}, 0, ho, factor_y, method);
  Tensor out({ho, wo});
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = static_cast<float>(buf[i]);
  return out;
}

Volume resize_volume(const Volume& v, double factor_x, double factor_y, double factor_z, InterpMethod method) {
  const std::size_t wo = output_extent(v.width, factor_x), ho = output_extent(v.height, factor_y),
                    d_o = output_extent(v.depth, factor_z);
  std::vector<double> buf(v.voxels.begin(), v.voxels.end());
  // storage order is (y, x, z)
  buf = resample_axis(buf, {v.height, v.width, v.depth}, 2, d_o, factor_z, method);
  buf = resample_axis(buf, {v.height, v.width, d_o}, 1, wo, factor_x, method);
  buf = resample_axis(buf, {v.height, wo, d_o}, 0, ho, factor_y, method);
  Volume out(wo, ho, d_o);
  for (std::size_t i = 0; i < buf.size(); ++i) out.voxels[i] = static_cast<float>(buf[i]);
  out.spacing_mm = {v.spacing_mm[0] / factor_x, v.spacing_mm[1] / factor_y, v.spacing_mm[2] / factor_z};
  out.intensity = v.intensity;
  return out;
}

}  // namespace medsr
