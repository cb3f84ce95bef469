#include "medsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace medsr {

namespace {

void require_image_pair(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rank() != 2) throw std::invalid_argument(std::string(what) + " expects H x W images, got " + to_string(a.shape()));
  require_same_shape(a.shape(), b.shape(), what);
}

// Row-major double image.
struct Plane {
  std::size_t h = 0, w = 0;
  std::vector<double> v;
  Plane() = default;
  Plane(std::size_t h_, std::size_t w_) : h(h_), w(w_), v(h_ * w_, 0.0) {}
  explicit Plane(const Tensor& t) : h(t.dim(0)), w(t.dim(1)), v(t.data().begin(), t.data().end()) {}
  double& at(std::size_t y, std::size_t x) { return v[y * w + x]; }
  double at(std::size_t y, std::size_t x) const { return v[y * w + x]; }
};

// Separable valid-region correlation with a symmetric 1D kernel.
Plane filter_valid(const Plane& p, const std::vector<double>& k) {
  const std::size_t n = k.size();
  Plane rows(p.h, p.w - n + 1);
  for (std::size_t y = 0; y < p.h; ++y)
    for (std::size_t x = 0; x < rows.w; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * p.at(y, x + i);
      rows.at(y, x) = acc;
    }
  Plane out(p.h - n + 1, rows.w);
  for (std::size_t y = 0; y < out.h; ++y)
    for (std::size_t x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * rows.at(y + i, x);
      out.at(y, x) = acc;
    }
  return out;
}

// Same-size separable filter with replicated borders.
Plane filter_same(const Plane& p, const std::vector<double>& k) {
  const long r = static_cast<long>(k.size() / 2);
  const auto clampi = [](long i, std::size_t n) { return static_cast<std::size_t>(std::clamp<long>(i, 0, long(n) - 1)); };
  Plane rows(p.h, p.w), out(p.h, p.w);
  for (std::size_t y = 0; y < p.h; ++y)
    for (std::size_t x = 0; x < p.w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i) acc += k[i + r] * p.at(y, clampi(long(x) + i, p.w));
      rows.at(y, x) = acc;
    }
  for (std::size_t y = 0; y < p.h; ++y)
    for (std::size_t x = 0; x < p.w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i) acc += k[i + r] * rows.at(clampi(long(y) + i, p.h), x);
      out.at(y, x) = acc;
    }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane out(a.h, a.w);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> k(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) total += k[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
  for (auto& x : k) x /= total;
  return k;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr peak must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / (se / static_cast<double>(a.size())));
}

double ssim(const Tensor& a, const Tensor& b, double dynamic_range) {
  require_image_pair(a, b, "ssim");
  constexpr std::size_t kWindow = 11;
  if (a.dim(0) < kWindow || a.dim(1) < kWindow) {
    throw std::invalid_argument("ssim needs images of at least 11x11, got " + to_string(a.shape()));
  }
  const double c1 = std::pow(0.01 * dynamic_range, 2), c2 = std::pow(0.03 * dynamic_range, 2);
  const auto k = gaussian_window(kWindow, 1.5);
  const Plane x(a), y(b);
  const Plane mx = filter_valid(x, k), my = filter_valid(y, k);
  const Plane sxx = filter_valid(product(x, x), k), syy = filter_valid(product(y, y), k),
              sxy = filter_valid(product(x, y), k);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.v.size(); ++i) {
    const double ux = mx.v[i], uy = my.v[i];
    const double vx = sxx.v[i] - ux * ux, vy = syy.v[i] - uy * uy, cxy = sxy.v[i] - ux * uy;
    total += ((2 * ux * uy + c1) * (2 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.v.size());
}

double ifc(const Tensor& reference, const Tensor& distorted) {
  require_image_pair(reference, distorted, "ifc");
  if (reference.dim(0) < 32 || reference.dim(1) < 32) {
    throw std::invalid_argument("ifc needs images of at least 32x32, got " + to_string(reference.shape()));
  }
  constexpr int kLevels = 3;
  constexpr double kFloor = 1e-10;
  const std::vector<double> binomial{1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  const std::vector<double> box{1 / 3.0, 1 / 3.0, 1 / 3.0};

  Plane c(reference), d(distorted);
  double total = 0.0;
  for (int level = 0; level < kLevels; ++level) {
    const Plane cb = filter_same(c, binomial), db = filter_same(d, binomial);
    Plane cs(c.h, c.w), ds(d.h, d.w);
    for (std::size_t i = 0; i < c.v.size(); ++i) {
      cs.v[i] = c.v[i] - cb.v[i];
      ds.v[i] = d.v[i] - db.v[i];
    }
    const Plane mc = filter_valid(cs, box), md = filter_valid(ds, box);
    const Plane scc = filter_valid(product(cs, cs), box), sdd = filter_valid(product(ds, ds), box),
                scd = filter_valid(product(cs, ds), box);
    double info = 0.0;
    for (std::size_t i = 0; i < mc.v.size(); ++i) {
      const double var_c = std::max(0.0, scc.v[i] - mc.v[i] * mc.v[i]);
      const double var_d = std::max(0.0, sdd.v[i] - md.v[i] * md.v[i]);
      const double cov = scd.v[i] - mc.v[i] * md.v[i];
      double g = var_c > kFloor ? cov / var_c : 0.0;
      double sv2 = var_d - g * cov;
      if (g < 0.0) {
        g = 0.0;
        sv2 = var_d;
      }
      sv2 = std::max(sv2, kFloor);
      info += 0.5 * std::log2(1.0 + g * g * var_c / sv2);
    }
    total += info / static_cast<double>(mc.v.size());

    // decimate the low-pass image for the next level
    Plane cn((c.h + 1) / 2, (c.w + 1) / 2), dn(cn.h, cn.w);
    for (std::size_t y = 0; y < cn.h; ++y)
      for (std::size_t x = 0; x < cn.w; ++x) {
        cn.at(y, x) = cb.at(2 * y, 2 * x);
        dn.at(y, x) = db.at(2 * y, 2 * x);
      }
    c = std::move(cn);
    d = std::move(dn);
  }
  return total;
}

Tensor quantize_8bit(const Tensor& image) {
  Tensor out = image;
  for (auto& v : out.data()) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
  return out;
}

}  // namespace medsr
