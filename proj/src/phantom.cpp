#include "medsr/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace medsr {

std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::Spheres: return "spheres";
    case PhantomKind::Ramps: return "ramps";
    case PhantomKind::SheppLike: return "shepp_like";
  }
  return "?";
}

PhantomKind parse_phantom_kind(const std::string& text) {
  if (text == "spheres") return PhantomKind::Spheres;
  if (text == "ramps") return PhantomKind::Ramps;
  if (text == "shepp_like") return PhantomKind::SheppLike;
  throw std::invalid_argument("unknown phantom kind '" + text + "' (expected spheres, ramps or shepp_like)");
}

namespace {

struct Ellipsoid {
  double cx, cy, cz;  // centre, normalized [-1, 1]
  double ax, ay, az;  // semi-axes, normalized
  double angle;       // rotation in the axial plane
  double value;
};

// Soft inside-indicator with an edge about half a voxel wide.
double soft_inside(const Ellipsoid& e, double x, double y, double z, double voxel) {
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double dx = x - e.cx, dy = y - e.cy, dz = z - e.cz;
  const double u = (c * dx + s * dy) / e.ax, v = (-s * dx + c * dy) / e.ay, w = dz / e.az;
  const double rho = std::sqrt(u * u + v * v + w * w);
  const double scale = std::min({e.ax, e.ay, e.az});
  const double dist = (1.0 - rho) * scale;  // approximate signed distance to the surface
  return 0.5 * (1.0 + std::tanh(dist / (0.5 * voxel)));
}

}  // namespace

Volume generate_phantom(PhantomKind kind, std::size_t width, std::size_t height, std::size_t depth,
                        std::uint64_t seed) {
  if (width < 32 || height < 32 || depth < 32) {
    throw std::invalid_argument("phantom extents must be at least 32 per axis");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  // Background: low-frequency field shared by all kinds.
  const double bf[3] = {uni(0.5, 1.5), uni(0.5, 1.5), uni(0.5, 1.5)};
  const double bp[3] = {uni(0, 6.28), uni(0, 6.28), uni(0, 6.28)};
  const double tex_amp = uni(0.02, 0.05), tex_f = uni(3.0, 6.0);

  std::vector<Ellipsoid> shapes;
  struct Ramp { double nx, ny, nz, period, amp; };
  std::vector<Ramp> ramps;
  switch (kind) {
    case PhantomKind::Spheres: {
      const int n = 6 + static_cast<int>(u(rng) * 7);
      for (int i = 0; i < n; ++i) {
        const double r = uni(0.08, 0.35);
        shapes.push_back({uni(-0.7, 0.7), uni(-0.7, 0.7), uni(-0.7, 0.7), r, r, r, 0.0, uni(-0.4, 0.6)});
      }
      break;
    }
    case PhantomKind::SheppLike: {
      const double sx = uni(0.75, 0.9), sy = uni(0.85, 0.95), sz = uni(0.8, 0.95);
      shapes.push_back({0, 0, 0, sx, sy, sz, 0.0, 0.8});
      shapes.push_back({0, -0.02, 0, sx * 0.9, sy * 0.9, sz * 0.9, 0.0, -0.5});
      const int n = 5 + static_cast<int>(u(rng) * 6);
      for (int i = 0; i < n; ++i) {
        shapes.push_back({uni(-0.45, 0.45), uni(-0.5, 0.5), uni(-0.5, 0.5), uni(0.05, 0.3), uni(0.05, 0.35),
                          uni(0.1, 0.4), uni(0, 3.14), uni(-0.25, 0.3)});
      }
      break;
    }
    case PhantomKind::Ramps: {
      for (int i = 0; i < 3; ++i) {
        double nx = uni(-1, 1), ny = uni(-1, 1), nz = uni(-1, 1);
        const double len = std::sqrt(nx * nx + ny * ny + nz * nz) + 1e-9;
        ramps.push_back({nx / len, ny / len, nz / len, uni(0.3, 0.8), uni(0.2, 0.5)});
      }
      const int n = 2 + static_cast<int>(u(rng) * 3);
      for (int i = 0; i < n; ++i) {
        shapes.push_back({uni(-0.6, 0.6), uni(-0.6, 0.6), uni(-0.6, 0.6), uni(0.1, 0.3), uni(0.1, 0.3),
                          uni(0.1, 0.3), uni(0, 3.14), uni(-0.4, 0.4)});
      }
      break;
    }
  }

  Volume v(width, height, depth);
  const double voxel = 2.0 / static_cast<double>(std::min({width, height, depth}));
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t z = 0; z < depth; ++z) {
        const double px = 2.0 * (x + 0.5) / width - 1.0, py = 2.0 * (y + 0.5) / height - 1.0,
                     pz = 2.0 * (z + 0.5) / depth - 1.0;
        double val = 0.15 + 0.05 * std::sin(bf[0] * px + bp[0]) * std::sin(bf[1] * py + bp[1]) +
                     0.05 * std::sin(bf[2] * pz + bp[2]);
        val += tex_amp * std::sin(tex_f * px + 1.3 * tex_f * py) * std::cos(0.7 * tex_f * pz);
        for (const auto& e : shapes) val += e.value * soft_inside(e, px, py, pz, voxel);
        for (const auto& rp : ramps) {
          // terraced ramp: linear within a period, soft step between periods
          const double t = (rp.nx * px + rp.ny * py + rp.nz * pz) / rp.period;
          const double frac = t - std::floor(t);
          const double edge = std::min(frac, 1.0 - frac) * rp.period;
          val += rp.amp * frac * std::tanh(edge / (0.5 * voxel));
        }
        v.at(y, x, z) = static_cast<float>(val);
      }
  Volume out = normalize_min_max(v);
  out.intensity = {};
  return out;
}

}  // namespace medsr
