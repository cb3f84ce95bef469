#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "medsr/pipeline.hpp"

using namespace medsr;

namespace {

// Smooth content in [0,1] built from a few random plane waves.
Volume smooth_volume(std::size_t w, std::size_t h, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.05, 0.35), phase(0.0, 6.28);
  struct Wave { double fx, fy, fz, ph; };
  std::vector<Wave> waves;
  for (int i = 0; i < 4; ++i) waves.push_back({freq(rng), freq(rng), freq(rng), phase(rng)});
  Volume v(w, h, d);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t z = 0; z < d; ++z) {
        double s = 0.0;
        for (const auto& wv : waves) s += std::sin(wv.fx * x + wv.fy * y + wv.fz * z + wv.ph);
        v.at(y, x, z) = static_cast<float>(0.5 + s / 8.0);
      }
  return v;
}

double psnr_oracle(const Tensor& a, const Tensor& b) {
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  return 10.0 * std::log10(1.0 / (se / a.size()));
}

SRNetConfig small_config(std::size_t r, AxisMode mode, std::size_t filters = 8) {
  SRNetConfig c;
  c.scale_factor = r;
  c.axis_mode = mode;
  c.base_filters = filters;
  return c;
}

}  // namespace

TEST_CASE("degrade_volume block average") {
  Volume hr(2, 2, 1);
  hr.at(0, 0, 0) = 0.0f;
  hr.at(0, 1, 0) = 0.2f;
  hr.at(1, 0, 0) = 0.4f;
  hr.at(1, 1, 0) = 0.6f;
  const auto lr = degrade_volume(hr, 2, VolumeAxes::XY);
  CHECK(lr.width == 1);
  CHECK(lr.height == 1);
  CHECK(lr.depth == 1);
  CHECK(lr.voxels[0] == doctest::Approx(0.3).epsilon(1e-6));

  const Volume flat(8, 8, 4, 0.25f);
  const auto flat_lr = degrade_volume(flat, 2, VolumeAxes::XYZ);
  CHECK(flat_lr.width == 4);
  CHECK(flat_lr.depth == 2);
  for (float v : flat_lr.voxels) CHECK(v == doctest::Approx(0.25f));
  CHECK(flat_lr.spacing_mm == std::array<double, 3>{2.0, 2.0, 2.0});

  const auto v = smooth_volume(6, 4, 3, 3);
  CHECK(degrade_volume(v, 1, VolumeAxes::XYZ) == v);

  const auto z_only = degrade_volume(smooth_volume(4, 4, 4, 1), 2, VolumeAxes::Z);
  CHECK(z_only.width == 4);
  CHECK(z_only.depth == 2);
  CHECK(z_only.spacing_mm == std::array<double, 3>{1.0, 1.0, 2.0});

  CHECK_THROWS_AS(degrade_volume(Volume(5, 4, 4), 2, VolumeAxes::XY), std::invalid_argument);
  CHECK_NOTHROW(degrade_volume(Volume(4, 4, 5), 2, VolumeAxes::XY));
  CHECK_THROWS_AS(degrade_volume(Volume(4, 4, 5), 2, VolumeAxes::Z), std::invalid_argument);
}

TEST_CASE("extract_patches counts and shapes") {
  TrainConfig cfg;
  cfg.stride = 7;
  {
    const auto hr = smooth_volume(28, 28, 1, 1);
    const auto lr = degrade_volume(hr, 2, VolumeAxes::XY);
    CHECK(extract_patches(lr, hr, cfg, AxisMode::TwoAxes, 2).size() == 4);
  }
  cfg.stride = 3;
  {
    const auto hr = smooth_volume(32, 32, 2, 2);
    const auto lr = degrade_volume(hr, 2, VolumeAxes::XY);
    const auto pairs = extract_patches(lr, hr, cfg, AxisMode::TwoAxes, 2, "vol");
    CHECK(pairs.size() == 2 * 16);
    for (const auto& p : pairs) {
      CHECK(p.lr_patch.shape() == Shape{7, 7});
      CHECK(p.hr_patch.shape() == Shape{14, 14});
      CHECK(p.source == "vol");
    }
    // The second patch on the first slice sits at LR x offset 3, HR x offset 6.
    CHECK(pairs[1].lr_patch.at(0, 0) == lr.at(0, 3, 0));
    CHECK(pairs[1].hr_patch.at(0, 0) == hr.at(0, 6, 0));
  }
  {
    // OneAxis: coronal (depth x width) and sagittal (depth x height) planes.
    const auto hr = smooth_volume(10, 13, 16, 3);
    const auto lr = degrade_volume(hr, 2, VolumeAxes::Z);
    const auto pairs = extract_patches(lr, hr, cfg, AxisMode::OneAxis, 2);
    // depth 8 -> 1 row position; width 10 -> 2; height 13 -> 3
    CHECK(pairs.size() == 13 * 2 + 10 * 3);
    for (const auto& p : pairs) {
      CHECK(p.lr_patch.shape() == Shape{7, 7});
      CHECK(p.hr_patch.shape() == Shape{14, 7});
    }
    CHECK(pairs[0].lr_patch.at(2, 1) == lr.at(0, 1, 2));
    CHECK(pairs[0].hr_patch.at(5, 1) == hr.at(0, 1, 5));
  }
  {
    const auto hr = smooth_volume(12, 12, 1, 4);
    const auto lr = degrade_volume(hr, 2, VolumeAxes::XY);
    CHECK_THROWS_AS(extract_patches(lr, hr, cfg, AxisMode::TwoAxes, 2), std::invalid_argument);
  }
}

TEST_CASE("augment draws") {
  std::mt19937_64 rng(9);
  Tensor patch({7, 7});
  for (std::size_t i = 0; i < patch.size(); ++i) patch[i] = float((i * 37) % 11) / 10.0f;

  TrainConfig never;
  never.blur_probability = 0.0;
  for (int i = 0; i < 100; ++i) CHECK(augment(patch, never, rng) == patch);

  // Very small sigmas leave a float patch bit-identical, so the gate is counted
  // with a visible sigma.
  TrainConfig gate;
  gate.fixed_sigma = 0.5;
  int blurred = 0;
  for (int i = 0; i < 10000; ++i) blurred += augment(patch, gate, rng) != patch;
  CHECK(blurred >= 4700);
  CHECK(blurred <= 5300);

  TrainConfig cfg;
  int changed = 0;
  for (int i = 0; i < 10000; ++i) changed += augment(patch, cfg, rng) != patch;
  CHECK(changed <= 5300);
  CHECK(changed >= 3500);

  TrainConfig fixed;
  fixed.blur_probability = 1.0;
  fixed.fixed_sigma = 0.5;
  for (int i = 0; i < 10; ++i) CHECK(augment(patch, fixed, rng) == gaussian_blur_3x3(patch, 0.5));
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.blur_probability = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.fixed_sigma = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("train_stage memorizes four pairs") {
  const auto hr = smooth_volume(28, 14, 1, 11);
  const auto lr = degrade_volume(hr, 2, VolumeAxes::XY);
  TrainConfig cfg;
  cfg.stride = 7;
  cfg.batch_size = 4;
  cfg.epochs = 2000;
  cfg.lr_drop_epoch = 1500;
  cfg.blur_probability = 0.0;
  const auto pairs = extract_patches(lr, hr, cfg, AxisMode::TwoAxes, 2);
  REQUIRE(pairs.size() == 2);
  // Two more from a second volume.
  auto all = pairs;
  const auto hr2 = smooth_volume(28, 14, 1, 12);
  for (auto& p : extract_patches(degrade_volume(hr2, 2, VolumeAxes::XY), hr2, cfg, AxisMode::TwoAxes, 2)) {
    all.push_back(p);
  }
  REQUIRE(all.size() == 4);

  SRNetConfig nc;
  auto net = build_network<float>(nc, 5);
  const auto history = train_stage(all, net, cfg);
  REQUIRE(history.size() == 2000);
  CHECK(history[1499].learning_rate == doctest::Approx(1e-3));
  CHECK(history[1500].learning_rate == doctest::Approx(1e-4));

  double worst = 1e9;
  for (const auto& p : all) {
    const auto out = infer(net, p.lr_patch).reshaped({14, 14});
    worst = std::min(worst, psnr_oracle(out, p.hr_patch));
  }
  MESSAGE("worst training PSNR " << worst);
  CHECK(worst > 45.0);
}

TEST_CASE("train_stage smoothed loss decreases and is deterministic") {
  const auto hr = smooth_volume(32, 32, 2, 21);
  const auto lr = degrade_volume(hr, 2, VolumeAxes::XY);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 30;
  cfg.lr_drop_epoch = 20;
  const auto pairs = extract_patches(lr, hr, cfg, AxisMode::TwoAxes, 2);

  auto run = [&](std::uint64_t seed) {
    auto net = build_network<float>(small_config(2, AxisMode::TwoAxes), 3);
    TrainConfig c = cfg;
    c.seed = seed;
    std::size_t callbacks = 0;
    auto h = train_stage(pairs, net, c, [&](const EpochStats& s, const SRNet&) { CHECK(s.epoch == ++callbacks); });
    CHECK(callbacks == c.epochs);
    return std::make_pair(h, net);
  };
  const auto [history, net_a] = run(7);
  for (std::size_t w = 1; w < 6; ++w) {
    double prev = 0.0, cur = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      prev += history[(w - 1) * 5 + i].mean_loss;
      cur += history[w * 5 + i].mean_loss;
    }
    CHECK(cur <= prev);
  }
  const auto [history_b, net_b] = run(7);
  CHECK(net_a == net_b);
  const auto [history_c, net_c] = run(8);
  CHECK_FALSE(net_a == net_c);
}

TEST_CASE("train_stage rejects bad input") {
  auto net = build_network<float>(small_config(2, AxisMode::TwoAxes), 1);
  TrainConfig cfg;
  CHECK_THROWS_AS(train_stage({}, net, cfg), std::invalid_argument);

  const auto hr = smooth_volume(10, 13, 16, 3);
  const auto lr = degrade_volume(hr, 2, VolumeAxes::Z);
  const auto one_axis = extract_patches(lr, hr, cfg, AxisMode::OneAxis, 2);
  CHECK_THROWS_AS(train_stage(one_axis, net, cfg), std::invalid_argument);

  auto poisoned = extract_patches(degrade_volume(smooth_volume(14, 14, 1, 1), 2, VolumeAxes::XY),
                                  smooth_volume(14, 14, 1, 1), cfg, AxisMode::TwoAxes, 2);
  poisoned.front().hr_patch[0] = std::numeric_limits<float>::quiet_NaN();
  cfg.epochs = 1;
  try {
    train_stage(poisoned, net, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch() == 1);
    CHECK(e.batch_index() == 0);
  }
}

TEST_CASE("super_resolve_2d shape, clamping and tiling") {
  const auto net = build_network<float>(small_config(2, AxisMode::TwoAxes, 4), 2);
  Tensor big({256, 256}, 0.5f);
  const auto out = super_resolve_2d(net, big);
  CHECK(out.shape() == Shape{512, 512});

  auto hot = net;
  hot.mutable_layers().back().bias.fill(3.0f);
  const auto saturated = super_resolve_2d(hot, big);
  for (float v : saturated.data()) CHECK(v == 1.0f);

  // Whole-slice and cropped inference agree away from the crop border.
  const auto vol = smooth_volume(40, 40, 1, 5);
  const auto slice = vol.axial(0);
  const auto full = super_resolve_2d(net, slice);
  Tensor tile({21, 21});
  for (std::size_t y = 0; y < 21; ++y)
    for (std::size_t x = 0; x < 21; ++x) tile.at(y, x) = slice.at(y + 7, x + 7);
  const auto tiled = super_resolve_2d(net, tile);
  // six LR convs plus four HR convs (two LR pixels) of context
  const std::size_t margin = 2 * 8;
  double interior = 0.0, border = 0.0;
  for (std::size_t y = 0; y < 42; ++y)
    for (std::size_t x = 0; x < 42; ++x) {
      const double d = std::abs(tiled.at(y, x) - full.at(y + 14, x + 14));
      const bool inside = y >= margin && x >= margin && y + margin < 42 && x + margin < 42;
      (inside ? interior : border) = std::max(inside ? interior : border, d);
    }
  CHECK(interior < 1e-5);
  CHECK(border > 1e-5);
}

TEST_CASE("super_resolve_3d shape law") {
  auto xy = small_config(4, AxisMode::TwoAxes, 2);
  auto z = small_config(4, AxisMode::OneAxis, 2);
  const auto net_xy = build_network<float>(xy, 1);
  const auto net_z = build_network<float>(z, 2);
  Volume v = smooth_volume(64, 64, 16, 4);
  v.spacing_mm = {0.8, 0.9, 4.0};
  const auto out = super_resolve_3d(net_xy, net_z, v, 4);
  CHECK(out.width == 256);
  CHECK(out.height == 256);
  CHECK(out.depth == 64);
  CHECK(out.spacing_mm[0] == doctest::Approx(0.2));
  CHECK(out.spacing_mm[1] == doctest::Approx(0.225));
  CHECK(out.spacing_mm[2] == doctest::Approx(1.0));
  CHECK_NOTHROW(out.validate());

  const auto net_z2 = build_network<float>(small_config(2, AxisMode::OneAxis, 2), 2);
  CHECK_THROWS_AS(super_resolve_3d(net_xy, net_z2, v, 4), std::invalid_argument);
  CHECK_THROWS_AS(super_resolve_3d(net_z, net_xy, v, 4), std::invalid_argument);
}

TEST_CASE("dihedral transforms") {
  Tensor img({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  const auto rot = dihedral(img, 1);
  CHECK(rot.shape() == Shape{3, 2});
  // counter-clockwise: the last column becomes the first row
  CHECK(rot == Tensor({3, 2}, std::vector<float>{3, 6, 2, 5, 1, 4}));
  CHECK(dihedral(img, 4) == Tensor({2, 3}, std::vector<float>{3, 2, 1, 6, 5, 4}));
  CHECK(dihedral(img, 0) == img);
  std::vector<Tensor> seen;
  for (int k = 0; k < 8; ++k) {
    const auto t = dihedral(img, k);
    CHECK(dihedral_inverse(t, k) == img);
    for (const auto& s : seen) CHECK_FALSE(s == t);
    seen.push_back(t);
  }
  CHECK_THROWS_AS(dihedral(img, 8), std::invalid_argument);
}

TEST_CASE("self_ensemble") {
  std::size_t passes = 0;
  const Upscaler nearest = [&](const Tensor& s) {
    ++passes;
    Tensor out({s.dim(0) * 2, s.dim(1) * 2});
    for (std::size_t y = 0; y < out.dim(0); ++y)
      for (std::size_t x = 0; x < out.dim(1); ++x) out.at(y, x) = s.at(y / 2, x / 2);
    return out;
  };
  const auto slice = smooth_volume(9, 6, 1, 8).axial(0);
  const auto ens = self_ensemble(nearest, slice);
  CHECK(passes == 8);
  passes = 0;
  CHECK(ens == nearest(slice));

  // Median of 8 is the mean of the 4th and 5th order statistics and lies within min/max.
  int call = 0;
  const Upscaler scaled = [&](const Tensor& s) {
    Tensor out = s;
    const float f = float(++call);
    for (auto& v : out.data()) v = f;
    return out;
  };
  const auto m = self_ensemble(scaled, Tensor({4, 4}, 0.0f));
  for (float v : m.data()) CHECK(v == doctest::Approx(4.5f));

  call = 0;
  const Upscaler reversed = [&](const Tensor& s) {
    Tensor out = s;
    const float f = float(8 - call++);
    for (auto& v : out.data()) v = f;
    return out;
  };
  CHECK(self_ensemble(reversed, Tensor({4, 4}, 0.0f)) == m);

  const auto net = build_network<float>(small_config(2, AxisMode::TwoAxes, 4), 3);
  const auto constant = self_ensemble(nearest, Tensor({5, 7}, 0.3f));
  for (float v : constant.data()) CHECK(v == 0.3f);
  const auto flat = self_ensemble(net, Tensor({30, 30}, 0.4f));
  CHECK(flat.shape() == Shape{60, 60});
  // With zero padding a real network is only constant beyond its receptive field.
  const float centre = flat.at(30, 30);
  for (std::size_t y = 20; y < 40; ++y)
    for (std::size_t x = 20; x < 40; ++x) CHECK(flat.at(y, x) == doctest::Approx(centre).epsilon(1e-5));
}
