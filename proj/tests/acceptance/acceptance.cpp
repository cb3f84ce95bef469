// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Usage: acceptance [criterion-name ...]   (no arguments runs everything)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "medsr/evaluate.hpp"
#include "medsr/metrics.hpp"
#include "medsr/ops.hpp"
#include "medsr/phantom.hpp"
#include "medsr/pipeline.hpp"
#include "medsr/shuffle.hpp"
#include "medsr/srnet.hpp"
#include "unit/fd_oracle.hpp"

using namespace medsr;
using medsr::testing::dot;
using medsr::testing::max_gradient_error;
using medsr::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- gradients ----

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst_conv = 0, worst_relu = 0, worst_add = 0, worst_l1 = 0, worst_net = 0;

  {
    auto x = random_tensor({2, 2, 5, 4}, rng);
    ConvLayer<double> layer(2, 3);
    layer.weights = random_tensor({3, 2, 3, 3}, rng);
    layer.bias = random_tensor({3}, rng);
    const auto w = random_tensor({2, 3, 5, 4}, rng);
    const auto g = conv2d_backward(x, layer, w, true);
    const auto f = [&] { return dot(conv2d_forward(x, layer), w); };
    worst_conv = std::max({max_gradient_error(x, g.input, f), max_gradient_error(layer.weights, g.weights, f),
                           max_gradient_error(layer.bias, g.bias, f)});
  }
  {
    // Inputs kept at least 0.1 away from the kink.
    auto x = random_tensor({1, 1, 6, 6}, rng, 0.1, 1.0);
    for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
    const auto w = random_tensor({1, 1, 6, 6}, rng);
    worst_relu = max_gradient_error(x, relu_backward(x, w), [&] { return dot(relu(x), w); });
  }
  {
    auto a = random_tensor({1, 2, 3, 3}, rng), b = random_tensor({1, 2, 3, 3}, rng);
    const auto w = random_tensor({1, 2, 3, 3}, rng);
    const auto f = [&] { return dot(add(a, b), w); };
    worst_add = std::max(max_gradient_error(a, w, f), max_gradient_error(b, w, f));
  }
  {
    auto pred = random_tensor({1, 1, 6, 6}, rng, 0.0, 1.0);
    auto target = pred;
    for (std::size_t i = 0; i < target.size(); ++i) target[i] += (i % 2 ? 0.2 : -0.2);
    worst_l1 = max_gradient_error(pred, l1_loss_grad(pred, target), [&] { return l1_loss(pred, target); });
  }
  for (auto mode : {AxisMode::TwoAxes, AxisMode::OneAxis}) {
    SRNetConfig c;
    c.base_filters = 4;
    c.axis_mode = mode;
    auto net = build_network<double>(c, 77);
    std::uniform_real_distribution<double> bias(-0.1, 0.1);
    for (auto& l : net.mutable_layers())
      for (auto& b : l.bias.data()) b = bias(rng);
    const auto x = random_tensor({1, 1, 8, 8}, rng, 0.0, 1.0);
    const Shape hr = mode == AxisMode::TwoAxes ? Shape{1, 1, 16, 16} : Shape{1, 1, 16, 8};
    const auto y = random_tensor(hr, rng, 0.0, 1.0);
    const auto grads = backward(net, forward(net, x), y, 1.0);
    auto& layers = net.mutable_layers();
    const auto f = [&] { return loss_full(forward(net, x), y, 1.0); };
    for (std::size_t i = 0; i < layers.size(); ++i) {
      worst_net = std::max({worst_net, max_gradient_error(layers[i].weights, grads[i].weights, f),
                            max_gradient_error(layers[i].bias, grads[i].bias, f)});
    }
  }
  const double worst = std::max({worst_conv, worst_relu, worst_add, worst_l1, worst_net});
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "max rel err conv " << worst_conv << " relu " << worst_relu << " add " << worst_add << " l1 " << worst_l1
    << " net " << worst_net << "; " << fmt("%.1f s", elapsed);
  return {worst < 1e-4 && elapsed < 60.0, d.str()};
}

// ---- shuffle ----

Outcome shuffle() {
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t r : {1u, 2u, 4u})
    for (std::size_t h = 1; h <= 4; ++h)
      for (std::size_t w = 1; w <= 4; ++w) {
        Tensor64 maps({2, r * r, h, w});
        std::iota(maps.data().begin(), maps.data().end(), 1.0);
        const auto hr = pixel_shuffle_2d(maps, r);
        if (hr.shape() != Shape{2, 1, h * r, w * r}) ++mismatches;
        for (std::size_t n = 0; n < 2; ++n)
          for (std::size_t y = 0; y < h * r; ++y)
            for (std::size_t x = 0; x < w * r; ++x)
              if (hr.at(n, 0, y, x) != maps.at(n, (y % r) * r + x % r, y / r, x / r)) ++mismatches;
        if (!(pixel_unshuffle_2d(hr, r) == maps) || !(pixel_shuffle_2d(pixel_unshuffle_2d(hr, r), r) == hr))
          ++mismatches;
        ++cases;

        Tensor64 m1({2, r, h, w});
        std::iota(m1.data().begin(), m1.data().end(), 1.0);
        const auto rows = pixel_shuffle_1d(m1, r, ShuffleAxis::Rows);
        const auto cols = pixel_shuffle_1d(m1, r, ShuffleAxis::Cols);
        if (rows.shape() != Shape{2, 1, h * r, w} || cols.shape() != Shape{2, 1, h, w * r}) ++mismatches;
        for (std::size_t n = 0; n < 2; ++n) {
          for (std::size_t y = 0; y < h * r; ++y)
            for (std::size_t x = 0; x < w; ++x)
              if (rows.at(n, 0, y, x) != m1.at(n, y % r, y / r, x)) ++mismatches;
          for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w * r; ++x)
              if (cols.at(n, 0, y, x) != m1.at(n, x % r, y, x / r)) ++mismatches;
        }
        for (auto axis : {ShuffleAxis::Rows, ShuffleAxis::Cols}) {
          const auto img = pixel_shuffle_1d(m1, r, axis);
          if (!(pixel_unshuffle_1d(img, r, axis) == m1) ||
              !(pixel_shuffle_1d(pixel_unshuffle_1d(img, r, axis), r, axis) == img))
            ++mismatches;
        }
        cases += 2;
      }
  return {mismatches == 0, std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

// ---- metrics ----

Outcome metrics() {
  const double p = psnr(Tensor({8, 8}, 100.0f), Tensor({8, 8}, 101.0f), 255.0);
  const double s = ssim(Tensor({16, 16}, 0.5f), Tensor({16, 16}, 0.25f));
  // Zero-variance closed form: luminance term only.
  const double c1 = 0.01 * 0.01;
  const double s_closed = (2 * 0.5 * 0.25 + c1) / (0.25 + 0.0625 + c1);

  std::mt19937_64 rng(5);
  Tensor ref({64, 64});
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      ref.at(y, x) = 0.5f + 0.3f * float(std::sin(0.3 * x) * std::cos(0.2 * y)) + (x > 30 ? 0.1f : 0.0f);
  std::vector<double> ifcs;
  for (double sigma : {0.01, 0.05, 0.1}) {
    std::normal_distribution<float> noise(0.0f, float(sigma));
    Tensor d = ref;
    for (auto& v : d.data()) v += noise(rng);
    ifcs.push_back(ifc(ref, d));
  }
  const bool ifc_ok = ifcs[0] > ifcs[1] && ifcs[1] > ifcs[2];
  const bool pass = std::abs(p - 48.1308) <= 1e-3 && std::abs(s - 0.8001) <= 1e-3 && std::abs(s - s_closed) < 1e-9 &&
                    ifc_ok;
  std::ostringstream d;
  d << "psnr " << fmt("%.4f", p) << " dB, ssim " << fmt("%.4f", s) << ", ifc(0.01,0.05,0.1) " << fmt("%.3f", ifcs[0])
    << " > " << fmt("%.3f", ifcs[1]) << " > " << fmt("%.3f", ifcs[2]);
  return {pass, d.str()};
}

// ---- architecture ----

Outcome architecture() {
  std::size_t problems = 0;
  if (count_parameters(ConvLayer<float>(32, 1)) != 289) ++problems;
  for (std::size_t r : {2u, 4u})
    for (auto mode : {AxisMode::TwoAxes, AxisMode::OneAxis}) {
      SRNetConfig c;
      c.scale_factor = r;
      c.axis_mode = mode;
      const auto net = build_network<float>(c, 1);
      const auto& L = net.layers();
      const std::size_t up = mode == AxisMode::TwoAxes ? r * r : r;
      const std::vector<std::pair<std::size_t, std::size_t>> expected = {
          {1, 32}, {32, 32}, {32, 32}, {32, 32}, {32, 32}, {32, up}, {1, 32}, {32, 32}, {32, 32}, {32, 1}};
      if (L.size() != expected.size()) {
        ++problems;
        continue;
      }
      std::size_t total = 0;
      for (std::size_t i = 0; i < L.size(); ++i) {
        if (L[i].in_channels() != expected[i].first || L[i].out_channels() != expected[i].second) ++problems;
        if (L[i].weights.dim(2) != 3 || L[i].weights.dim(3) != 3) ++problems;
        total += count_parameters(L[i]);
      }
      if (total != net.parameter_count()) ++problems;
      const auto t = forward(net, Tensor({1, 1, 7, 7}, 0.5f));
      const Shape hr = mode == AxisMode::TwoAxes ? Shape{1, 1, 7 * r, 7 * r} : Shape{1, 1, 7 * r, 7};
      if (t.intermediate_hr.shape() != hr || t.final_hr.shape() != hr) ++problems;
    }
  return {problems == 0, "289 per 32-channel filter; 10 layers for r in {2,4} x {two-axis, one-axis}; " +
                             std::to_string(problems) + " problems"};
}

// ---- memorization ----

Volume smooth_slice(std::uint64_t seed) {
  Volume v(14, 28, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng), b = u(rng), c = u(rng), ph = 6.0 * u(rng);
  for (std::size_t y = 0; y < 28; ++y)
    for (std::size_t x = 0; x < 14; ++x)
      v.at(y, x, 0) = float(0.5 + 0.2 * a * std::sin(0.3 * x + ph) + 0.2 * b * std::cos(0.25 * y) +
                            0.05 * c * std::sin(0.5 * (x + y)));
  return v;
}

Outcome memorization() {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg;
  cfg.stride = 7;
  cfg.batch_size = 4;
  cfg.epochs = 2000;  // one step per epoch
  cfg.lr_drop_epoch = 1500;
  cfg.blur_probability = 0.0;
  std::vector<PatchPair> pairs;
  for (std::uint64_t s : {11u, 12u}) {
    const auto hr = smooth_slice(s);
    for (auto& p : extract_patches(degrade_volume(hr, 2, VolumeAxes::XY), hr, cfg, AxisMode::TwoAxes, 2))
      pairs.push_back(p);
  }
  if (pairs.size() != 4) return {false, "expected 4 pairs, got " + std::to_string(pairs.size())};
  auto net = build_network<float>(SRNetConfig{}, 5);
  train_stage(pairs, net, cfg);
  double worst = 1e9;
  for (const auto& p : pairs)
    worst = std::min(worst, psnr(infer(net, p.lr_patch).reshaped({14, 14}), p.hr_patch));
  const double elapsed = seconds_since(t0);
  return {worst > 45.0 && elapsed < 600.0,
          "worst train PSNR " + fmt("%.2f", worst) + " dB after 2000 steps; " + fmt("%.1f s", elapsed)};
}

// ---- desk scale ----

struct DeskData {
  std::vector<PatchPair> pairs;
  std::vector<DatasetItem> test;
};

const DeskData& desk_data() {
  static const DeskData data = [] {
    DeskData d;
    const PhantomKind kinds[] = {PhantomKind::SheppLike, PhantomKind::Spheres, PhantomKind::Ramps};
    TrainConfig cfg;
    for (std::size_t i = 0; i < 8; ++i) {
      Volume v = generate_phantom(kinds[i % 3], 64, 64, 64, 100 + i);
      const std::string id = "phantom_" + std::to_string(i);
      if (i < 6) {
        auto p = extract_patches(degrade_volume(v, 2, VolumeAxes::XY), v, cfg, AxisMode::TwoAxes, 2, id);
        d.pairs.insert(d.pairs.end(), p.begin(), p.end());
      } else {
        d.test.push_back({id, std::move(v)});
      }
    }
    return d;
  }();
  return data;
}

struct DeskRun {
  MetricRow score;
  double seconds = 0;
};

// Stage xy at r=2 with the default hyperparameters, 10 epochs, rate drop at epoch 5.
// Scored with self-ensemble on the two test phantoms.
DeskRun desk_run(std::uint64_t seed, bool intermediate_loss) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& data = desk_data();
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.lr_drop_epoch = 5;
  cfg.seed = seed;
  SRNetConfig nc;
  nc.enable_intermediate_loss = intermediate_loss;
  auto net = build_network<float>(nc, derive_seed(seed, 1));
  train_stage(data.pairs, net, cfg);
  const auto rep = evaluate([&](const Volume& lr) { return upscale_axial(net, lr, true); }, data.test, 2,
                            VolumeAxes::XY);
  const double s = seconds_since(t0);
  std::cout << "  desk run seed " << seed << (intermediate_loss ? " full" : " no-intermediate") << ": PSNR "
            << fmt("%.3f", rep.aggregate().psnr_db) << " SSIM " << fmt("%.4f", rep.aggregate().ssim) << " ("
            << fmt("%.0f s", s) << ")" << std::endl;
  return {rep.aggregate(), s};
}

std::map<std::pair<std::uint64_t, bool>, DeskRun>& desk_cache() {
  static std::map<std::pair<std::uint64_t, bool>, DeskRun> cache;
  return cache;
}

const DeskRun& desk(std::uint64_t seed, bool intermediate_loss) {
  auto& c = desk_cache();
  const auto key = std::make_pair(seed, intermediate_loss);
  if (!c.count(key)) c[key] = desk_run(seed, intermediate_loss);
  return c[key];
}

Outcome desk_trend() {
  const auto& data = desk_data();
  std::map<std::string, MetricRow> base;
  for (auto m : {InterpMethod::Bilinear, InterpMethod::Bicubic, InterpMethod::Lanczos})
    base[to_string(m)] = evaluate(interpolation_reconstructor(m, 2, VolumeAxes::XY), data.test, 2, VolumeAxes::XY)
                             .aggregate();
  const auto& run = desk(1, true);
  const auto& lz = base["lanczos"];
  const double dpsnr = run.score.psnr_db - lz.psnr_db, dssim = run.score.ssim - lz.ssim;
  const bool order = lz.psnr_db >= base["bicubic"].psnr_db && base["bicubic"].psnr_db >= base["bilinear"].psnr_db;
  std::ostringstream d;
  d << "net " << fmt("%.3f", run.score.psnr_db) << " dB / " << fmt("%.4f", run.score.ssim) << " vs lanczos "
    << fmt("%.3f", lz.psnr_db) << " / " << fmt("%.4f", lz.ssim) << " (delta " << fmt("%+.3f", dpsnr) << " dB, "
    << fmt("%+.4f", dssim) << "); bicubic " << fmt("%.3f", base["bicubic"].psnr_db) << ", bilinear "
    << fmt("%.3f", base["bilinear"].psnr_db) << "; train " << fmt("%.0f s", run.seconds);
  return {dpsnr >= 0.3 && dssim >= 0.005 && order && run.seconds < 7200.0, d.str()};
}

// Paired over seeds 1..3: the model without intermediate loss must not beat the
// full model by more than max(0.05 dB, 2 standard errors of the paired mean).
Outcome ablation() {
  std::vector<double> diffs;
  for (std::uint64_t seed : {1u, 2u, 3u}) diffs.push_back(desk(seed, false).score.psnr_db - desk(seed, true).score.psnr_db);
  const double mean = (diffs[0] + diffs[1] + diffs[2]) / 3.0;
  double var = 0;
  for (double x : diffs) var += (x - mean) * (x - mean);
  var /= 2.0;
  const double se = std::sqrt(var / 3.0);
  const double noise = std::max(0.05, 2.0 * se);
  std::ostringstream d;
  d << "no-intermediate minus full PSNR: " << fmt("%+.3f", diffs[0]) << ", " << fmt("%+.3f", diffs[1]) << ", "
    << fmt("%+.3f", diffs[2]) << " dB; mean " << fmt("%+.3f", mean) << " <= noise " << fmt("%.3f", noise);
  return {mean <= noise, d.str()};
}

// ---- 3D shape law ----

Outcome shape_law() {
  const auto t0 = std::chrono::steady_clock::now();
  SRNetConfig xy;
  SRNetConfig z;
  z.axis_mode = AxisMode::OneAxis;
  const auto net_xy = build_network<float>(xy, 1), net_z = build_network<float>(z, 2);
  Volume in(256, 256, 64, 0.5f);
  in.spacing_mm = {0.8, 0.8, 2.0};
  const Volume out = super_resolve_3d(net_xy, net_z, in, 2);
  const bool ok = out.width == 512 && out.height == 512 && out.depth == 128 && out.voxels.size() == 512u * 512u * 128u &&
                  out.spacing_mm == std::array<double, 3>{0.4, 0.4, 1.0};
  return {ok, "256x256x64 -> " + std::to_string(out.width) + "x" + std::to_string(out.height) + "x" +
                  std::to_string(out.depth) + "; " + fmt("%.1f s", seconds_since(t0))};
}

// ---- self-ensemble ----

Outcome ensemble() {
  std::mt19937_64 rng(9);
  Tensor slice({9, 13});
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : slice.data()) v = u(rng);
  // Nearest-neighbour x2 upscaling commutes with every dihedral transform.
  std::size_t calls = 0;
  const Upscaler stub = [&](const Tensor& s) {
    ++calls;
    Tensor out({s.dim(0) * 2, s.dim(1) * 2});
    for (std::size_t y = 0; y < out.dim(0); ++y)
      for (std::size_t x = 0; x < out.dim(1); ++x) out.at(y, x) = s.at(y / 2, x / 2);
    return out;
  };
  const Tensor direct = stub(slice);
  calls = 0;
  const Tensor merged = self_ensemble(stub, slice);
  const bool ok = calls == 8 && merged == direct;
  return {ok, std::to_string(calls) + " passes; equivariant stub " + (merged == direct ? "bit-exact" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-correctness", gradients},   {"shuffle-oracles", shuffle},
      {"metric-oracles", metrics},           {"architecture-audit", architecture},
      {"optimization-sanity", memorization}, {"desk-scale-trend", desk_trend},
      {"ablation-direction", ablation},      {"3d-shape-law", shape_law},
      {"self-ensemble", ensemble},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
