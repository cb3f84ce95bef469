#include "medsr/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "medsr/adam.hpp"

namespace medsr {

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 finalizer over a simple combination
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(a) ^ b) ^ c);
}

Volume degrade_volume(const Volume& hr, std::size_t r, VolumeAxes axes) {
  if (r == 0) throw std::invalid_argument("degrade_volume: r must be >= 1");
  const std::size_t rx = axes != VolumeAxes::Z ? r : 1;
  const std::size_t rz = axes != VolumeAxes::XY ? r : 1;
  if (hr.width % rx || hr.height % rx || hr.depth % rz) {
    throw std::invalid_argument("degrade_volume: extents " + std::to_string(hr.width) + "x" +
                                std::to_string(hr.height) + "x" + std::to_string(hr.depth) +
                                " not divisible by r=" + std::to_string(r) + " along " + to_string(axes));
  }
  Volume lr(hr.width / rx, hr.height / rx, hr.depth / rz);
  lr.spacing_mm = {hr.spacing_mm[0] * rx, hr.spacing_mm[1] * rx, hr.spacing_mm[2] * rz};
  lr.intensity = hr.intensity;
  const double norm = 1.0 / static_cast<double>(rx * rx * rz);
  for (std::size_t y = 0; y < lr.height; ++y)
    for (std::size_t x = 0; x < lr.width; ++x)
      for (std::size_t z = 0; z < lr.depth; ++z) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < rx; ++dy)
          for (std::size_t dx = 0; dx < rx; ++dx)
            for (std::size_t dz = 0; dz < rz; ++dz) acc += hr.at(y * rx + dy, x * rx + dx, z * rz + dz);
        lr.at(y, x, z) = static_cast<float>(acc * norm);
      }
  return lr;
}

void TrainConfig::validate() const {
  if (patch_size == 0 || batch_size == 0 || epochs == 0 || stride == 0) {
    throw std::invalid_argument("patch_size, batch_size, epochs and stride must be positive");
  }
  if (!(lr_initial > 0.0) || !(lr_after_epoch_20 > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(blur_probability >= 0.0 && blur_probability <= 1.0)) {
    throw std::invalid_argument("blur_probability must lie in [0,1]");
  }
  if (!(sigma_max > 0.0)) throw std::invalid_argument("sigma_max must be positive");
  if (fixed_sigma && !(*fixed_sigma > 0.0)) throw std::invalid_argument("fixed_sigma must be positive");
}

namespace {

Tensor crop(const Tensor& plane, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  Tensor out({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.at(y, x) = plane.at(y0 + y, x0 + x);
  return out;
}

}  // namespace

void extract_plane_patches(const Tensor& lr, const Tensor& hr, const TrainConfig& cfg, AxisMode mode, std::size_t r,
                           const std::string& source, std::vector<PatchPair>& out) {
  const std::size_t p = cfg.patch_size, h = lr.dim(0), w = lr.dim(1);
  const Shape hr_shape = mode == AxisMode::TwoAxes ? Shape{h * r, w * r} : Shape{h * r, w};
  require_same_shape(hr.shape(), hr_shape, "extract_patches HR plane");
  if (p > h || p > w) {
    throw std::invalid_argument("patch size " + std::to_string(p) + " exceeds plane " + to_string(lr.shape()));
  }
  const std::size_t hp = p * r, wp = mode == AxisMode::TwoAxes ? p * r : p;
  const std::size_t wr = mode == AxisMode::TwoAxes ? r : 1;
  for (std::size_t y = 0; y + p <= h; y += cfg.stride)
    for (std::size_t x = 0; x + p <= w; x += cfg.stride)
      out.push_back({crop(lr, y, x, p, p), crop(hr, y * r, x * wr, hp, wp), source});
}

std::vector<PatchPair> extract_patches(const Volume& lr, const Volume& hr, const TrainConfig& cfg, AxisMode mode,
                                       std::size_t r, const std::string& source) {
  cfg.validate();
  std::vector<PatchPair> out;
  if (mode == AxisMode::TwoAxes) {
    if (hr.width != lr.width * r || hr.height != lr.height * r || hr.depth != lr.depth) {
      throw std::invalid_argument("extract_patches: HR volume is not the XY r-fold of the LR volume");
    }
    for (std::size_t z = 0; z < lr.depth; ++z) {
      extract_plane_patches(lr.axial(z), hr.axial(z), cfg, mode, r, source, out);
    }
  } else {
    if (hr.width != lr.width || hr.height != lr.height || hr.depth != lr.depth * r) {
      throw std::invalid_argument("extract_patches: HR volume is not the depth r-fold of the LR volume");
    }
    for (std::size_t y = 0; y < lr.height; ++y) {
      extract_plane_patches(lr.coronal(y), hr.coronal(y), cfg, mode, r, source, out);
    }
    for (std::size_t x = 0; x < lr.width; ++x) {
      extract_plane_patches(lr.sagittal(x), hr.sagittal(x), cfg, mode, r, source, out);
    }
  }
  return out;
}

Tensor augment(const Tensor& patch, const TrainConfig& cfg, std::mt19937_64& rng) {
  std::bernoulli_distribution blur(cfg.blur_probability);
  if (!blur(rng)) return patch;
  double sigma;
  if (cfg.fixed_sigma) {
    sigma = *cfg.fixed_sigma;
  } else {
    // U[0, max) reflected onto (0, max]
    sigma = cfg.sigma_max - std::uniform_real_distribution<double>(0.0, cfg.sigma_max)(rng);
  }
  return gaussian_blur_3x3(patch, sigma);
}

std::vector<EpochStats> train_stage(const std::vector<PatchPair>& pairs, SRNet& net, const TrainConfig& cfg,
                                    const EpochCallback& on_epoch) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("train_stage: no training pairs");
  const auto& nc = net.config();
  const Shape lr_shape = pairs.front().lr_patch.shape();
  if (lr_shape.size() != 2) throw std::invalid_argument("train_stage: LR patches must be 2D");
  const Shape hr_shape = nc.axis_mode == AxisMode::TwoAxes
                             ? Shape{lr_shape[0] * nc.scale_factor, lr_shape[1] * nc.scale_factor}
                             : (nc.shuffle_axis == ShuffleAxis::Rows ? Shape{lr_shape[0] * nc.scale_factor, lr_shape[1]}
                                                                     : Shape{lr_shape[0], lr_shape[1] * nc.scale_factor});
  for (const auto& p : pairs) {
    require_same_shape(p.lr_patch.shape(), lr_shape, "train_stage LR patch");
    require_same_shape(p.hr_patch.shape(), hr_shape, "train_stage HR patch (network axis mode)");
  }

  // The network records the loss weight it was trained with.
  {
    SRNetConfig c = nc;
    c.lambda = cfg.lambda;
    net = SRNet(c, net.layers());
  }
  const double lambda = net.config().effective_lambda();

  std::vector<AdamState<float>> weight_states, bias_states;
  for (const auto& l : net.layers()) {
    weight_states.emplace_back(l.weights.shape(), cfg.lr_initial);
    bias_states.emplace_back(l.bias.shape(), cfg.lr_initial);
  }

  const std::size_t lr_size = element_count(lr_shape), hr_size = element_count(hr_shape);
  std::vector<std::size_t> order(pairs.size());
  std::vector<EpochStats> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch < cfg.lr_drop_epoch ? cfg.lr_initial : cfg.lr_after_epoch_20;
    for (auto& s : weight_states) s.learning_rate = lr;
    for (auto& s : bias_states) s.learning_rate = lr;

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, epoch, 0x5eed));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      Tensor input({n, 1, lr_shape[0], lr_shape[1]});
      Tensor target({n, 1, hr_shape[0], hr_shape[1]});
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t idx = order[start + b];
        std::mt19937_64 aug_rng(derive_seed(cfg.seed, epoch + 1, idx));
        const Tensor lr_patch = augment(pairs[idx].lr_patch, cfg, aug_rng);
        std::copy_n(lr_patch.raw(), lr_size, input.raw() + b * lr_size);
        std::copy_n(pairs[idx].hr_patch.raw(), hr_size, target.raw() + b * hr_size);
      }

      const auto trace = forward(net, input);
      const double loss = loss_full(trace, target, lambda);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch + 1, batch_index);
      const auto grads = backward(net, trace, target, lambda);
      auto& layers = net.mutable_layers();
      for (std::size_t i = 0; i < layers.size(); ++i) {
        adam_step(layers[i].weights, grads[i].weights, weight_states[i]);
        adam_step(layers[i].bias, grads[i].bias, bias_states[i]);
      }
      loss_sum += loss * static_cast<double>(n);
    }
    EpochStats stats{epoch + 1, loss_sum / static_cast<double>(pairs.size()), lr};
    history.push_back(stats);
    if (on_epoch) on_epoch(stats, net);
  }
  return history;
}

Tensor super_resolve_2d(const SRNet& net, const Tensor& slice) {
  if (slice.rank() != 2) throw std::invalid_argument("super_resolve_2d expects an H x W slice");
  auto out = infer(net, slice);
  for (auto& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out.reshaped({out.dim(2), out.dim(3)});
}

Volume upscale_axial(const SRNet& net_xy, const Volume& volume, bool ensemble) {
  const auto& c = net_xy.config();
  if (c.axis_mode != AxisMode::TwoAxes) throw std::invalid_argument("stage-1 network must upscale two axes");
  const std::size_t r = c.scale_factor;
  Volume out(volume.width * r, volume.height * r, volume.depth);
  out.spacing_mm = {volume.spacing_mm[0] / r, volume.spacing_mm[1] / r, volume.spacing_mm[2]};
  out.intensity = volume.intensity;
  for (std::size_t z = 0; z < volume.depth; ++z) {
    const Tensor slice = volume.axial(z);
    out.set_axial(z, ensemble ? self_ensemble(net_xy, slice) : super_resolve_2d(net_xy, slice));
  }
  return out;
}

Volume upscale_depth(const SRNet& net_z, const Volume& volume) {
  const auto& c = net_z.config();
  if (c.axis_mode != AxisMode::OneAxis || c.shuffle_axis != ShuffleAxis::Rows) {
    throw std::invalid_argument("stage-2 network must upscale one axis (rows = depth)");
  }
  const std::size_t r = c.scale_factor;
  Volume out(volume.width, volume.height, volume.depth * r);
  out.spacing_mm = {volume.spacing_mm[0], volume.spacing_mm[1], volume.spacing_mm[2] / r};
  out.intensity = volume.intensity;
  for (std::size_t y = 0; y < volume.height; ++y) {
    auto plane = infer(net_z, volume.coronal(y));
    for (auto& v : plane.data()) v = std::clamp(v, 0.0f, 1.0f);
    out.set_coronal(y, plane.reshaped({plane.dim(2), plane.dim(3)}));
  }
  return out;
}

Volume super_resolve_3d(const SRNet& net_xy, const SRNet& net_z, const Volume& volume, std::size_t r) {
  if (net_xy.config().scale_factor != r || net_z.config().scale_factor != r) {
    throw std::invalid_argument("super_resolve_3d: network scale factors (" +
                                std::to_string(net_xy.config().scale_factor) + ", " +
                                std::to_string(net_z.config().scale_factor) + ") do not match r=" + std::to_string(r));
  }
  return upscale_depth(net_z, upscale_axial(net_xy, volume));
}

namespace {

Tensor rotate_ccw(const Tensor& in) {
  const std::size_t h = in.dim(0), w = in.dim(1);
  Tensor out({w, h});
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = 0; j < h; ++j) out.at(i, j) = in.at(j, w - 1 - i);
  return out;
}

Tensor flip_horizontal(const Tensor& in) {
  const std::size_t h = in.dim(0), w = in.dim(1);
  Tensor out({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.at(y, x) = in.at(y, w - 1 - x);
  return out;
}

}  // namespace

Tensor dihedral(const Tensor& image, int k) {
  if (image.rank() != 2 || k < 0 || k > 7) throw std::invalid_argument("dihedral: need a 2D image and k in 0..7");
  Tensor out = k >= 4 ? flip_horizontal(image) : image;
  for (int i = 0; i < k % 4; ++i) out = rotate_ccw(out);
  return out;
}

Tensor dihedral_inverse(const Tensor& image, int k) {
  if (image.rank() != 2 || k < 0 || k > 7) throw std::invalid_argument("dihedral: need a 2D image and k in 0..7");
  Tensor out = image;
  for (int i = 0; i < (4 - k % 4) % 4; ++i) out = rotate_ccw(out);
  return k >= 4 ? flip_horizontal(out) : out;
}

Tensor self_ensemble(const Upscaler& upscale, const Tensor& slice) {
  std::vector<Tensor> aligned;
  aligned.reserve(8);
  for (int k = 0; k < 8; ++k) aligned.push_back(dihedral_inverse(upscale(dihedral(slice, k)), k));
  for (const auto& a : aligned) require_same_shape(a.shape(), aligned.front().shape(), "self_ensemble outputs");
  Tensor out(aligned.front().shape());
  std::array<float, 8> v{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < 8; ++k) v[k] = aligned[k][i];
    std::sort(v.begin(), v.end());
    out[i] = 0.5f * (v[3] + v[4]);
  }
  return out;
}

Tensor self_ensemble(const SRNet& net, const Tensor& slice) {
  return self_ensemble([&](const Tensor& s) { return super_resolve_2d(net, s); }, slice);
}

}  // namespace medsr
