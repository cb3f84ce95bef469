#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "medsr/srnet.hpp"
#include "medsr/volume.hpp"

namespace medsr {

/// Block-average downsampling by r along the selected axes. Extents must be
/// divisible by r (crop first). Spacing is multiplied by r on degraded axes.
Volume degrade_volume(const Volume& hr, std::size_t r, VolumeAxes axes);

struct TrainConfig {
  std::size_t patch_size = 7;
  std::size_t batch_size = 128;
  std::size_t epochs = 40;
  double lr_initial = 1e-3;
  double lr_after_epoch_20 = 1e-4;
  // Epoch (0-based) from which lr_after_epoch_20 applies.
  std::size_t lr_drop_epoch = 20;
  double lambda = 1.0;
  double blur_probability = 0.5;
  double sigma_max = 0.5;
  std::optional<double> fixed_sigma;
  std::size_t stride = 3;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PatchPair {
  Tensor lr_patch;  // p x p
  Tensor hr_patch;  // (p*r) x (p*r), or (p*r) x p for one-axis upscaling of rows
  std::string source;  // provenance tag of the originating volume
};

/// Slides a p x p window with cfg.stride over every plane of the LR volume and
/// pairs it with the matching HR window. TwoAxes: axial slices of an XY-degraded
/// pair. OneAxis: coronal and sagittal planes of a depth-degraded pair, depth as
/// the upscaled (row) axis.
std::vector<PatchPair> extract_patches(const Volume& lr, const Volume& hr, const TrainConfig& cfg, AxisMode mode,
                                       std::size_t r, const std::string& source = {});

/// Same sliding window over one LR/HR plane pair.
void extract_plane_patches(const Tensor& lr, const Tensor& hr, const TrainConfig& cfg, AxisMode mode, std::size_t r,
                           const std::string& source, std::vector<PatchPair>& out);

/// With probability blur_probability blur the patch with sigma ~ U(0, sigma_max]
/// (or fixed_sigma when set); otherwise return it unchanged.
Tensor augment(const Tensor& patch, const TrainConfig& cfg, std::mt19937_64& rng);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double learning_rate = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch_index)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index)),
        epoch_(epoch),
        batch_index_(batch_index) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t batch_index() const { return batch_index_; }

 private:
  std::size_t epoch_;
  std::size_t batch_index_;
};

using EpochCallback = std::function<void(const EpochStats&, const SRNet&)>;

/// Minimizes L1(final) + lambda * L1(intermediate) with Adam over shuffled
/// mini-batches. Deterministic in cfg.seed. Returns the per-epoch loss history.
std::vector<EpochStats> train_stage(const std::vector<PatchPair>& pairs, SRNet& net, const TrainConfig& cfg,
                                    const EpochCallback& on_epoch = {});

/// Whole-slice inference clamped to [0,1].
Tensor super_resolve_2d(const SRNet& net, const Tensor& slice);

/// Stage 1 on every axial slice; result keeps the input depth. With
/// `ensemble` each slice goes through self_ensemble.
Volume upscale_axial(const SRNet& net_xy, const Volume& volume, bool ensemble = false);

/// Stage 2 on every coronal plane, upscaling depth.
Volume upscale_depth(const SRNet& net_z, const Volume& volume);

/// Two-stage volume super-resolution: width/height first, then depth.
Volume super_resolve_3d(const SRNet& net_xy, const SRNet& net_z, const Volume& volume, std::size_t r);

using Upscaler = std::function<Tensor(const Tensor&)>;

/// Applies one of the 8 dihedral transforms (k in 0..7: optional horizontal
/// flip for k >= 4, then k mod 4 counter-clockwise quarter turns).
Tensor dihedral(const Tensor& image, int k);
Tensor dihedral_inverse(const Tensor& image, int k);

/// Per-pixel median over the 8 dihedral variants, each upscaled and mapped back.
Tensor self_ensemble(const Upscaler& upscale, const Tensor& slice);
Tensor self_ensemble(const SRNet& net, const Tensor& slice);

/// Mixes values into a reproducible 64-bit seed.
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace medsr
