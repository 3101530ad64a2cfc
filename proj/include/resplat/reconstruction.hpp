#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "resplat/losses.hpp"

namespace resplat {

struct TrainingFrame {
  ImageRGB image;
  ImageU8 mask;             // binary car mask (real frames)
  ImageF soft_mask;         // alpha mask of synthetic frames, in [0,1]
  Image<Vec3> normal_map;   // empty => absent
  Camera camera;
  std::shared_ptr<const PrefilteredEnv> env_override;  // null => scene environment
  int env_id = -1;
  bool is_synthetic = false;
};

struct TrainConfig {
  double lambda_opacity = 1.0;
  double lambda_normal = 0.05;
  int iters_total = 30000;
  int synth_start = 10000;
  int synth_refresh = 2500;
  int synth_extra = 20000;
  int synth_pool = 8;
  double lr_mu = 2e-4;
  double lr_rot = 2e-3;
  double lr_scale = 5e-3;
  double lr_opacity = 5e-2;
  double lr_material = 1e-2;
  double lr_env_scale = 5e-3;
  double densify_grad_thresh = 2e-4;
  int densify_interval = 500;
  int densify_until = 15000;
  double prune_opacity = 0.005;
  int ssim_window = 11;
  uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    // synth_start >= iters_total simply disables the schedule
    if (synth_start < iters_total && synth_start + synth_extra > iters_total)
      throw std::runtime_error("config: synth_start + synth_extra must be <= iters_total");
    if (ssim_window % 2 == 0) throw std::runtime_error("config: ssim_window must be odd");
    if (lambda_opacity < 0 || lambda_normal < 0)
      throw std::runtime_error("config: loss weights must be nonnegative");
  }
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// sum over pixels of weight * acc_opacity, the synthetic-frame form of the
// opacity loss with weight = 1 - alpha_mask.
double loss_opacity_soft(const ImageF& acc_opacity, const ImageF& alpha_mask,
                         ImageF* d_acc = nullptr);

struct ObjectiveResult {
  double total = 0, rgb = 0, opacity = 0, normal = 0;
  UpstreamGrads upstream;  // gradient seed for rasterizer::backward
};

// Eq-style combined objective for one frame. Synthetic frames use their alpha
// mask in the opacity term and skip the normal term.
ObjectiveResult total_objective(const TrainingFrame& frame, const FrameBuffers& buffers,
                                const TrainConfig& cfg);

// External substitution for the rendered synthetic frame (the neural-refiner
// hook); keyed by camera, environment id and seed.
using RefineHook =
    std::function<std::optional<ImageRGB>(const Camera&, int env_id, uint64_t seed)>;

TrainingFrame make_synthetic_frame(const SplatList& splats, const Camera& camera,
                                   const std::shared_ptr<const PrefilteredEnv>& env,
                                   int env_id, uint64_t seed,
                                   const RefineHook& hook = nullptr);

struct OptimizeResult {
  SplatList splats;
  double env_scale = 1.0;
  EnvironmentMap fitted_env;  // init scaled by env_scale
  std::vector<double> loss_history;
};

// First-order moment-based (Adam) optimization of the full objective with
// densification, pruning and the 1:1 real/synthetic schedule.
OptimizeResult optimize(const std::vector<TrainingFrame>& frames,
                        const SplatList& init_splats, const EnvironmentMap& env_init,
                        const std::vector<EnvironmentMap>& env_pool,
                        const TrainConfig& cfg, const RefineHook& hook = nullptr);

}  // namespace resplat
