#include "resplat/reconstruction.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace resplat {

double loss_opacity_soft(const ImageF& acc_opacity, const ImageF& alpha_mask,
                         ImageF* d_acc) {
  if (!acc_opacity.same_dims(alpha_mask))
    throw std::runtime_error("loss_opacity_soft: dimension mismatch");
  if (d_acc) *d_acc = ImageF(acc_opacity.width, acc_opacity.height, 0.0);
  double total = 0;
  for (size_t i = 0; i < acc_opacity.size(); ++i) {
    double w = 1.0 - alpha_mask.data[i];
    total += w * acc_opacity.data[i];
    if (d_acc) d_acc->data[i] = w;
  }
  return total;
}

ObjectiveResult total_objective(const TrainingFrame& frame, const FrameBuffers& buffers,
                                const TrainConfig& cfg) {
  if (!buffers.rgb.same_dims(frame.image))
    throw std::runtime_error("total_objective: buffers do not match the frame");
  ObjectiveResult res;
  SsimOptions sopt{cfg.ssim_window, 1.5};
  res.rgb = loss_rgb(buffers.rgb, frame.image, sopt, &res.upstream.d_rgb);

  ImageF d_acc;
  if (frame.is_synthetic) {
    res.opacity = loss_opacity_soft(buffers.acc_opacity, frame.soft_mask, &d_acc);
  } else {
    res.opacity = loss_opacity(buffers.acc_opacity, frame.mask, &d_acc);
    Image<Vec3> d_nrm;
    res.normal = loss_normal(buffers.normal, frame.normal_map, frame.mask, &d_nrm);
    if (d_nrm.width && cfg.lambda_normal > 0) {
      res.upstream.d_normal = std::move(d_nrm);
      for (Vec3& g : res.upstream.d_normal.data) g *= cfg.lambda_normal;
    }
  }
  if (cfg.lambda_opacity > 0) {
    res.upstream.d_acc_opacity = std::move(d_acc);
    for (double& g : res.upstream.d_acc_opacity.data) g *= cfg.lambda_opacity;
  }
  res.total = res.rgb + cfg.lambda_opacity * res.opacity + cfg.lambda_normal * res.normal;
  return res;
}

TrainingFrame make_synthetic_frame(const SplatList& splats, const Camera& camera,
                                   const std::shared_ptr<const PrefilteredEnv>& env,
                                   int env_id, uint64_t seed, const RefineHook& hook) {
  RenderOptions ropt;
  ropt.background = BackgroundMode::kBlack;
  FrameBuffers fb = render(splats, camera, *env, ropt);
  TrainingFrame frame;
  frame.image = std::move(fb.rgb);
  frame.soft_mask = std::move(fb.acc_opacity);
  frame.camera = camera;
  frame.env_override = env;
  frame.env_id = env_id;
  frame.is_synthetic = true;
  if (hook) {
    if (auto refined = hook(camera, env_id, seed)) {
      if (!refined->same_dims(frame.image))
        throw std::runtime_error("refine hook returned mismatched resolution");
      frame.image = std::move(*refined);
    }
  }
  return frame;
}

namespace {

struct AdamState {
  // Per-splat layout: mu 3, rot 3, log_sx, log_sy, opacity_logit,
  // albedo_logit 3, rough_logit, metal_logit = 14.
  static constexpr int kPerSplat = 14;
  std::vector<double> m, v;
  double m_env = 0, v_env = 0;
  int64_t step = 0;

  void resize(size_t n_splats) {
    m.resize(n_splats * kPerSplat, 0.0);
    v.resize(n_splats * kPerSplat, 0.0);
  }
};

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

double adam_step(double& m, double& v, double grad, double lr, double bc1, double bc2) {
  m = kBeta1 * m + (1 - kBeta1) * grad;
  v = kBeta2 * v + (1 - kBeta2) * grad * grad;
  return -lr * (m / bc1) / (std::sqrt(v / bc2) + kEps);
}

Quat exp_quat(const Vec3& delta) {
  double angle = delta.norm();
  if (angle < 1e-12) return Quat(1, 0.5 * delta.x(), 0.5 * delta.y(), 0.5 * delta.z());
  Vec3 axis = delta / angle;
  double s = std::sin(angle / 2);
  return Quat(std::cos(angle / 2), s * axis.x(), s * axis.y(), s * axis.z());
}

Camera sample_novel_camera(const Camera& ref, const Vec3& target, double radius,
                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double az = uni(rng) * 2.0 * std::numbers::pi;
  double el = (-10.0 + 50.0 * uni(rng)) * std::numbers::pi / 180.0;
  Vec3 pos = target + radius * Vec3(std::cos(el) * std::cos(az),
                                    std::cos(el) * std::sin(az), std::sin(el));
  // look-at: +z toward the target, world +z as the up hint
  Vec3 fwd = (target - pos).normalized();
  Vec3 right = fwd.cross(Vec3::UnitZ()).normalized();
  if (!right.allFinite() || right.norm() < 0.5) right = Vec3::UnitX();
  Vec3 down = fwd.cross(right);
  Mat3 r_c2w;
  r_c2w.col(0) = right;
  r_c2w.col(1) = down;
  r_c2w.col(2) = fwd;
  Camera cam = ref;
  RigidSim3 c2w;
  c2w.rotation = Quat(r_c2w).normalized();
  c2w.translation = pos;
  cam.pose = c2w.inverse();
  return cam;
}

}  // namespace

OptimizeResult optimize(const std::vector<TrainingFrame>& frames,
                        const SplatList& init_splats, const EnvironmentMap& env_init,
                        const std::vector<EnvironmentMap>& env_pool,
                        const TrainConfig& cfg, const RefineHook& hook) {
  cfg.validate();
  std::vector<const TrainingFrame*> real;
  for (const TrainingFrame& f : frames)
    if (!f.is_synthetic) real.push_back(&f);
  if (real.empty()) throw std::runtime_error("optimize: at least one real frame required");

  auto scene_env = std::make_shared<PrefilteredEnv>(prefilter(env_init));
  std::vector<std::shared_ptr<const PrefilteredEnv>> pool_envs;
  for (const EnvironmentMap& e : env_pool)
    pool_envs.push_back(std::make_shared<PrefilteredEnv>(prefilter(e)));

  SplatList splats = init_splats;
  double log_env_scale = 0.0;
  AdamState adam;
  adam.resize(splats.size());
  std::vector<double> grad_accum(splats.size(), 0.0);
  std::vector<int> grad_count(splats.size(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Scene statistics for novel-view sampling.
  Vec3 centroid = Vec3::Zero();
  for (const Splat2D& s : splats) centroid += s.mu;
  if (!splats.empty()) centroid /= static_cast<double>(splats.size());
  double mean_dist = 0;
  for (const TrainingFrame* f : real) mean_dist += (f->camera.position() - centroid).norm();
  mean_dist /= static_cast<double>(real.size());

  std::vector<TrainingFrame> synth_frames;
  OptimizeResult result;
  RenderOptions ropt;
  ropt.background = BackgroundMode::kBlack;
  ropt.threads = cfg.threads;

  // Material/scale parameters live as logits/logs; gradients from backward are
  // w.r.t. the raw values and get chained here.
  auto to_logits = [&](const Splat2D& s, double* p) {
    p[0] = logit(s.material.albedo.x());
    p[1] = logit(s.material.albedo.y());
    p[2] = logit(s.material.albedo.z());
    p[3] = logit(s.material.roughness);
    p[4] = logit(s.material.metallic);
  };
  std::vector<std::array<double, 5>> logits(splats.size());
  for (size_t i = 0; i < splats.size(); ++i) to_logits(splats[i], logits[i].data());

  bool synth_active_any = !pool_envs.empty() && cfg.synth_extra > 0;

  for (int it = 0; it < cfg.iters_total; ++it) {
    bool in_synth_phase = synth_active_any && it >= cfg.synth_start &&
                          it < cfg.synth_start + cfg.synth_extra;
    if (in_synth_phase && (it - cfg.synth_start) % cfg.synth_refresh == 0) {
      synth_frames.clear();
      for (int k = 0; k < cfg.synth_pool; ++k) {
        uint64_t fseed = rng();
        Camera cam = sample_novel_camera(real[0]->camera, centroid, mean_dist, rng);
        int env_id = static_cast<int>(rng() % pool_envs.size());
        synth_frames.push_back(
            make_synthetic_frame(splats, cam, pool_envs[env_id], env_id, fseed, hook));
      }
    }
    bool use_synth = in_synth_phase && !synth_frames.empty() &&
                     ((it - cfg.synth_start) % 2 == 1);
    const TrainingFrame* frame;
    if (use_synth)
      frame = &synth_frames[rng() % synth_frames.size()];
    else
      frame = real[rng() % real.size()];

    const PrefilteredEnv& env = frame->env_override ? *frame->env_override : *scene_env;
    RenderOptions iter_opt = ropt;
    iter_opt.env_scale = frame->env_override ? 1.0 : std::exp(log_env_scale);
    FrameBuffers fb = render(splats, frame->camera, env, iter_opt);
    ObjectiveResult obj = total_objective(*frame, fb, cfg);
    if (!std::isfinite(obj.total))
      throw DivergenceError("optimize: loss became non-finite at iteration " +
                            std::to_string(it));
    result.loss_history.push_back(obj.total);

    ParamGradients grads = backward(splats, frame->camera, env, obj.upstream, iter_opt);

    adam.step++;
    double bc1 = 1 - std::pow(kBeta1, adam.step);
    double bc2 = 1 - std::pow(kBeta2, adam.step);
    for (size_t i = 0; i < splats.size(); ++i) {
      Splat2D& s = splats[i];
      const SplatGrad& g = grads.splats[i];
      double* m = &adam.m[i * AdamState::kPerSplat];
      double* v = &adam.v[i * AdamState::kPerSplat];
      for (int d = 0; d < 3; ++d)
        s.mu[d] += adam_step(m[d], v[d], g.d_mu[d], cfg.lr_mu, bc1, bc2);
      Vec3 drot;
      for (int d = 0; d < 3; ++d)
        drot[d] = adam_step(m[3 + d], v[3 + d], g.d_rot[d], cfg.lr_rot, bc1, bc2);
      s.rot = (s.rot * exp_quat(drot)).normalized();
      s.sx *= std::exp(adam_step(m[6], v[6], g.d_sx * s.sx, cfg.lr_scale, bc1, bc2));
      s.sy *= std::exp(adam_step(m[7], v[7], g.d_sy * s.sy, cfg.lr_scale, bc1, bc2));
      s.opacity_logit +=
          adam_step(m[8], v[8], g.d_opacity_logit, cfg.lr_opacity, bc1, bc2);
      double* lg = logits[i].data();
      for (int d = 0; d < 3; ++d) {
        double a = sigmoid(lg[d]);
        lg[d] += adam_step(m[9 + d], v[9 + d], g.d_albedo[d] * a * (1 - a),
                           cfg.lr_material, bc1, bc2);
        s.material.albedo[d] = sigmoid(lg[d]);
      }
      double r = sigmoid(lg[3]);
      lg[3] += adam_step(m[12], v[12], g.d_roughness * r * (1 - r), cfg.lr_material, bc1, bc2);
      s.material.roughness = sigmoid(lg[3]);
      double mt = sigmoid(lg[4]);
      lg[4] += adam_step(m[13], v[13], g.d_metallic * mt * (1 - mt), cfg.lr_material, bc1, bc2);
      s.material.metallic = sigmoid(lg[4]);
      grad_accum[i] += g.d_mu.norm();
      grad_count[i] += 1;
    }
    if (!frame->env_override) {
      double g_env = grads.d_env_scale * std::exp(log_env_scale);
      log_env_scale += adam_step(adam.m_env, adam.v_env, g_env, cfg.lr_env_scale, bc1, bc2);
    }

    // Densify / prune on a fixed cadence.
    if (cfg.densify_interval > 0 && it > 0 && it % cfg.densify_interval == 0 &&
        it < cfg.densify_until) {
      SplatList next;
      std::vector<std::array<double, 5>> next_logits;
      std::vector<double> next_m, next_v;
      auto push = [&](const Splat2D& s, const std::array<double, 5>& lg, const double* m,
                      const double* v) {
        next.push_back(s);
        next_logits.push_back(lg);
        if (m) {
          next_m.insert(next_m.end(), m, m + AdamState::kPerSplat);
          next_v.insert(next_v.end(), v, v + AdamState::kPerSplat);
        } else {
          next_m.insert(next_m.end(), AdamState::kPerSplat, 0.0);
          next_v.insert(next_v.end(), AdamState::kPerSplat, 0.0);
        }
      };
      double scene_extent = 0;
      for (const Splat2D& s : splats)
        scene_extent = std::max(scene_extent, (s.mu - centroid).norm());
      for (size_t i = 0; i < splats.size(); ++i) {
        const Splat2D& s = splats[i];
        if (s.opacity() < cfg.prune_opacity) continue;  // prune
        double avg = grad_count[i] ? grad_accum[i] / grad_count[i] : 0.0;
        const double* m = &adam.m[i * AdamState::kPerSplat];
        const double* v = &adam.v[i * AdamState::kPerSplat];
        if (avg > cfg.densify_grad_thresh) {
          if (std::max(s.sx, s.sy) > 0.05 * scene_extent) {
            // split: two smaller copies offset along the dominant tangent axis
            Splat2D a = s, b = s;
            Vec3 axis = s.sx >= s.sy ? s.tangent_x() : s.tangent_y();
            double off = 0.5 * std::max(s.sx, s.sy);
            a.mu += off * axis;
            b.mu -= off * axis;
            a.sx /= 1.6; a.sy /= 1.6; b.sx /= 1.6; b.sy /= 1.6;
            push(a, logits[i], nullptr, nullptr);
            push(b, logits[i], nullptr, nullptr);
          } else {
            push(s, logits[i], m, v);  // clone: keep one with state,
            Splat2D c = s;
            c.mu += 0.01 * std::max(s.sx, s.sy) *
                    Vec3(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5);
            push(c, logits[i], nullptr, nullptr);
          }
        } else {
          push(s, logits[i], m, v);
        }
      }
      if (!next.empty()) {
        splats = std::move(next);
        logits = std::move(next_logits);
        adam.m = std::move(next_m);
        adam.v = std::move(next_v);
      }
      grad_accum.assign(splats.size(), 0.0);
      grad_count.assign(splats.size(), 0);
      // stale synthetic frames regenerate at the next refresh tick
    }
  }

  result.splats = std::move(splats);
  result.env_scale = std::exp(log_env_scale);
  ImageRGB scaled = env_init.pixels;
  for (Vec3& p : scaled.data) p *= result.env_scale;
  result.fitted_env = EnvironmentMap(std::move(scaled));
  return result;
}

}  // namespace resplat
