#pragma once

#include <optional>

#include "resplat/splat.hpp"

namespace resplat {

struct FrameBuffers {
  ImageRGB rgb;
  ImageF acc_opacity;       // 1 - transmittance after all splats
  Image<Vec3> normal;       // camera frame, alpha-composited
  ImageF depth;             // alpha-weighted ray depth, meters

  FrameBuffers() = default;
  FrameBuffers(int w, int h)
      : rgb(w, h, Vec3::Zero()),
        acc_opacity(w, h, 0.0),
        normal(w, h, Vec3::Zero()),
        depth(w, h, 0.0) {}
};

struct SplatGrad {
  Vec3 d_mu = Vec3::Zero();
  Vec3 d_rot = Vec3::Zero();  // right tangent space of the quaternion
  double d_sx = 0, d_sy = 0, d_opacity_logit = 0;
  Vec3 d_albedo = Vec3::Zero();
  double d_roughness = 0, d_metallic = 0;
};

struct ParamGradients {
  std::vector<SplatGrad> splats;
  double d_env_scale = 0;
};

enum class BackgroundMode { kBlack, kEnvLookup };

struct RenderOptions {
  BackgroundMode background = BackgroundMode::kBlack;
  double env_scale = 1.0;
  int threads = 1;
  double weight_cutoff = 1.0 / 255.0;
};

// Upstream d(loss)/d(buffer); empty images are treated as zero.
struct UpstreamGrads {
  ImageRGB d_rgb;
  ImageF d_acc_opacity;
  Image<Vec3> d_normal;
  ImageF d_depth;
};

struct SplatHit {
  double u, v;     // plane coordinates in units of (sx, sy)
  double depth;    // ray parameter, meters
  double weight;   // exp(-(u^2+v^2)/2)
};

// Ray-plane intersection in the splat's tangent frame; Miss when the ray is
// parallel to the plane (|dir.n| < 1e-8) or the hit lies behind the origin.
std::optional<SplatHit> ray_splat_intersect(const Splat2D& splat, const Vec3& origin,
                                            const Vec3& dir);

FrameBuffers render(const SplatList& splats, const Camera& camera,
                    const PrefilteredEnv& pre_env, const RenderOptions& opts = {});

ParamGradients backward(const SplatList& splats, const Camera& camera,
                        const PrefilteredEnv& pre_env, const UpstreamGrads& upstream,
                        const RenderOptions& opts = {});

}  // namespace resplat
