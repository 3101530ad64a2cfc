#pragma once

#include <map>

#include "resplat/asset.hpp"
#include "resplat/rasterizer.hpp"

namespace resplat {

// Rotation from canonical to target box axes, geometric-mean extent scale,
// center-to-center translation.
RigidSim3 align_box(const CarAsset& asset, const OrientedBox3& target);

struct IcpOptions {
  int max_iters = 50;
  double tol = 1e-6;       // meters, RMS change
  double trim = 0.2;       // worst-pair fraction dropped each iteration
};

struct IcpResult {
  RigidSim3 transform;
  double rms = 0;          // trimmed RMS at the returned transform
  bool converged = false;
};

// Point-to-point ICP with a per-iteration Umeyama similarity solve and
// trimmed correspondences. Never returns a worse iterate than it accepted.
IcpResult icp_refine(const PointCloud& asset_points, const PointCloud& lidar,
                     const RigidSim3& init, const IcpOptions& opts = {});

// argmin_s sum mask * |s*rendered - reference|^2, closed form over linear RGB.
double fit_env_scale(const ImageRGB& rendered, const ImageRGB& reference,
                     const ImageU8* mask = nullptr);

struct ShadowOptions {
  double opacity = 0.6;
  double margin = 0.1;  // meters added around the footprint
  int grid_half_x = 7;
  int grid_half_y = 4;
};

// Black semi-transparent splat disk under the wheels, transformed by the
// placement.
SplatList make_shadow(const CarAsset& asset, const RigidSim3& placement,
                      const ShadowOptions& opts = {});

// Applies a similarity transform to every splat (position, orientation and
// tangent scales).
SplatList instantiate(const SplatList& splats, const RigidSim3& t);

struct PlacedAsset {
  CarAsset asset;
  std::map<int64_t, RigidSim3> placements;  // frame index -> world transform
  bool shadow = true;
  ShadowOptions shadow_opts;
};

struct SceneGraph {
  SplatList background;
  std::vector<PlacedAsset> assets;
  EnvironmentMap env;
  double env_scale = 1.0;
  std::vector<Camera> cameras;
};

// Instantiates every asset at frame_index, appends shadows and background and
// renders once under the scaled environment.
FrameBuffers compose(const SceneGraph& scene, const PrefilteredEnv& pre_env,
                     int64_t frame_index, const Camera& camera,
                     const RenderOptions& base_opts = {});

}  // namespace resplat
