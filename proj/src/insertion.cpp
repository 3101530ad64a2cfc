#include "resplat/insertion.hpp"

#include <algorithm>
#include <cmath>

namespace resplat {

RigidSim3 align_box(const CarAsset& asset, const OrientedBox3& target) {
  const OrientedBox3& canon = asset.canonical_box;
  if (target.half_extents.minCoeff() <= 0 || canon.half_extents.minCoeff() <= 0)
    throw std::runtime_error("align_box: degenerate box extents");
  RigidSim3 t;
  t.rotation = (target.rotation * canon.rotation.conjugate()).normalized();
  Vec3 ratios = target.half_extents.cwiseQuotient(canon.half_extents);
  t.scale = std::cbrt(ratios.x() * ratios.y() * ratios.z());
  t.translation = target.center - t.scale * (t.rotation * canon.center);
  return t;
}

namespace {

// Trimmed nearest-neighbor correspondences of the transformed source against
// the target cloud.
struct Corr {
  std::vector<Vec3> src, dst;
  double rms = 0;
};

Corr correspondences(const PointCloud& src, const PointCloud& dst, const RigidSim3& t,
                     double trim) {
  struct Pair {
    double d2;
    int i, j;
  };
  std::vector<Pair> pairs;
  pairs.reserve(src.points.size());
  for (size_t i = 0; i < src.points.size(); ++i) {
    Vec3 p = t.apply(src.points[i]);
    double best = std::numeric_limits<double>::max();
    int bj = 0;
    for (size_t j = 0; j < dst.points.size(); ++j) {
      double d2 = (dst.points[j] - p).squaredNorm();
      if (d2 < best) {
        best = d2;
        bj = static_cast<int>(j);
      }
    }
    pairs.push_back({best, static_cast<int>(i), bj});
  }
  size_t keep = std::max<size_t>(1, static_cast<size_t>(
                                        std::ceil((1.0 - trim) * pairs.size())));
  std::nth_element(pairs.begin(), pairs.begin() + (keep - 1), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.d2 < b.d2; });
  pairs.resize(keep);
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.i < b.i; });
  Corr c;
  double sum = 0;
  for (const Pair& p : pairs) {
    c.src.push_back(src.points[p.i]);
    c.dst.push_back(dst.points[p.j]);
    sum += p.d2;
  }
  c.rms = std::sqrt(sum / pairs.size());
  return c;
}

RigidSim3 umeyama_fit(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                      const RigidSim3& fallback) {
  if (src.size() < 3) {
    // Underdetermined: translation-only update, scale and rotation pinned.
    Vec3 ms = Vec3::Zero(), md = Vec3::Zero();
    for (const Vec3& p : src) ms += fallback.apply(p);
    for (const Vec3& p : dst) md += p;
    ms /= static_cast<double>(src.size());
    md /= static_cast<double>(src.size());
    RigidSim3 t = fallback;
    t.translation += md - ms;
    return t;
  }
  Eigen::Matrix3Xd s(3, src.size()), d(3, dst.size());
  for (size_t i = 0; i < src.size(); ++i) {
    s.col(static_cast<Eigen::Index>(i)) = src[i];
    d.col(static_cast<Eigen::Index>(i)) = dst[i];
  }
  Eigen::Matrix4d m = Eigen::umeyama(s, d, true);
  RigidSim3 t;
  Mat3 sr = m.topLeftCorner<3, 3>();
  t.scale = std::cbrt(sr.determinant());
  t.rotation = Quat(Mat3(sr / t.scale)).normalized();
  t.translation = m.topRightCorner<3, 1>();
  return t;
}

}  // namespace

IcpResult icp_refine(const PointCloud& asset_points, const PointCloud& lidar,
                     const RigidSim3& init, const IcpOptions& opts) {
  if (asset_points.points.empty() || lidar.points.empty())
    throw std::runtime_error("icp_refine: empty point cloud");
  if (!init.translation.allFinite() || !std::isfinite(init.scale))
    throw std::runtime_error("icp_refine: non-finite init");

  IcpResult best;
  best.transform = init;
  best.rms = correspondences(asset_points, lidar, init, opts.trim).rms;
  RigidSim3 current = init;
  for (int it = 0; it < opts.max_iters; ++it) {
    Corr c = correspondences(asset_points, lidar, current, opts.trim);
    RigidSim3 candidate = umeyama_fit(c.src, c.dst, current);
    double rms = correspondences(asset_points, lidar, candidate, opts.trim).rms;
    if (rms < best.rms) {
      double improvement = best.rms - rms;
      best.rms = rms;
      best.transform = candidate;
      current = candidate;
      if (improvement < opts.tol) {
        best.converged = true;
        break;
      }
    } else {
      best.converged = best.rms <= opts.tol || it > 0;
      break;
    }
  }
  return best;
}

double fit_env_scale(const ImageRGB& rendered, const ImageRGB& reference,
                     const ImageU8* mask) {
  if (!rendered.same_dims(reference))
    throw std::runtime_error("fit_env_scale: dimension mismatch");
  if (mask && (mask->width != rendered.width || mask->height != rendered.height))
    throw std::runtime_error("fit_env_scale: mask dimension mismatch");
  double num = 0, den = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (mask && !mask->data[i]) continue;
    num += rendered.data[i].dot(reference.data[i]);
    den += rendered.data[i].squaredNorm();
  }
  if (den <= 0) throw std::runtime_error("fit_env_scale: rendered image has zero energy");
  return num / den;
}

SplatList make_shadow(const CarAsset& asset, const RigidSim3& placement,
                      const ShadowOptions& opts) {
  if (opts.opacity <= 0 || opts.opacity >= 1)
    throw std::runtime_error("make_shadow: opacity must be in (0,1)");
  double a = asset.canonical_box.half_extents.x() + opts.margin / std::max(placement.scale, 1e-9);
  double b = asset.canonical_box.half_extents.y() + opts.margin / std::max(placement.scale, 1e-9);
  double cx = asset.canonical_box.center.x();
  double cy = asset.canonical_box.center.y();
  double dx = a / opts.grid_half_x;
  double dy = b / opts.grid_half_y;
  SplatList shadow;
  for (int iy = -opts.grid_half_y; iy <= opts.grid_half_y; ++iy) {
    for (int ix = -opts.grid_half_x; ix <= opts.grid_half_x; ++ix) {
      double x = ix * dx, y = iy * dy;
      if ((x / a) * (x / a) + (y / b) * (y / b) > 1.0) continue;
      Splat2D s;
      s.mu = Vec3(cx + x, cy + y, asset.wheel_line_z);
      s.rot = Quat(1, 0, 0, 0);  // normal +z (up) in the canonical frame
      s.sx = dx;
      s.sy = dy;
      s.opacity_logit = logit(opts.opacity);
      s.material.albedo = Vec3::Zero();
      s.material.roughness = 1.0;
      s.material.metallic = 0.0;
      shadow.push_back(s);
    }
  }
  return instantiate(shadow, placement);
}

SplatList instantiate(const SplatList& splats, const RigidSim3& t) {
  SplatList out;
  out.reserve(splats.size());
  for (const Splat2D& s : splats) {
    Splat2D o = s;
    o.mu = t.apply(s.mu);
    o.rot = (t.rotation * s.rot).normalized();
    o.sx = s.sx * t.scale;
    o.sy = s.sy * t.scale;
    out.push_back(o);
  }
  return out;
}

FrameBuffers compose(const SceneGraph& scene, const PrefilteredEnv& pre_env,
                     int64_t frame_index, const Camera& camera,
                     const RenderOptions& base_opts) {
  SplatList all = scene.background;
  for (const PlacedAsset& pa : scene.assets) {
    auto it = pa.placements.find(frame_index);
    if (it == pa.placements.end())
      throw std::runtime_error("compose: no track entry for frame " +
                               std::to_string(frame_index));
    SplatList placed = instantiate(pa.asset.splats, it->second);
    all.insert(all.end(), placed.begin(), placed.end());
    if (pa.shadow) {
      SplatList sh = make_shadow(pa.asset, it->second, pa.shadow_opts);
      all.insert(all.end(), sh.begin(), sh.end());
    }
  }
  RenderOptions opts = base_opts;
  opts.env_scale = scene.env_scale;
  return render(all, camera, pre_env, opts);
}

}  // namespace resplat
