#pragma once

#include <cmath>
#include <random>

#include "resplat/rasterizer.hpp"

namespace resplat::testutil {

// Smooth low-frequency environment; analytic so Monte-Carlo references can
// integrate it without texture-resolution bias.
inline EnvironmentMap smooth_env(int height, const Vec3& base, const Vec3& tint) {
  ImageRGB img(2 * height, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < 2 * height; ++x) {
      Vec3 d = texel_dir(x, y, 2 * height, height);
      img.at(x, y) = base + tint * (0.5 + 0.5 * d.z()) +
                     Vec3(0.1, 0.05, 0.02) * (0.5 + 0.5 * d.x());
    }
  return EnvironmentMap(std::move(img));
}

inline EnvironmentMap constant_env(int height, const Vec3& radiance) {
  return EnvironmentMap(ImageRGB(2 * height, height, radiance));
}

inline Material random_material(std::mt19937_64& rng, double min_rough = 0.05) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Material m;
  m.albedo = Vec3(0.05 + 0.9 * uni(rng), 0.05 + 0.9 * uni(rng), 0.05 + 0.9 * uni(rng));
  m.roughness = min_rough + (1.0 - min_rough) * uni(rng);
  m.metallic = uni(rng);
  return m;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Camera on a ring around the origin, looking at `target`.
inline Camera look_at_camera(const Vec3& pos, const Vec3& target, int w, int h,
                             double focal, int id = 0) {
  Vec3 fwd = (target - pos).normalized();
  Vec3 right = fwd.cross(Vec3::UnitZ());
  if (right.norm() < 1e-6) right = Vec3::UnitX();
  right.normalize();
  Vec3 down = fwd.cross(right);
  Mat3 c2w;
  c2w.col(0) = right;
  c2w.col(1) = down;
  c2w.col(2) = fwd;
  Camera cam;
  cam.id = id;
  cam.fx = cam.fy = focal;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  RigidSim3 pose;
  pose.rotation = Quat(c2w).normalized();
  pose.translation = pos;
  cam.pose = pose.inverse();
  return cam;
}

inline Splat2D random_splat(std::mt19937_64& rng, double extent = 0.6,
                            double scale = 0.25) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Splat2D s;
  s.mu = extent * Vec3(2 * uni(rng) - 1, 2 * uni(rng) - 1, 2 * uni(rng) - 1);
  Vec3 axis = random_unit(rng);
  s.rot = Quat(Eigen::AngleAxisd(uni(rng) * 3.0, axis)).normalized();
  s.sx = scale * (0.5 + uni(rng));
  s.sy = scale * (0.5 + uni(rng));
  s.opacity_logit = logit(0.3 + 0.6 * uni(rng));
  s.material = random_material(rng, 0.2);
  s.material.metallic *= 0.8;
  return s;
}

inline SplatList random_scene(std::mt19937_64& rng, int count) {
  SplatList splats;
  for (int i = 0; i < count; ++i) splats.push_back(random_splat(rng));
  return splats;
}

// Deterministic "car": an elongated box shell of splats, distinct front/back.
inline SplatList toy_car(int per_face, uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SplatList splats;
  Vec3 half(1.0, 0.45, 0.35);
  struct Face {
    int axis;
    double sign;
  };
  const Face faces[] = {{0, 1}, {0, -1}, {1, 1}, {1, -1}, {2, 1}, {2, -1}};
  for (const Face& f : faces) {
    for (int i = 0; i < per_face; ++i) {
      Splat2D s;
      Vec3 p;
      for (int d = 0; d < 3; ++d) p[d] = (2 * uni(rng) - 1) * half[d];
      p[f.axis] = f.sign * half[f.axis];
      s.mu = p;
      Vec3 n = Vec3::Zero();
      n[f.axis] = f.sign;
      // rotation taking +z to the face normal
      s.rot = Quat::FromTwoVectors(Vec3::UnitZ(), n).normalized();
      s.sx = s.sy = 0.28;
      s.opacity_logit = logit(0.85);
      s.material.albedo = Vec3(0.2 + 0.6 * uni(rng), 0.3, 0.7 - 0.5 * uni(rng));
      s.material.roughness = 0.4 + 0.4 * uni(rng);
      s.material.metallic = 0.2 * uni(rng);
      splats.push_back(s);
    }
  }
  return splats;
}

// Maps the 14 per-splat degrees of freedom to a perturbation for finite
// differencing; matches the gradient layout of SplatGrad.
inline void perturb_splat(Splat2D& s, int dof, double h) {
  switch (dof) {
    case 0: case 1: case 2: s.mu[dof] += h; break;
    case 3: case 4: case 5: {
      Vec3 axis = Vec3::Zero();
      axis[dof - 3] = 1.0;
      s.rot = (s.rot * Quat(Eigen::AngleAxisd(h, axis))).normalized();
      break;
    }
    case 6: s.sx += h; break;
    case 7: s.sy += h; break;
    case 8: s.opacity_logit += h; break;
    case 9: case 10: case 11: s.material.albedo[dof - 9] += h; break;
    case 12: s.material.roughness += h; break;
    case 13: s.material.metallic += h; break;
    default: throw std::logic_error("bad dof");
  }
}

inline double splat_grad_component(const SplatGrad& g, int dof) {
  switch (dof) {
    case 0: case 1: case 2: return g.d_mu[dof];
    case 3: case 4: case 5: return g.d_rot[dof - 3];
    case 6: return g.d_sx;
    case 7: return g.d_sy;
    case 8: return g.d_opacity_logit;
    case 9: case 10: case 11: return g.d_albedo[dof - 9];
    case 12: return g.d_roughness;
    case 13: return g.d_metallic;
    default: throw std::logic_error("bad dof");
  }
}

inline bool grad_close(double analytic, double fd, double rel_tol = 1e-2,
                       double abs_tol = 1e-5) {
  double scale = std::max(std::abs(analytic), std::abs(fd));
  return std::abs(analytic - fd) <= rel_tol * scale + abs_tol;
}

}  // namespace resplat::testutil
