#pragma once

#include <vector>

#include "resplat/image.hpp"

namespace resplat {

// Distant illumination as an equirectangular radiance map, width = 2*height.
// Mapping: u = (atan2(d.y, d.x) + pi) / (2 pi), v = acos(d.z) / pi,
// row 0 is the +z pole. All radiance linear RGB, nonnegative.
struct EnvironmentMap {
  ImageRGB pixels;

  EnvironmentMap() = default;
  explicit EnvironmentMap(ImageRGB img);

  int width() const { return pixels.width; }
  int height() const { return pixels.height; }

  Vec3 sample_nearest(const Vec3& dir) const;
  Vec3 sample_bilinear(const Vec3& dir) const;
};

EnvironmentMap read_env_pfm(const std::string& path);
void write_env_pfm(const std::string& path, const EnvironmentMap& env);

Vec2 dir_to_uv(const Vec3& dir);
Vec3 uv_to_dir(const Vec2& uv);
Vec3 texel_dir(int x, int y, int w, int h);
double texel_solid_angle(int y, int w, int h);

// Bilinear fetch with wrap in u, clamp in v; optional derivative of each
// channel w.r.t. the (unit) direction.
Vec3 sample_equirect(const ImageRGB& img, const Vec3& dir, Mat3* d_dir = nullptr);

struct PrefilterOptions {
  int n_mips = 6;
  int lut_res = 64;
  int spec_samples = 512;
  int lut_samples = 512;
  int diffuse_res = 32;  // height of the irradiance level
};

// Split-sum tables: GGX-filtered specular chain (level k at roughness
// k/(n_mips-1), level 0 the source), cosine-convolved irradiance already
// divided by pi, and the environment-independent (scale, bias) Fresnel LUT
// over (cos_theta, roughness).
struct PrefilteredEnv {
  std::vector<ImageRGB> specular_mips;
  ImageRGB diffuse_irradiance;
  Image<Vec2> brdf_lut;
  int n_mips = 0;

  // Trilinear specular fetch at continuous roughness; optional derivatives
  // w.r.t. direction and roughness.
  Vec3 sample_specular(const Vec3& dir, double roughness, Mat3* d_dir = nullptr,
                       Vec3* d_rough = nullptr) const;
  Vec3 sample_diffuse(const Vec3& normal, Mat3* d_normal = nullptr) const;
  Vec2 lut_lookup(double cos_theta, double roughness, Vec2* d_cos = nullptr,
                  Vec2* d_rough = nullptr) const;
};

PrefilteredEnv prefilter(const EnvironmentMap& env, const PrefilterOptions& opt = {});

}  // namespace resplat
