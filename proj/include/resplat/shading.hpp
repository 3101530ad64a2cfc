#pragma once

#include "resplat/env.hpp"

namespace resplat {

struct Material {
  Vec3 albedo{0.5, 0.5, 0.5};  // linear RGB, [0,1]
  double roughness = 0.5;      // [0,1]
  double metallic = 0.0;       // [0,1]

  Material clamped() const {
    Material m;
    m.albedo = albedo.cwiseMax(0.0).cwiseMin(1.0);
    m.roughness = std::clamp(roughness, 0.0, 1.0);
    m.metallic = std::clamp(metallic, 0.0, 1.0);
    return m;
  }
  Vec3 f0() const { return Vec3::Constant(0.04) * (1.0 - metallic) + metallic * albedo; }
};

// GGX/Smith/Schlick pieces, exposed for importance-sampled estimators.
double ggx_d(double noh, double alpha);
double smith_g2(double nol, double nov, double alpha);
Vec3 schlick(const Vec3& f0, double cos_theta);
Vec3 sample_cosine(const Vec3& n, const Vec2& xi);
double pdf_cosine(const Vec3& n, const Vec3& wi);
Vec3 sample_ggx_half(const Vec3& n, double alpha, const Vec2& xi);
double pdf_ggx_reflect(const Vec3& n, const Vec3& wo, const Vec3& wi, double alpha);

// Cook-Torrance BSDF: Fresnel-attenuated Lambert diffuse plus GGX specular
// with height-correlated Smith shadowing. Throws when wi or wo is below the
// surface.
Vec3 brdf_eval(const Material& mat, const Vec3& n, const Vec3& wi, const Vec3& wo);

// Cosine-weighted Monte-Carlo estimate of the hemisphere lighting integral.
// Deterministic for a fixed seed.
Vec3 mc_radiance(const Material& mat, const Vec3& n, const Vec3& wo,
                 const EnvironmentMap& env, int samples, uint64_t seed);

struct ShadeGrad {
  Vec3 d_albedo = Vec3::Zero();     // d out_i / d albedo_i (diagonal)
  Vec3 d_roughness = Vec3::Zero();  // d out_i / d r
  Vec3 d_metallic = Vec3::Zero();   // d out_i / d m
  Mat3 d_normal = Mat3::Zero();     // d out_i / d n_j
};

// Split-sum shading: diffuse irradiance + prefiltered specular with the
// Fresnel scale/bias LUT. n, wo unit; n.wo clamped at 1e-4.
Vec3 shade(const Material& mat, const Vec3& n, const Vec3& wo,
           const PrefilteredEnv& pre_env, ShadeGrad* grad = nullptr);

}  // namespace resplat
