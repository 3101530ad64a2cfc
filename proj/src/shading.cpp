#include "resplat/shading.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace resplat {

namespace {
constexpr double kPi = std::numbers::pi;

void onb(const Vec3& n, Vec3& t, Vec3& b) {
  t = std::abs(n.z()) < 0.999 ? Vec3(0, 0, 1).cross(n).normalized()
                              : Vec3(1, 0, 0).cross(n).normalized();
  b = n.cross(t);
}

// Non-throwing core shared by brdf_eval and mc_radiance.
Vec3 brdf_core(const Material& mat, const Vec3& n, const Vec3& wi, const Vec3& wo) {
  double nol = n.dot(wi), nov = n.dot(wo);
  if (nol <= 0 || nov <= 0) return Vec3::Zero();
  Vec3 h = (wi + wo).normalized();
  double noh = std::max(n.dot(h), 0.0);
  double voh = std::max(wo.dot(h), 0.0);
  double alpha = std::max(mat.roughness * mat.roughness, 1e-4);
  double d = ggx_d(noh, alpha);
  double g = smith_g2(nol, nov, alpha);
  Vec3 f0 = mat.f0();
  Vec3 f = schlick(f0, voh);
  Vec3 specular = f * (d * g / std::max(4.0 * nol * nov, 1e-9));
  // coupled diffuse: reciprocal and keeps the white furnace under 1 even at
  // grazing incidence, where a plain (1 - F(voh)) factor over-shoots
  Vec3 kd = (Vec3::Ones() - schlick(f0, nol)).cwiseProduct(Vec3::Ones() - schlick(f0, nov));
  Vec3 diffuse = kd.cwiseProduct(mat.albedo) * ((1.0 - mat.metallic) / kPi);
  return diffuse + specular;
}

}  // namespace

double ggx_d(double noh, double alpha) {
  double a2 = alpha * alpha;
  double t = noh * noh * (a2 - 1.0) + 1.0;
  return a2 / (kPi * t * t);
}

double smith_g2(double nol, double nov, double alpha) {
  double a2 = alpha * alpha;
  double gl = nov * std::sqrt(a2 + (1.0 - a2) * nol * nol);
  double gv = nol * std::sqrt(a2 + (1.0 - a2) * nov * nov);
  return 2.0 * nol * nov / std::max(gl + gv, 1e-12);
}

Vec3 schlick(const Vec3& f0, double cos_theta) {
  double fc = std::pow(1.0 - std::clamp(cos_theta, 0.0, 1.0), 5.0);
  return f0 + (Vec3::Ones() - f0) * fc;
}

Vec3 sample_cosine(const Vec3& n, const Vec2& xi) {
  double phi = 2.0 * kPi * xi.x();
  double sr = std::sqrt(xi.y());
  double z = std::sqrt(std::max(0.0, 1.0 - xi.y()));
  Vec3 t, b;
  onb(n, t, b);
  return (sr * std::cos(phi) * t + sr * std::sin(phi) * b + z * n).normalized();
}

double pdf_cosine(const Vec3& n, const Vec3& wi) {
  return std::max(n.dot(wi), 0.0) / kPi;
}

Vec3 sample_ggx_half(const Vec3& n, double alpha, const Vec2& xi) {
  double cos_t = std::sqrt((1.0 - xi.y()) / (1.0 + (alpha * alpha - 1.0) * xi.y()));
  double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  double phi = 2.0 * kPi * xi.x();
  Vec3 t, b;
  onb(n, t, b);
  return (sin_t * std::cos(phi) * t + sin_t * std::sin(phi) * b + cos_t * n).normalized();
}

double pdf_ggx_reflect(const Vec3& n, const Vec3& wo, const Vec3& wi, double alpha) {
  Vec3 h = (wi + wo).normalized();
  double noh = std::max(n.dot(h), 0.0);
  double voh = std::max(wo.dot(h), 1e-9);
  return ggx_d(noh, alpha) * noh / (4.0 * voh);
}

Vec3 brdf_eval(const Material& mat, const Vec3& n, const Vec3& wi, const Vec3& wo) {
  if (n.dot(wi) <= 0 || n.dot(wo) <= 0)
    throw std::invalid_argument("brdf_eval: wi and wo must lie above the surface");
  return brdf_core(mat.clamped(), n, wi, wo);
}

Vec3 mc_radiance(const Material& mat, const Vec3& n, const Vec3& wo,
                 const EnvironmentMap& env, int samples, uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("mc_radiance: samples must be >= 1");
  Material m = mat.clamped();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vec3 acc = Vec3::Zero();
  for (int i = 0; i < samples; ++i) {
    Vec2 xi(uni(rng), uni(rng));
    Vec3 wi = sample_cosine(n, xi);
    if (n.dot(wi) <= 0) continue;
    // pdf = cos/pi, so the cosine factor cancels up to pi.
    acc += env.sample_bilinear(wi).cwiseProduct(brdf_core(m, n, wi, wo));
  }
  return acc * (kPi / samples);
}

Vec3 shade(const Material& mat, const Vec3& n, const Vec3& wo,
           const PrefilteredEnv& pre_env, ShadeGrad* grad) {
  Material m = mat.clamped();
  double nov_raw = n.dot(wo);
  double nov = std::clamp(nov_raw, 1e-4, 1.0);
  Vec3 refl_mirror = (2.0 * nov_raw * n - wo).normalized();
  // dominant specular direction: rough lobes integrate closer to the normal
  // than the mirror direction, which matters most at grazing incidence
  double sm = 1.0 - m.roughness;
  double lf = sm * (std::sqrt(sm) + m.roughness);
  Vec3 dom = (1.0 - lf) * n + lf * refl_mirror;
  Vec3 refl = dom.normalized();

  Mat3 d_irr_dn, d_spec_ddir;
  Vec3 d_spec_dr;
  Vec3 irr = pre_env.sample_diffuse(n, grad ? &d_irr_dn : nullptr);
  Vec3 spec_env = pre_env.sample_specular(refl, m.roughness, grad ? &d_spec_ddir : nullptr,
                                          grad ? &d_spec_dr : nullptr);
  Vec2 d_lut_dcos, d_lut_dr;
  Vec2 lut = pre_env.lut_lookup(nov, m.roughness, grad ? &d_lut_dcos : nullptr,
                                grad ? &d_lut_dr : nullptr);
  Vec3 f0 = m.f0();
  Vec3 fresnel = f0 * lut.x() + Vec3::Constant(lut.y());
  // coupled diffuse weight matching the reference BRDF: (1 - F(n.wo)) times the
  // cosine-weighted hemispherical average of (1 - F), i.e. (1 - f0) * 20/21
  double fc5 = std::pow(1.0 - nov, 5.0);
  Vec3 one_minus_f0 = Vec3::Ones() - f0;
  Vec3 kd1 = one_minus_f0 * (1.0 - fc5);
  Vec3 kd2 = one_minus_f0 * (20.0 / 21.0);
  Vec3 kd = kd1.cwiseProduct(kd2);
  Vec3 diffuse = irr.cwiseProduct(m.albedo).cwiseProduct(kd) * (1.0 - m.metallic);
  Vec3 specular = spec_env.cwiseProduct(fresnel);

  if (grad) {
    // d kd / d f0 (per channel, diagonal)
    Vec3 dkd_df0 = -(1.0 - fc5) * kd2 - kd1 * (20.0 / 21.0);
    Vec3 diff_base = irr * (1.0 - m.metallic);  // before albedo and kd
    grad->d_albedo = diff_base.cwiseProduct(kd + m.metallic * m.albedo.cwiseProduct(dkd_df0)) +
                     spec_env * (m.metallic * lut.x());
    grad->d_metallic =
        irr.cwiseProduct(m.albedo)
            .cwiseProduct(-kd + (1.0 - m.metallic) *
                                    dkd_df0.cwiseProduct(m.albedo - Vec3::Constant(0.04))) +
        spec_env.cwiseProduct(m.albedo - Vec3::Constant(0.04)) * lut.x();
    // mirror-reflection jacobian (through its normalization):
    // d refl_k / d n_j = 2 wo_j n_k + 2 (n.wo) delta_kj, projected off refl.
    Mat3 d_mirror_dn = (Mat3::Identity() - refl_mirror * refl_mirror.transpose()) *
                       (2.0 * n * wo.transpose() + 2.0 * nov_raw * Mat3::Identity());
    // dominant-direction chain: refl = normalize((1-lf) n + lf refl_mirror)
    Mat3 proj_dom =
        (Mat3::Identity() - refl * refl.transpose()) / std::max(dom.norm(), 1e-12);
    Mat3 d_refl_dn = proj_dom * ((1.0 - lf) * Mat3::Identity() + lf * d_mirror_dn);
    // lf = sm^(3/2) + sm*r with sm = 1-r  ->  dlf/dr = -1.5 sqrt(sm) + 1 - 2r
    double dlf_dr = -1.5 * std::sqrt(sm) + 1.0 - 2.0 * m.roughness;
    Vec3 d_refl_drough = proj_dom * (refl_mirror - n) * dlf_dr;
    grad->d_roughness = d_spec_dr.cwiseProduct(fresnel) +
                        spec_env.cwiseProduct(f0 * d_lut_dr.x() + Vec3::Constant(d_lut_dr.y())) +
                        fresnel.cwiseProduct(d_spec_ddir * d_refl_drough);
    Mat3 dn = Mat3::Zero();
    for (int i = 0; i < 3; ++i) {
      // diffuse irradiance lookup
      dn.row(i) += (m.albedo[i] * (1.0 - m.metallic) * kd[i]) * d_irr_dn.row(i);
      // specular environment lookup through the reflection direction
      dn.row(i) += fresnel[i] * (d_spec_ddir.row(i) * d_refl_dn);
      // n.wo dependencies (zero when clamped): Fresnel LUT and the diffuse
      // (1 - F(n.wo)) factor via fc5
      if (nov_raw > 1e-4 && nov_raw < 1.0) {
        dn.row(i) += spec_env[i] * (f0[i] * d_lut_dcos.x() + d_lut_dcos.y()) * wo.transpose();
        dn.row(i) += (irr[i] * m.albedo[i] * (1.0 - m.metallic) * kd2[i] *
                      one_minus_f0[i] * 5.0 * std::pow(1.0 - nov, 4.0)) *
                     wo.transpose();
      }
    }
    grad->d_normal = dn;
  }
  return diffuse + specular;
}

}  // namespace resplat
