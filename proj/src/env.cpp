#include "resplat/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace resplat {

namespace {
constexpr double kPi = std::numbers::pi;

double radical_inverse(uint32_t bits) {
  bits = (bits << 16u) | (bits >> 16u);
  bits = ((bits & 0x55555555u) << 1u) | ((bits & 0xAAAAAAAAu) >> 1u);
  bits = ((bits & 0x33333333u) << 2u) | ((bits & 0xCCCCCCCCu) >> 2u);
  bits = ((bits & 0x0F0F0F0Fu) << 4u) | ((bits & 0xF0F0F0F0u) >> 4u);
  bits = ((bits & 0x00FF00FFu) << 8u) | ((bits & 0xFF00FF00u) >> 8u);
  return bits * 2.3283064365386963e-10;
}

Vec2 hammersley(uint32_t i, uint32_t n) {
  return Vec2((i + 0.5) / n, radical_inverse(i));
}

void onb(const Vec3& n, Vec3& t, Vec3& b) {
  t = std::abs(n.z()) < 0.999 ? Vec3(0, 0, 1).cross(n).normalized()
                              : Vec3(1, 0, 0).cross(n).normalized();
  b = n.cross(t);
}

Vec3 ggx_sample_half(const Vec2& xi, double alpha, const Vec3& n) {
  double cos_t = std::sqrt((1.0 - xi.y()) / (1.0 + (alpha * alpha - 1.0) * xi.y()));
  double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  double phi = 2.0 * kPi * xi.x();
  Vec3 t, b;
  onb(n, t, b);
  return (sin_t * std::cos(phi) * t + sin_t * std::sin(phi) * b + cos_t * n).normalized();
}

double smith_g2(double nol, double nov, double alpha) {
  double a2 = alpha * alpha;
  double gl = nov * std::sqrt(a2 + (1.0 - a2) * nol * nol);
  double gv = nol * std::sqrt(a2 + (1.0 - a2) * nov * nov);
  return 2.0 * nol * nov / std::max(gl + gv, 1e-12);
}

// Integer-factor box downsample; keeps linearity and dimensions W = 2H.
ImageRGB downsample_to(const ImageRGB& src, int max_h) {
  int factor = 1;
  while (src.height / (factor * 2) >= max_h && src.height % (factor * 2) == 0 &&
         src.width % (factor * 2) == 0)
    factor *= 2;
  if (factor == 1) return src;
  ImageRGB out(src.width / factor, src.height / factor);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      Vec3 acc = Vec3::Zero();
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          acc += src.at(x * factor + dx, y * factor + dy);
      out.at(x, y) = acc / (factor * factor);
    }
  return out;
}

}  // namespace

EnvironmentMap::EnvironmentMap(ImageRGB img) : pixels(std::move(img)) {
  if (pixels.width != 2 * pixels.height)
    throw std::runtime_error("environment map must satisfy width = 2*height");
  for (const Vec3& p : pixels.data)
    if (!(p.minCoeff() >= 0) || !p.allFinite())
      throw std::runtime_error("environment radiance must be finite and nonnegative");
}

Vec2 dir_to_uv(const Vec3& dir) {
  double u = (std::atan2(dir.y(), dir.x()) + kPi) / (2.0 * kPi);
  double v = std::acos(std::clamp(dir.z() / dir.norm(), -1.0, 1.0)) / kPi;
  if (u >= 1.0) u -= 1.0;
  return Vec2(u, v);
}

Vec3 uv_to_dir(const Vec2& uv) {
  double phi = uv.x() * 2.0 * kPi - kPi;
  double theta = uv.y() * kPi;
  double st = std::sin(theta);
  return Vec3(st * std::cos(phi), st * std::sin(phi), std::cos(theta));
}

Vec3 texel_dir(int x, int y, int w, int h) {
  return uv_to_dir(Vec2((x + 0.5) / w, (y + 0.5) / h));
}

double texel_solid_angle(int y, int w, int h) {
  double theta = (y + 0.5) / h * kPi;
  return (2.0 * kPi / w) * (kPi / h) * std::sin(theta);
}

Vec3 EnvironmentMap::sample_nearest(const Vec3& dir) const {
  Vec2 uv = dir_to_uv(dir);
  int x = std::clamp(static_cast<int>(uv.x() * width()), 0, width() - 1);
  int y = std::clamp(static_cast<int>(uv.y() * height()), 0, height() - 1);
  return pixels.at(x, y);
}

Vec3 EnvironmentMap::sample_bilinear(const Vec3& dir) const {
  return sample_equirect(pixels, dir);
}

EnvironmentMap read_env_pfm(const std::string& path) {
  return EnvironmentMap(read_pfm(path));
}

void write_env_pfm(const std::string& path, const EnvironmentMap& env) {
  write_pfm(path, env.pixels);
}

Vec3 sample_equirect(const ImageRGB& img, const Vec3& dir, Mat3* d_dir) {
  Vec2 uv = dir_to_uv(dir);
  double s = uv.x() * img.width - 0.5;
  double t = std::clamp(uv.y() * img.height - 0.5, 0.0, img.height - 1.0);
  int x0 = static_cast<int>(std::floor(s));
  int y0 = static_cast<int>(std::floor(t));
  double fx = s - x0, fy = t - y0;
  auto wrap = [&](int x) { return ((x % img.width) + img.width) % img.width; };
  int x0w = wrap(x0), x1w = wrap(x0 + 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  y0 = std::clamp(y0, 0, img.height - 1);
  const Vec3& c00 = img.at(x0w, y0);
  const Vec3& c10 = img.at(x1w, y0);
  const Vec3& c01 = img.at(x0w, y1);
  const Vec3& c11 = img.at(x1w, y1);
  Vec3 val = (1 - fx) * (1 - fy) * c00 + fx * (1 - fy) * c10 + (1 - fx) * fy * c01 +
             fx * fy * c11;
  if (d_dir) {
    Vec3 dval_du = img.width * ((1 - fy) * (c10 - c00) + fy * (c11 - c01));
    Vec3 dval_dv = img.height * ((1 - fx) * (c01 - c00) + fx * (c11 - c10));
    double rxy2 = dir.x() * dir.x() + dir.y() * dir.y();
    Vec3 du_ddir = Vec3::Zero(), dv_ddir = Vec3::Zero();
    if (rxy2 > 1e-12) {
      du_ddir = Vec3(-dir.y(), dir.x(), 0) / (2.0 * kPi * rxy2);
      // v = acos(z / |d|) / pi for the raw (unnormalized) direction
      double r2 = dir.squaredNorm();
      double rxy = std::sqrt(rxy2);
      dv_ddir = Vec3(dir.z() * dir.x(), dir.z() * dir.y(), -rxy2) / (kPi * rxy * r2);
    }
    *d_dir = dval_du * du_ddir.transpose() + dval_dv * dv_ddir.transpose();
  }
  return val;
}

Vec3 PrefilteredEnv::sample_specular(const Vec3& dir, double roughness, Mat3* d_dir,
                                     Vec3* d_rough) const {
  double r = std::clamp(roughness, 0.0, 1.0);
  double level = r * (n_mips - 1);
  int k0 = std::min(static_cast<int>(level), n_mips - 2);
  double f = level - k0;
  Mat3 j0, j1;
  Vec3 v0 = sample_equirect(specular_mips[k0], dir, d_dir ? &j0 : nullptr);
  Vec3 v1 = sample_equirect(specular_mips[k0 + 1], dir, d_dir ? &j1 : nullptr);
  if (d_dir) *d_dir = (1 - f) * j0 + f * j1;
  if (d_rough) *d_rough = (roughness > 0 && roughness < 1)
                              ? Vec3((v1 - v0) * (n_mips - 1))
                              : Vec3(Vec3::Zero());
  return (1 - f) * v0 + f * v1;
}

Vec3 PrefilteredEnv::sample_diffuse(const Vec3& normal, Mat3* d_normal) const {
  return sample_equirect(diffuse_irradiance, normal, d_normal);
}

Vec2 PrefilteredEnv::lut_lookup(double cos_theta, double roughness, Vec2* d_cos,
                                Vec2* d_rough) const {
  const Image<Vec2>& lut = brdf_lut;
  double s = std::clamp(cos_theta * lut.width - 0.5, 0.0, lut.width - 1.0);
  double t = std::clamp(roughness * lut.height - 0.5, 0.0, lut.height - 1.0);
  int x0 = std::min(static_cast<int>(s), lut.width - 2);
  int y0 = std::min(static_cast<int>(t), lut.height - 2);
  double fx = s - x0, fy = t - y0;
  const Vec2& c00 = lut.at(x0, y0);
  const Vec2& c10 = lut.at(x0 + 1, y0);
  const Vec2& c01 = lut.at(x0, y0 + 1);
  const Vec2& c11 = lut.at(x0 + 1, y0 + 1);
  Vec2 val = (1 - fx) * (1 - fy) * c00 + fx * (1 - fy) * c10 + (1 - fx) * fy * c01 +
             fx * fy * c11;
  bool in_s = cos_theta * lut.width - 0.5 > 0 && cos_theta * lut.width - 0.5 < lut.width - 1;
  bool in_t = roughness * lut.height - 0.5 > 0 && roughness * lut.height - 0.5 < lut.height - 1;
  if (d_cos)
    *d_cos = in_s ? Vec2(lut.width * ((1 - fy) * (c10 - c00) + fy * (c11 - c01)))
                  : Vec2(Vec2::Zero());
  if (d_rough)
    *d_rough = in_t ? Vec2(lut.height * ((1 - fx) * (c01 - c00) + fx * (c11 - c10)))
                    : Vec2(Vec2::Zero());
  return val;
}

PrefilteredEnv prefilter(const EnvironmentMap& env, const PrefilterOptions& opt) {
  if (opt.n_mips < 2) throw std::runtime_error("prefilter: n_mips must be >= 2");
  PrefilteredEnv out;
  out.n_mips = opt.n_mips;
  out.specular_mips.reserve(opt.n_mips);
  out.specular_mips.push_back(env.pixels);  // level 0 = source

  for (int k = 1; k < opt.n_mips; ++k) {
    double rk = static_cast<double>(k) / (opt.n_mips - 1);
    double alpha = std::max(rk * rk, 1e-3);
    int h = std::max(env.height() >> k, 8);
    int w = 2 * h;
    ImageRGB level(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        Vec3 n = texel_dir(x, y, w, h);
        Vec3 acc = Vec3::Zero();
        double wsum = 0;
        for (int i = 0; i < opt.spec_samples; ++i) {
          Vec3 half = ggx_sample_half(hammersley(i, opt.spec_samples), alpha, n);
          Vec3 l = 2.0 * n.dot(half) * half - n;
          double nol = n.dot(l);
          if (nol <= 0) continue;
          acc += sample_equirect(env.pixels, l) * nol;
          wsum += nol;
        }
        level.at(x, y) = wsum > 0 ? Vec3(acc / wsum) : env.sample_nearest(n);
      }
    }
    out.specular_mips.push_back(std::move(level));
  }

  // Cosine-convolved irradiance over a downsampled source, divided by pi so
  // the diffuse term is irradiance * albedo directly.
  ImageRGB src = downsample_to(env.pixels, 64);
  int dh = opt.diffuse_res, dw = 2 * dh;
  out.diffuse_irradiance = ImageRGB(dw, dh);
  for (int y = 0; y < dh; ++y) {
    for (int x = 0; x < dw; ++x) {
      Vec3 n = texel_dir(x, y, dw, dh);
      Vec3 acc = Vec3::Zero();
      for (int sy = 0; sy < src.height; ++sy) {
        double dw_sa = texel_solid_angle(sy, src.width, src.height);
        for (int sx = 0; sx < src.width; ++sx) {
          double c = n.dot(texel_dir(sx, sy, src.width, src.height));
          if (c > 0) acc += src.at(sx, sy) * (c * dw_sa);
        }
      }
      out.diffuse_irradiance.at(x, y) = acc / kPi;
    }
  }

  // Environment-independent split-sum integral (Fresnel scale / bias).
  out.brdf_lut = Image<Vec2>(opt.lut_res, opt.lut_res);
  for (int j = 0; j < opt.lut_res; ++j) {
    double r = (j + 0.5) / opt.lut_res;
    double alpha = std::max(r * r, 1e-3);
    for (int i = 0; i < opt.lut_res; ++i) {
      double nov = std::max((i + 0.5) / opt.lut_res, 1e-3);
      Vec3 v(std::sqrt(1.0 - nov * nov), 0, nov);
      Vec3 n(0, 0, 1);
      double a = 0, b = 0;
      for (int s = 0; s < opt.lut_samples; ++s) {
        Vec3 half = ggx_sample_half(hammersley(s, opt.lut_samples), alpha, n);
        Vec3 l = 2.0 * v.dot(half) * half - v;
        double nol = l.z();
        if (nol <= 0) continue;
        double noh = std::max(half.z(), 0.0);
        double voh = std::max(v.dot(half), 1e-6);
        double g = smith_g2(nol, nov, alpha);
        double g_vis = g * voh / std::max(noh * nov, 1e-9);
        double fc = std::pow(1.0 - voh, 5.0);
        a += (1.0 - fc) * g_vis;
        b += fc * g_vis;
      }
      out.brdf_lut.at(i, j) = Vec2(a / opt.lut_samples, b / opt.lut_samples);
    }
  }
  return out;
}

}  // namespace resplat
