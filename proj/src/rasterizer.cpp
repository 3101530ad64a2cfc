#include "resplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace resplat {

std::optional<SplatHit> ray_splat_intersect(const Splat2D& splat, const Vec3& origin,
                                            const Vec3& dir) {
  Vec3 n = splat.normal();
  double dn = dir.dot(n);
  if (std::abs(dn) < 1e-8) return std::nullopt;
  double t = (splat.mu - origin).dot(n) / dn;
  if (t <= 1e-9) return std::nullopt;
  Vec3 q = origin + t * dir - splat.mu;
  double u = q.dot(splat.tangent_x()) / splat.sx;
  double v = q.dot(splat.tangent_y()) / splat.sy;
  return SplatHit{u, v, t, std::exp(-0.5 * (u * u + v * v))};
}

namespace {

constexpr int kTile = 16;

struct Prep {
  std::vector<int> order;  // front-to-back by view depth of the center
  std::vector<std::vector<int>> tiles;
  int tiles_x = 0, tiles_y = 0;
  Vec3 cam_pos;
  Mat3 rot_c2w, rot_w2c;
};

Prep prepare(const SplatList& splats, const Camera& cam) {
  for (const Splat2D& s : splats) {
    if (!s.mu.allFinite() || !std::isfinite(s.sx) || !std::isfinite(s.sy) ||
        !std::isfinite(s.opacity_logit) || !s.material.albedo.allFinite() ||
        !std::isfinite(s.material.roughness) || !std::isfinite(s.material.metallic) ||
        !s.rot.coeffs().allFinite())
      throw std::runtime_error("render: non-finite splat parameters");
    if (s.sx <= 0 || s.sy <= 0) throw std::runtime_error("render: non-positive splat scale");
  }
  Prep p;
  RigidSim3 c2w = cam.pose.inverse();
  p.cam_pos = c2w.translation;
  p.rot_c2w = c2w.rotation.toRotationMatrix();
  p.rot_w2c = cam.pose.rotation.toRotationMatrix();
  p.tiles_x = (cam.width + kTile - 1) / kTile;
  p.tiles_y = (cam.height + kTile - 1) / kTile;
  p.tiles.resize(static_cast<size_t>(p.tiles_x) * p.tiles_y);

  struct Key {
    double z;
    Vec3 mu;
    int idx;
  };
  std::vector<Key> keys;
  keys.reserve(splats.size());
  for (int i = 0; i < static_cast<int>(splats.size()); ++i) {
    double z = cam.to_camera(splats[i].mu).z();
    keys.push_back({z, splats[i].mu, i});
  }
  // Depth sort with a position tie-break so the order is input-permutation
  // invariant.
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.z != b.z) return a.z < b.z;
    if (a.mu.x() != b.mu.x()) return a.mu.x() < b.mu.x();
    if (a.mu.y() != b.mu.y()) return a.mu.y() < b.mu.y();
    return a.mu.z() < b.mu.z();
  });
  for (const Key& k : keys) {
    const Splat2D& s = splats[k.idx];
    double smax = 3.0 * std::max(s.sx, s.sy);
    if (k.z <= 1e-9) continue;  // center behind the camera
    auto center = project(cam, s.mu);
    if (!center) continue;
    double znear = std::max(k.z - smax, 1e-3);
    double rad = smax / znear * std::max(cam.fx, cam.fy) + 1.0;
    int x0 = std::max(0, static_cast<int>((center->x() - rad) / kTile));
    int x1 = std::min(p.tiles_x - 1, static_cast<int>((center->x() + rad) / kTile));
    int y0 = std::max(0, static_cast<int>((center->y() - rad) / kTile));
    int y1 = std::min(p.tiles_y - 1, static_cast<int>((center->y() + rad) / kTile));
    if (center->x() + rad < 0 || center->y() + rad < 0 || center->x() - rad > cam.width ||
        center->y() - rad > cam.height)
      continue;
    p.order.push_back(k.idx);
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        p.tiles[static_cast<size_t>(ty) * p.tiles_x + tx].push_back(k.idx);
  }
  return p;
}

Vec3 pixel_ray_dir(const Camera& cam, const Prep& p, int x, int y) {
  Vec3 dc((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
  return (p.rot_c2w * dc.normalized()).normalized();
}

struct Contrib {
  int idx;
  double a, u, v, t, flip;
  Vec3 n_face;   // world-space normal, flipped toward the viewer
  Vec3 color;    // env-scaled shaded radiance
};

template <typename Fn>
void parallel_tiles(int n_tiles, int threads, Fn&& fn) {
  threads = std::max(1, threads);
  if (threads == 1) {
    fn(0, n_tiles, 0);
    return;
  }
  std::vector<std::thread> pool;
  int chunk = (n_tiles + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int lo = t * chunk, hi = std::min(n_tiles, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi, t] { fn(lo, hi, t); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

FrameBuffers render(const SplatList& splats, const Camera& cam,
                    const PrefilteredEnv& pre_env, const RenderOptions& opts) {
  if (cam.width <= 0 || cam.height <= 0) throw std::runtime_error("render: empty camera");
  Prep p = prepare(splats, cam);
  FrameBuffers fb(cam.width, cam.height);
  int n_tiles = p.tiles_x * p.tiles_y;

  parallel_tiles(n_tiles, opts.threads, [&](int lo, int hi, int) {
    for (int tile = lo; tile < hi; ++tile) {
      const std::vector<int>& list = p.tiles[tile];
      int tx = tile % p.tiles_x, ty = tile / p.tiles_x;
      int xend = std::min(cam.width, (tx + 1) * kTile);
      int yend = std::min(cam.height, (ty + 1) * kTile);
      for (int y = ty * kTile; y < yend; ++y) {
        for (int x = tx * kTile; x < xend; ++x) {
          Vec3 dir = pixel_ray_dir(cam, p, x, y);
          Vec3 wo = -dir;
          double trans = 1.0;
          Vec3 rgb = Vec3::Zero(), nrm = Vec3::Zero();
          double depth = 0.0;
          for (int idx : list) {
            const Splat2D& s = splats[idx];
            auto hit = ray_splat_intersect(s, p.cam_pos, dir);
            if (!hit || hit->weight < opts.weight_cutoff) continue;
            double a = s.opacity() * hit->weight;
            Vec3 n = s.normal();
            double flip = n.dot(wo) < 0 ? -1.0 : 1.0;
            Vec3 n_face = flip * n;
            Vec3 c = opts.env_scale * shade(s.material, n_face, wo, pre_env);
            rgb += trans * a * c;
            nrm += trans * a * (p.rot_w2c * n_face);
            depth += trans * a * hit->depth;
            trans *= 1.0 - a;
            if (trans < 1e-5) break;
          }
          if (opts.background == BackgroundMode::kEnvLookup) {
            // Equirect texel lookup keeps the sky at infinite distance.
            Vec2 uv = dir_to_uv(dir);
            const ImageRGB& src = pre_env.specular_mips[0];
            int ex = std::clamp(static_cast<int>(uv.x() * src.width), 0, src.width - 1);
            int ey = std::clamp(static_cast<int>(uv.y() * src.height), 0, src.height - 1);
            rgb += trans * opts.env_scale * src.at(ex, ey);
          }
          fb.rgb.at(x, y) = rgb;
          fb.acc_opacity.at(x, y) = 1.0 - trans;
          fb.normal.at(x, y) = nrm;
          fb.depth.at(x, y) = depth;
        }
      }
    }
  });
  return fb;
}

ParamGradients backward(const SplatList& splats, const Camera& cam,
                        const PrefilteredEnv& pre_env, const UpstreamGrads& upstream,
                        const RenderOptions& opts) {
  if (cam.width <= 0 || cam.height <= 0) throw std::runtime_error("backward: empty camera");
  auto check_dims = [&](const auto& img, const char* name) {
    if (img.width != 0 && (img.width != cam.width || img.height != cam.height))
      throw std::runtime_error(std::string("backward: upstream ") + name +
                               " does not match the camera resolution");
  };
  check_dims(upstream.d_rgb, "rgb");
  check_dims(upstream.d_acc_opacity, "acc_opacity");
  check_dims(upstream.d_normal, "normal");
  check_dims(upstream.d_depth, "depth");

  Prep p = prepare(splats, cam);
  int n_tiles = p.tiles_x * p.tiles_y;
  int threads = std::max(1, opts.threads);
  std::vector<ParamGradients> partials(threads);
  for (auto& pg : partials) pg.splats.assign(splats.size(), SplatGrad{});

  parallel_tiles(n_tiles, threads, [&](int lo, int hi, int tid) {
    ParamGradients& out = partials[tid];
    std::vector<Contrib> contribs;
    for (int tile = lo; tile < hi; ++tile) {
      const std::vector<int>& list = p.tiles[tile];
      int tx = tile % p.tiles_x, ty = tile / p.tiles_x;
      int xend = std::min(cam.width, (tx + 1) * kTile);
      int yend = std::min(cam.height, (ty + 1) * kTile);
      for (int y = ty * kTile; y < yend; ++y) {
        for (int x = tx * kTile; x < xend; ++x) {
          Vec3 g_rgb = upstream.d_rgb.width ? upstream.d_rgb.at(x, y) : Vec3::Zero();
          double g_acc =
              upstream.d_acc_opacity.width ? upstream.d_acc_opacity.at(x, y) : 0.0;
          Vec3 g_nrm = upstream.d_normal.width ? upstream.d_normal.at(x, y) : Vec3::Zero();
          double g_depth = upstream.d_depth.width ? upstream.d_depth.at(x, y) : 0.0;
          if (g_rgb.isZero() && g_acc == 0 && g_nrm.isZero() && g_depth == 0 &&
              opts.background == BackgroundMode::kBlack)
            continue;

          Vec3 dir = pixel_ray_dir(cam, p, x, y);
          Vec3 wo = -dir;
          contribs.clear();
          double trans = 1.0;
          for (int idx : list) {
            const Splat2D& s = splats[idx];
            auto hit = ray_splat_intersect(s, p.cam_pos, dir);
            if (!hit || hit->weight < opts.weight_cutoff) continue;
            double a = s.opacity() * hit->weight;
            Vec3 n = s.normal();
            double flip = n.dot(wo) < 0 ? -1.0 : 1.0;
            Vec3 n_face = flip * n;
            Vec3 c = opts.env_scale * shade(s.material, n_face, wo, pre_env);
            contribs.push_back({idx, a, hit->u, hit->v, hit->depth, flip, n_face, c});
            trans *= 1.0 - a;
            if (trans < 1e-5) break;
          }
          double t_final = trans;

          Vec3 bg = Vec3::Zero();
          if (opts.background == BackgroundMode::kEnvLookup) {
            Vec2 uv = dir_to_uv(dir);
            const ImageRGB& src = pre_env.specular_mips[0];
            int ex = std::clamp(static_cast<int>(uv.x() * src.width), 0, src.width - 1);
            int ey = std::clamp(static_cast<int>(uv.y() * src.height), 0, src.height - 1);
            bg = opts.env_scale * src.at(ex, ey);
            out.d_env_scale += t_final * bg.dot(g_rgb) / opts.env_scale;
          }

          // Reverse sweep with a suffix accumulator over later contributions.
          double suffix = 0.0;
          double t_k = 1.0;
          std::vector<double> prefix_t(contribs.size());
          for (size_t k = 0; k < contribs.size(); ++k) {
            prefix_t[k] = t_k;
            t_k *= 1.0 - contribs[k].a;
          }
          for (size_t ri = contribs.size(); ri-- > 0;) {
            const Contrib& ck = contribs[ri];
            const Splat2D& s = splats[ck.idx];
            SplatGrad& g = out.splats[ck.idx];
            double tk = prefix_t[ri];

            double direct = ck.color.dot(g_rgb) + (p.rot_w2c * ck.n_face).dot(g_nrm) +
                            ck.t * g_depth;
            double da = tk * direct +
                        (-suffix - t_final * bg.dot(g_rgb) + t_final * g_acc) /
                            (1.0 - ck.a);
            suffix += tk * ck.a * direct;

            // Shading gradients (material, normal, env scale).
            ShadeGrad sg;
            Vec3 base = shade(s.material, ck.n_face, wo, pre_env, &sg);
            Vec3 wc = tk * ck.a * opts.env_scale * g_rgb;  // weight on shade output
            out.d_env_scale += tk * ck.a * base.dot(g_rgb);
            g.d_albedo += sg.d_albedo.cwiseProduct(wc);
            g.d_roughness += sg.d_roughness.dot(wc);
            g.d_metallic += sg.d_metallic.dot(wc);
            Vec3 gn_face = sg.d_normal.transpose() * wc;  // d loss / d n_face
            gn_face += tk * ck.a * (p.rot_w2c.transpose() * g_nrm);
            Vec3 gn = ck.flip * gn_face;  // d loss / d n = R e3

            // Opacity chain: a = sigmoid(logit) * G.
            double alpha = s.opacity();
            double gw = std::exp(-0.5 * (ck.u * ck.u + ck.v * ck.v));
            g.d_opacity_logit += da * gw * alpha * (1.0 - alpha);
            double dG = da * alpha;
            double du = -ck.u * gw * dG;
            double dv = -ck.v * gw * dG;

            // Geometry chain.
            Vec3 n = s.normal();
            Vec3 r1 = s.tangent_x(), r2 = s.tangent_y();
            double dn_dot = dir.dot(n);
            Vec3 q = p.cam_pos + ck.t * dir - s.mu;
            double dt_extra = tk * ck.a * g_depth;  // direct depth-buffer term

            // d/d mu
            Vec3 du_dmu = (-r1 + n * (dir.dot(r1) / dn_dot)) / s.sx;
            Vec3 dv_dmu = (-r2 + n * (dir.dot(r2) / dn_dot)) / s.sy;
            Vec3 dt_dmu = n / dn_dot;
            g.d_mu += du * du_dmu + dv * dv_dmu + dt_extra * dt_dmu;

            // d/d scales
            g.d_sx += du * (-ck.u / s.sx);
            g.d_sy += dv * (-ck.v / s.sy);

            // d/d rotation tangent. d(R e)/d delta = -R [e]x.
            Mat3 rmat = s.rot.toRotationMatrix();
            auto skew = [](const Vec3& a) {
              Mat3 m;
              m << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
              return m;
            };
            Mat3 m1 = -rmat * skew(Vec3::UnitX());
            Mat3 m2 = -rmat * skew(Vec3::UnitY());
            Mat3 m3 = -rmat * skew(Vec3::UnitZ());
            Vec3 dt_dn = -q / dn_dot;
            // u = q.r1/sx with q = q(t(n)), so du/ddelta passes through both.
            Vec3 du_ddelta = (m1.transpose() * q) / s.sx +
                             (dir.dot(r1) / s.sx) * (m3.transpose() * dt_dn);
            Vec3 dv_ddelta = (m2.transpose() * q) / s.sy +
                             (dir.dot(r2) / s.sy) * (m3.transpose() * dt_dn);
            Vec3 dt_ddelta = m3.transpose() * dt_dn;
            g.d_rot += du * du_ddelta + dv * dv_ddelta + dt_extra * dt_ddelta +
                       m3.transpose() * gn;
          }
        }
      }
    }
  });

  ParamGradients total;
  total.splats.assign(splats.size(), SplatGrad{});
  for (const ParamGradients& pg : partials) {
    total.d_env_scale += pg.d_env_scale;
    for (size_t i = 0; i < splats.size(); ++i) {
      SplatGrad& a = total.splats[i];
      const SplatGrad& b = pg.splats[i];
      a.d_mu += b.d_mu;
      a.d_rot += b.d_rot;
      a.d_sx += b.d_sx;
      a.d_sy += b.d_sy;
      a.d_opacity_logit += b.d_opacity_logit;
      a.d_albedo += b.d_albedo;
      a.d_roughness += b.d_roughness;
      a.d_metallic += b.d_metallic;
    }
  }
  return total;
}

}  // namespace resplat
