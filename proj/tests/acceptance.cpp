// Acceptance gate: one pass/fail line per criterion, exit 0 only when all
// pass. argv[1] is the path to the CLI binary (needed by the determinism
// criterion).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "resplat/config.hpp"
#include "resplat/metrics.hpp"
#include "resplat/retrieval.hpp"
#include "resplat/scene_io.hpp"

using namespace resplat;
using namespace resplat::testutil;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

// ---------------------------------------------------------------- criterion 1

// Balance-heuristic MIS (cosine + GGX-reflection) estimate of the reflected
// radiance integral. Same integral as mc_radiance, far lower variance on
// sharp specular lobes.
Vec3 mis_radiance(const Material& mat, const Vec3& n, const Vec3& wo,
                  const EnvironmentMap& env, int n_samples, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double alpha = std::max(mat.roughness * mat.roughness, 1e-4);
  Vec3 total = Vec3::Zero();
  int half = n_samples / 2;
  for (int tech = 0; tech < 2; ++tech) {
    Vec3 acc = Vec3::Zero();
    for (int i = 0; i < half; ++i) {
      Vec2 xi(uni(rng), uni(rng));
      Vec3 wi;
      if (tech == 0) {
        wi = sample_cosine(n, xi);
      } else {
        Vec3 h = sample_ggx_half(n, alpha, xi);
        wi = (2.0 * wo.dot(h) * h - wo).normalized();
      }
      double nol = n.dot(wi);
      if (nol <= 1e-7) continue;
      double p_cos = pdf_cosine(n, wi);
      double p_ggx = pdf_ggx_reflect(n, wo, wi, alpha);
      double p_self = tech == 0 ? p_cos : p_ggx;
      if (p_self <= 1e-12) continue;
      double w = (p_self / (p_cos + p_ggx)) * nol / p_self;
      acc += w * env.sample_bilinear(wi).cwiseProduct(brdf_eval(mat, n, wi, wo));
    }
    total += acc / half;
  }
  return total;
}

Outcome c1_shading_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<EnvironmentMap> envs;
  envs.push_back(smooth_env(32, Vec3(0.6, 0.5, 0.4), Vec3(0.3, 0.4, 0.2)));
  envs.push_back(smooth_env(32, Vec3(0.4, 0.4, 0.6), Vec3(0.2, 0.1, 0.3)));
  std::vector<PrefilteredEnv> pres;
  for (const EnvironmentMap& e : envs) pres.push_back(prefilter(e));

  std::mt19937_64 rng(1001);
  double worst = 0;
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    Material m = random_material(rng, 0.2);
    Vec3 n = random_unit(rng);
    Vec3 wo;
    do {
      wo = random_unit(rng);
    } while (n.dot(wo) < 0.05);
    int e = i % static_cast<int>(envs.size());
    Vec3 approx = shade(m, n, wo, pres[e]);
    Vec3 ref = mis_radiance(m, n, wo, envs[e], 80000, 5000 + i);
    for (int c = 0; c < 3; ++c) {
      double rel = std::abs(approx[c] - ref[c]) / std::max(std::abs(ref[c]), 0.02);
      worst = std::max(worst, rel);
      if (rel > 0.10) ++failures;
    }
  }
  double dt = seconds_since(t0);
  Outcome o;
  o.pass = failures == 0 && dt < 120.0;
  o.detail = "100 pairs, worst rel err " + fmt(worst) + " (tol 0.10), " + fmt(dt, 3) +
             " s (limit 120)";
  return o;
}

// ---------------------------------------------------------------- criterion 2

double furnace_mis(const Material& mat, const Vec3& n, const Vec3& wo, int n_samples,
                   uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double alpha = std::max(mat.roughness * mat.roughness, 1e-4);
  double total = 0;
  int half = n_samples / 2;
  for (int tech = 0; tech < 2; ++tech) {
    double acc = 0;
    for (int i = 0; i < half; ++i) {
      Vec2 xi(uni(rng), uni(rng));
      Vec3 wi;
      if (tech == 0) {
        wi = sample_cosine(n, xi);
      } else {
        Vec3 h = sample_ggx_half(n, alpha, xi);
        wi = (2.0 * wo.dot(h) * h - wo).normalized();
      }
      double nol = n.dot(wi);
      if (nol <= 1e-7) continue;
      double p_cos = pdf_cosine(n, wi);
      double p_ggx = pdf_ggx_reflect(n, wo, wi, alpha);
      double p_self = tech == 0 ? p_cos : p_ggx;
      if (p_self <= 1e-12) continue;
      acc += (p_self / (p_cos + p_ggx)) * brdf_eval(mat, n, wi, wo).mean() * nol / p_self;
    }
    total += acc / half;
  }
  return total;
}

Outcome c2_brdf_physics() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vec3 n(0, 0, 1);
  double worst_recip = 0, worst_furnace = 0;
  int recip_fail = 0, furnace_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    Material m = random_material(rng, 0.02);
    Vec3 wi, wo;
    do {
      wi = random_unit(rng);
    } while (n.dot(wi) < 0.05);
    do {
      wo = random_unit(rng);
    } while (n.dot(wo) < 0.05);
    double r = (brdf_eval(m, n, wi, wo) - brdf_eval(m, n, wo, wi)).cwiseAbs().maxCoeff();
    worst_recip = std::max(worst_recip, r);
    if (r > 1e-6) ++recip_fail;

    Material white = m;
    white.albedo = Vec3::Ones();
    double e = furnace_mis(white, n, wo, 20000, 6000 + i);
    if (e > 1.008) e = furnace_mis(white, n, wo, 200000, 60000 + i);  // damp MC noise
    worst_furnace = std::max(worst_furnace, e);
    if (e > 1.0 + 1e-2) ++furnace_fail;
  }
  Outcome o;
  o.pass = recip_fail == 0 && furnace_fail == 0;
  o.detail = "1000 materials, worst reciprocity gap " + fmt(worst_recip, 3) +
             " (tol 1e-6), worst furnace energy " + fmt(worst_furnace, 6) +
             " (bound 1.01)";
  return o;
}

// ---------------------------------------------------------------- criterion 3

Outcome c3_gradients() {
  PrefilteredEnv pre =
      prefilter(smooth_env(16, Vec3(0.5, 0.4, 0.6), Vec3(0.2, 0.2, 0.1)));
  int checked = 0, matched = 0, scenes = 0;
  for (uint64_t seed = 0; seed < 24; ++seed) {
    std::mt19937_64 rng(2000 + seed);
    int n_splats = 5 + static_cast<int>(rng() % 6);  // 5..10
    SplatList splats = random_scene(rng, n_splats);
    for (Splat2D& s : splats) {
      s.material.albedo = s.material.albedo.cwiseMax(0.1).cwiseMin(0.9);
      s.material.roughness = std::clamp(s.material.roughness, 0.25, 0.85);
      s.material.metallic = std::clamp(s.material.metallic, 0.1, 0.8);
    }
    int w = 24 + static_cast<int>(rng() % 9);  // <= 32
    Camera cam = look_at_camera(Vec3(0.2, -2.7, 0.5), Vec3::Zero(), w, w, w);
    TrainingFrame f;
    f.camera = cam;
    f.image = ImageRGB(w, w);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (Vec3& p : f.image.data) p = Vec3(uni(rng), uni(rng), uni(rng));
    f.mask = ImageU8(w, w, 0);
    for (auto& px : f.mask.data) px = (rng() % 2) ? 255 : 0;
    TrainConfig cfg;

    auto loss_of = [&](const SplatList& sp) {
      return total_objective(f, render(sp, cam, pre), cfg).total;
    };
    ObjectiveResult obj = total_objective(f, render(splats, cam, pre), cfg);
    ParamGradients g = backward(splats, cam, pre, obj.upstream);
    double h = 1e-5;
    for (size_t i = 0; i < splats.size(); ++i)
      for (int dof = 0; dof < 14; ++dof) {
        SplatList p = splats, m = splats;
        perturb_splat(p[i], dof, h);
        perturb_splat(m[i], dof, -h);
        double fd = (loss_of(p) - loss_of(m)) / (2 * h);
        ++checked;
        if (grad_close(splat_grad_component(g.splats[i], dof), fd, 1e-2, 1e-4))
          ++matched;
      }
    ++scenes;
  }
  Outcome o;
  o.pass = scenes >= 20 && matched * 100 >= checked * 98;
  o.detail = std::to_string(scenes) + " scenes, " + std::to_string(matched) + "/" +
             std::to_string(checked) +
             " probes within 1e-2 rel (>= 98% required; stragglers sit on kernel "
             "cutoffs)";
  return o;
}

// ---------------------------------------------------------------- criterion 4

SplatList car200() {
  SplatList car = toy_car(34);  // 6 faces x 34
  car.resize(200);
  return car;
}

Outcome c4_closed_loop() {
  auto t0 = std::chrono::steady_clock::now();
  EnvironmentMap env = smooth_env(16, Vec3(0.5, 0.5, 0.5), Vec3(0.2, 0.15, 0.1));
  PrefilteredEnv pre = prefilter(env);
  SplatList gt = car200();

  RenderOptions ropt;
  ropt.background = BackgroundMode::kBlack;
  ropt.threads = 4;
  std::vector<TrainingFrame> frames;
  for (int i = 0; i < 24; ++i) {
    double a = 2 * std::numbers::pi * i / 24.0;
    Camera cam = look_at_camera(
        Vec3(3.2 * std::cos(a), 3.2 * std::sin(a), 0.9 + 0.5 * std::sin(2 * a)),
        Vec3::Zero(), 64, 64, 55.0, i);
    FrameBuffers fb = render(gt, cam, pre, ropt);
    TrainingFrame f;
    f.image = std::move(fb.rgb);
    f.mask = ImageU8(64, 64, 0);
    for (size_t p = 0; p < fb.acc_opacity.size(); ++p)
      if (fb.acc_opacity.data[p] > 0) f.mask.data[p] = 255;
    f.camera = cam;
    frames.push_back(std::move(f));
  }
  Camera holdout =
      look_at_camera(Vec3(3.2 * std::cos(0.41), 3.2 * std::sin(0.41), 1.4),
                     Vec3::Zero(), 64, 64, 55.0, 99);
  ImageRGB holdout_gt = render(gt, holdout, pre, ropt).rgb;

  SplatList init = gt;
  std::mt19937_64 rng(1004);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (Splat2D& s : init) {
    s.mu += 0.15 * Vec3(gauss(rng), gauss(rng), gauss(rng));
    s.rot = (s.rot * Quat(Eigen::AngleAxisd(0.5 * uni(rng), random_unit(rng))))
                .normalized();
    for (int c = 0; c < 3; ++c)
      s.material.albedo[c] = std::clamp(s.material.albedo[c] + 0.4 * uni(rng), 0.05, 0.95);
  }
  double init_psnr = psnr(render(init, holdout, pre, ropt).rgb, holdout_gt);

  TrainConfig cfg;
  cfg.iters_total = 900;
  cfg.synth_start = 1000;  // schedule off
  cfg.densify_interval = 0;
  cfg.seed = 17;
  cfg.threads = 4;
  OptimizeResult res = optimize(frames, init, env, {}, cfg);

  PrefilteredEnv fitted = prefilter(res.fitted_env);
  double final_psnr = psnr(render(res.splats, holdout, fitted, ropt).rgb, holdout_gt);
  double dt = seconds_since(t0);
  Outcome o;
  o.pass = final_psnr >= 30.0 && dt < 600.0;
  o.detail = "200 splats / 24 views, holdout PSNR " + fmt(init_psnr, 4) + " -> " +
             fmt(final_psnr, 4) + " dB (>= 30 required), " + fmt(dt, 3) +
             " s (limit 600)";
  return o;
}

// ---------------------------------------------------------------- criterion 5

Outcome c5_disentanglement() {
  EnvironmentMap env_true = smooth_env(16, Vec3(0.5, 0.5, 0.5), Vec3(0.2, 0.2, 0.2));
  PrefilteredEnv pre_true = prefilter(env_true);
  SplatList gt = toy_car(10);
  for (Splat2D& s : gt) s.material.metallic = 0.05;  // dielectric body

  RenderOptions ropt;
  ropt.background = BackgroundMode::kBlack;
  std::vector<TrainingFrame> frames;
  for (int i = 0; i < 4; ++i) {
    double a = 0.5 + 2 * std::numbers::pi * i / 4.0;
    Camera cam = look_at_camera(Vec3(3.0 * std::cos(a), 3.0 * std::sin(a), 1.0),
                                Vec3::Zero(), 40, 40, 36.0, i);
    FrameBuffers fb = render(gt, cam, pre_true, ropt);
    TrainingFrame f;
    f.image = std::move(fb.rgb);
    f.mask = ImageU8(40, 40, 0);
    for (size_t p = 0; p < fb.acc_opacity.size(); ++p)
      if (fb.acc_opacity.data[p] > 0) f.mask.data[p] = 255;
    f.camera = cam;
    frames.push_back(std::move(f));
  }

  // Brightness/albedo ambiguity: darken the init albedo and brighten the
  // scene-environment guess by the same factor, so single-environment
  // photometry is already satisfied at the wrong albedo (the scalar
  // environment scale can absorb the factor either way). Known-lighting
  // synthetic frames are what pins the albedo itself.
  double tint = 0.6;
  SplatList init = gt;
  for (Splat2D& s : init)
    for (int c = 0; c < 3; ++c)
      s.material.albedo[c] = std::clamp(s.material.albedo[c] * tint, 0.02, 0.98);
  ImageRGB guess = env_true.pixels;
  for (Vec3& p : guess.data) p /= tint;
  EnvironmentMap env_guess(std::move(guess));

  std::vector<EnvironmentMap> pool;
  pool.push_back(constant_env(8, Vec3(0.9, 0.9, 0.9)));
  pool.push_back(smooth_env(8, Vec3(0.7, 0.4, 0.3), Vec3(0.2, 0.1, 0.1)));
  pool.push_back(smooth_env(8, Vec3(0.3, 0.4, 0.7), Vec3(0.1, 0.1, 0.2)));
  pool.push_back(smooth_env(8, Vec3(0.4, 0.7, 0.4), Vec3(0.15, 0.2, 0.1)));
  std::vector<PrefilteredEnv> pool_pre;
  for (const EnvironmentMap& e : pool) pool_pre.push_back(prefilter(e));
  // ground-truth renders stand in for the neural refiner
  RefineHook hook = [&](const Camera& cam, int env_id, uint64_t) {
    RenderOptions r;
    r.background = BackgroundMode::kBlack;
    return std::optional<ImageRGB>(render(gt, cam, pool_pre[env_id], r).rgb);
  };

  TrainConfig cfg;
  cfg.iters_total = 500;
  cfg.synth_start = 100;
  cfg.synth_extra = 400;
  cfg.synth_refresh = 100;
  cfg.synth_pool = 4;
  cfg.densify_interval = 0;
  cfg.seed = 21;

  auto albedo_mae = [&](const SplatList& splats) {
    double mae = 0;
    for (size_t i = 0; i < splats.size(); ++i)
      mae += (splats[i].material.albedo - gt[i].material.albedo).cwiseAbs().sum();
    return mae / (3.0 * static_cast<double>(splats.size()));
  };

  OptimizeResult multi = optimize(frames, init, env_guess, pool, cfg, hook);
  OptimizeResult single = optimize(frames, init, env_guess, {}, cfg);
  double mae_multi = albedo_mae(multi.splats);
  double mae_single = albedo_mae(single.splats);
  Outcome o;
  o.pass = mae_multi <= 0.8 * mae_single;
  o.detail = "albedo MAE single-env " + fmt(mae_single) + ", multi-env " +
             fmt(mae_multi) + " (" +
             fmt(100.0 * (1.0 - mae_multi / std::max(mae_single, 1e-12)), 3) +
             "% reduction, >= 20% required)";
  return o;
}

// ---------------------------------------------------------------- criterion 6

Outcome c6_icp() {
  PointCloud src;
  for (const Splat2D& s : toy_car(30)) src.points.push_back(s.mu);
  int ok = 0;
  double worst_deg = 0, worst_t = 0, worst_s = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(3000 + seed);
    std::normal_distribution<double> gauss(0.0, 0.01);  // 1% of the car scale
    RigidSim3 gt;
    gt.rotation = Quat(Eigen::AngleAxisd(10.0 * std::numbers::pi / 180.0,
                                         random_unit(rng)));
    gt.translation = 0.3 * random_unit(rng);
    gt.scale = 1.1;
    PointCloud dst;
    for (const Vec3& p : src.points)
      dst.points.push_back(gt.apply(p) + Vec3(gauss(rng), gauss(rng), gauss(rng)));

    // standard centroid init: identity rotation/scale, mean displacement
    Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
    for (const Vec3& p : src.points) cs += p;
    for (const Vec3& p : dst.points) cd += p;
    RigidSim3 init;
    init.translation = (cd - cs) / static_cast<double>(src.points.size());

    IcpResult res = icp_refine(src, dst, init);
    double deg = res.transform.rotation.angularDistance(gt.rotation) * 180.0 /
                 std::numbers::pi;
    double terr = (res.transform.translation - gt.translation).norm();
    double serr = std::abs(res.transform.scale - gt.scale) / gt.scale;
    worst_deg = std::max(worst_deg, deg);
    worst_t = std::max(worst_t, terr);
    worst_s = std::max(worst_s, serr);
    if (deg <= 0.5 && terr <= 0.02 && serr <= 0.01) ++ok;
  }
  Outcome o;
  o.pass = ok == 50;
  o.detail = std::to_string(ok) + "/50 seeds (worst " + fmt(worst_deg, 3) + " deg / " +
             fmt(worst_t, 3) + " m / " + fmt(100 * worst_s, 3) +
             "% vs 0.5 deg / 0.02 m / 1%)";
  return o;
}

// ---------------------------------------------------------------- criterion 7

Outcome c7_env_scale() {
  EnvironmentMap env = smooth_env(16, Vec3(0.5, 0.5, 0.5), Vec3(0.2, 0.1, 0.1));
  PrefilteredEnv pre = prefilter(env);
  Camera cam = look_at_camera(Vec3(0, -3.5, 1.2), Vec3::Zero(), 48, 36, 40.0);
  RenderOptions ropt;
  ropt.background = BackgroundMode::kEnvLookup;
  ImageRGB rendered = render(toy_car(8), cam, pre, ropt).rgb;

  ImageRGB doubled = rendered;
  for (Vec3& p : doubled.data) p *= 2.0;
  double s2 = fit_env_scale(rendered, doubled);
  bool exact2 = s2 == 2.0;

  std::mt19937_64 rng(1007);
  std::normal_distribution<double> gauss(0.0, 0.05);
  ImageRGB noisy = rendered;
  for (Vec3& p : noisy.data) {
    p *= 1.37;
    p += Vec3(gauss(rng), gauss(rng), gauss(rng));
  }
  double closed = fit_env_scale(rendered, noisy);
  auto sse = [&](double s) {
    double total = 0;
    for (size_t i = 0; i < rendered.size(); ++i)
      total += (s * rendered.data[i] - noisy.data[i]).squaredNorm();
    return total;
  };
  double best = 0, best_sse = std::numeric_limits<double>::max();
  for (double s = 0.5; s <= 2.5; s += 1e-5) {
    double v = sse(s);
    if (v < best_sse) {
      best_sse = v;
      best = s;
    }
  }
  double rel = std::abs(closed - best) / best;
  Outcome o;
  o.pass = exact2 && rel <= 1e-3;
  o.detail = "2x reference -> s = " + fmt(s2, 17) + " (exact), grid-search gap " +
             fmt(rel) + " (tol 1e-3)";
  return o;
}

// ---------------------------------------------------------------- criterion 8

Outcome c8_retrieval() {
  std::vector<std::string> colors = {"red", "blue", "white", "black", "grey", "green"};
  std::mt19937_64 rng(1008);
  std::uniform_real_distribution<float> uni(-1.f, 1.f);
  int n = 10000, dim = 32;
  std::vector<BankEntry> entries(n);
  for (int i = 0; i < n; ++i) {
    entries[i].instance_id = "car_" + std::to_string(i);
    entries[i].color = colors[rng() % colors.size()];
    entries[i].embedding.resize(dim);
    for (int d = 0; d < dim; ++d) entries[i].embedding[d] = uni(rng);
  }
  MemoryBank bank = build_bank(entries);

  int mismatches = 0, color_violations = 0;
  for (int q = 0; q < 1000; ++q) {
    Query query;
    query.color = (q % 10 == 0) ? "unknown" : colors[rng() % colors.size()];
    query.embedding.resize(dim);
    for (int d = 0; d < dim; ++d) query.embedding[d] = uni(rng);
    int k = 1 + static_cast<int>(rng() % 10);
    std::vector<RetrievalHit> got = retrieve(bank, query, k);

    // reference: linear scan with the same ordering rule
    bool partitioned = false;
    for (const BankEntry& e : entries) partitioned |= e.color == query.color;
    std::vector<RetrievalHit> want;
    for (int i = 0; i < n; ++i) {
      if (partitioned && entries[i].color != query.color) continue;
      want.push_back({entries[i].instance_id,
                      static_cast<double>((entries[i].embedding - query.embedding).norm()),
                      i});
    }
    std::sort(want.begin(), want.end(),
              [](const RetrievalHit& a, const RetrievalHit& b) {
                return a.distance != b.distance ? a.distance < b.distance
                                                : a.instance_id < b.instance_id;
              });
    if (static_cast<int>(want.size()) > k) want.resize(k);

    if (got.size() != want.size()) {
      ++mismatches;
      continue;
    }
    for (size_t i = 0; i < got.size(); ++i)
      if (got[i].entry_index != want[i].entry_index) {
        ++mismatches;
        break;
      }
    if (partitioned)
      for (const RetrievalHit& h : got)
        if (entries[h.entry_index].color != query.color) ++color_violations;
  }
  Outcome o;
  o.pass = mismatches == 0 && color_violations == 0;
  o.detail = "1000 queries vs 10k bank: " + std::to_string(mismatches) +
             " order mismatches, " + std::to_string(color_violations) +
             " color violations";
  return o;
}

// ---------------------------------------------------------------- criterion 9

Outcome c9_metric_fixtures() {
  std::vector<std::string> fails;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) fails.push_back(what);
  };
  auto det = [](int64_t id, double x, double y, double w, double h) {
    Detection d;
    d.id = id;
    d.x = x;
    d.y = y;
    d.w = w;
    d.h = h;
    return d;
  };

  {  // MOTA 0.7: one frame, 10 gt, 8 matched, 2 missed, 1 spurious
    DetectionSet gt, pred;
    gt.frames.emplace_back();
    pred.frames.emplace_back();
    for (int i = 0; i < 10; ++i) gt.frames[0].push_back(det(i, 20.0 * i, 0, 10, 10));
    for (int i = 0; i < 8; ++i) pred.frames[0].push_back(det(i, 20.0 * i, 0, 10, 10));
    pred.frames[0].push_back(det(99, 500, 500, 10, 10));
    MatchResult m = match_frames(gt, pred, 0.5);
    expect(std::abs(mota(m.counts) - 0.7) < 1e-12, "MOTA fixture != 0.7");
  }
  {  // MOTP boundary: single pair at IoU exactly equal to the threshold
    DetectionSet gt, pred;
    gt.frames.push_back({det(1, 0, 0, 2, 2)});
    pred.frames.push_back({det(1, 1, 0, 2, 2)});  // IoU 1/3
    MatchResult m = match_frames(gt, pred, 1.0 / 3.0);
    expect(m.matched_ious.size() == 1, "boundary pair not matched");
    expect(std::abs(motp(m) - (1.0 - 1.0 / 3.0)) < 1e-12, "MOTP != 1 - iou_thresh");
  }
  {  // IDF1 perfect tracking
    DetectionSet gt, pred;
    for (int t = 0; t < 5; ++t) {
      gt.frames.push_back({det(1, 10.0 * t, 0, 10, 10), det(2, 200 + 10.0 * t, 0, 10, 10)});
      pred.frames.push_back({det(8, 10.0 * t, 0, 10, 10), det(9, 200 + 10.0 * t, 0, 10, 10)});
    }
    expect(std::abs(idf1(gt, pred) - 1.0) < 1e-12, "IDF1 perfect != 1");
  }
  expect(std::abs(box_iou(det(0, 0, 0, 2, 2), det(1, 1, 0, 2, 2)) - 1.0 / 3.0) < 1e-12,
         "half-overlap IoU != 1/3");
  {  // FID with equal covariances
    FeatureStats a, b;
    a.mean = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd r = Eigen::MatrixXd::Random(4, 4);
    a.covariance = r * r.transpose() + Eigen::MatrixXd::Identity(4, 4);
    a.n = 100;
    b = a;
    b.mean = Eigen::VectorXd::LinSpaced(4, 0.5, 2.0);
    expect(std::abs(fid(a, b) - b.mean.squaredNorm()) < 1e-6,
           "FID equal-cov != |mean gap|^2");
  }
  {  // sliced W1 identical and shifted 1-D sets
    std::vector<Eigen::VectorXd> a, b;
    std::mt19937_64 rng(1009);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < 64; ++i) {
      Eigen::VectorXd v(1);
      v[0] = uni(rng);
      a.push_back(v);
      Eigen::VectorXd w = v;
      w[0] += 0.81;
      b.push_back(w);
    }
    expect(sliced_wasserstein(a, a, 16, 3) == 0.0, "W1 identical != 0");
    expect(std::abs(sliced_wasserstein(a, b, 16, 3) - 0.81) < 1e-12,
           "W1 1-D shift != |c|");
  }
  {  // CIELAB white point
    Vec3 lab = rgb_to_cielab(Vec3::Ones());
    expect((lab - Vec3(100, 0, 0)).cwiseAbs().maxCoeff() < 0.05,
           "CIELAB white off by > 0.05");
  }
  Outcome o;
  o.pass = fails.empty();
  o.detail = fails.empty() ? "7 fixtures exact" : "failed: " + fails.front();
  return o;
}

// --------------------------------------------------------------- criterion 10

uint64_t fnv1a(const std::vector<uint8_t>& bytes, uint64_t h = 1469598103934665603ULL) {
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t hash_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("missing output " + p.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return fnv1a(bytes);
}

int run(const std::string& cmd) {
  int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return rc;
}

Outcome c10_cli_determinism(const std::string& cli) {
  Outcome o;
  if (cli.empty()) {
    o.detail = "CLI binary path not supplied";
    return o;
  }
  std::string cli_abs = fs::absolute(cli).string();
  fs::path root = fs::temp_directory_path() / "resplat_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  // --- shared fixtures
  EnvironmentMap env = smooth_env(16, Vec3(0.5, 0.5, 0.5), Vec3(0.2, 0.15, 0.1));
  PrefilteredEnv pre = prefilter(env);
  write_env_pfm((root / "env.pfm").string(), env);
  SplatList gt = toy_car(6);
  RenderOptions ropt;
  ropt.background = BackgroundMode::kBlack;

  SceneLayout layout;
  TrainingManifest manifest;
  manifest.layout_path = "layout.json";
  manifest.env_path = "env.pfm";
  for (int i = 0; i < 4; ++i) {
    double a = 2 * std::numbers::pi * i / 4.0;
    Camera cam = look_at_camera(Vec3(3.2 * std::cos(a), 3.2 * std::sin(a), 1.0),
                                Vec3::Zero(), 32, 32, 28.0, i);
    layout.cameras.push_back(cam);
    FrameBuffers fb = render(gt, cam, pre, ropt);
    std::string img = "f" + std::to_string(i) + ".pfm";
    std::string msk = "m" + std::to_string(i) + ".png";
    write_pfm((root / img).string(), fb.rgb);
    ImageU8 mask(32, 32, 0);
    for (size_t p = 0; p < fb.acc_opacity.size(); ++p)
      if (fb.acc_opacity.data[p] > 0) mask.data[p] = 255;
    write_png_mask((root / msk).string(), mask);
    manifest.entries.push_back({img, msk, "", i});
  }
  Track track;
  track.track_id = 5;
  TrackFrame tf;
  tf.t = 0;
  tf.box.center = Vec3(0.5, 0, 0);
  tf.box.half_extents = Vec3(1.0, 0.45, 0.35);
  track.frames.push_back(tf);
  layout.tracks.push_back(track);
  write_layout((root / "layout.json").string(), layout);
  write_manifest((root / "manifest.json").string(), manifest);

  {
    std::ofstream cfg(root / "config.ini");
    cfg << "seed = 5\nthreads = 1\n[reconstruct]\niters_total = 30\n"
           "synth_start = 100\ndensify_interval = 0\n[render]\nbackground = env\n";
  }
  {
    std::ofstream entries(root / "entries.jsonl");
    std::ofstream queries(root / "queries.jsonl");
    std::mt19937_64 rng(1010);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<std::string> colors = {"red", "blue", "white"};
    for (int i = 0; i < 20; ++i) {
      json emb = json::array();
      for (int d = 0; d < 8; ++d) emb.push_back(uni(rng));
      entries << json{{"instance_id", "car_" + std::to_string(i)},
                      {"color", colors[i % 3]},
                      {"embedding", emb}}
                     .dump()
              << "\n";
    }
    for (int i = 0; i < 5; ++i) {
      json emb = json::array();
      for (int d = 0; d < 8; ++d) emb.push_back(uni(rng));
      queries << json{{"color", colors[i % 3]}, {"embedding", emb}}.dump() << "\n";
    }
  }
  {
    std::ofstream gtd(root / "gt.jsonl");
    std::ofstream pd(root / "pred.jsonl");
    for (int t = 0; t < 3; ++t) {
      gtd << json{{"frame", t}, {"id", 1}, {"bbox", {10.0 * t, 0.0, 10.0, 10.0}}}.dump()
          << "\n";
      pd << json{{"frame", t}, {"id", 4}, {"bbox", {10.0 * t + 1, 0.0, 10.0, 10.0}}}.dump()
         << "\n";
    }
  }

  std::string base = "cd " + root.string() + " && " + cli_abs + " ";
  std::string cfg_flag = " --config config.ini ";
  struct Stage {
    std::string name, cmd;
    std::vector<std::string> outputs;
  };
  std::vector<Stage> stages = {
      {"reconstruct",
       base + "reconstruct --manifest manifest.json --holdout 3 --init-count 150" +
           cfg_flag + "--out outrec",
       {"outrec/asset.rspl", "outrec/env_fitted.pfm", "outrec/loss.csv"}},
      {"postprocess",
       base + "postprocess --splats outrec/asset.rspl --color red --model wagon" +
           cfg_flag + "--out outpost",
       {"outpost/asset.car"}},
      {"bank-build", base + "bank-build --entries entries.jsonl" + cfg_flag + "--out outbank",
       {"outbank/manifest.jsonl", "outbank/embeddings.bin", "outbank/embeddings.json"}},
      {"retrieve",
       base + "retrieve --bank outbank --query queries.jsonl -k 3" + cfg_flag +
           "--out outret",
       {"outret/hits.jsonl"}},
      {"insert",
       base + "insert --layout layout.json --env env.pfm --asset outpost/asset.car:5 "
              "--ref-image f0.pfm --ref-frame 0 --ref-camera 0" +
           cfg_flag + "--out outins",
       {"outins/scene.json"}},
      {"render",
       base + "render --scene outins/scene.json --frames 0 --camera 0" + cfg_flag +
           "--out outren",
       {"outren/frame_0000.pfm", "outren/frame_0000.png"}},
      {"evaluate",
       base + "evaluate --gt gt.jsonl --pred pred.jsonl --images-a outren --images-b "
              "outren --feats-a outbank --feats-b outbank" +
           cfg_flag + "--out outev",
       {"outev/report.json"}},
  };

  for (const Stage& s : stages) {
    if (run(s.cmd) != 0) {
      o.detail = "stage '" + s.name + "' failed on the first run";
      return o;
    }
    std::vector<uint64_t> first;
    for (const std::string& f : s.outputs) first.push_back(hash_file(root / f));
    if (run(s.cmd) != 0) {
      o.detail = "stage '" + s.name + "' failed on the second run";
      return o;
    }
    for (size_t i = 0; i < s.outputs.size(); ++i)
      if (hash_file(root / s.outputs[i]) != first[i]) {
        o.detail = "stage '" + s.name + "' output " + s.outputs[i] +
                   " changed between identical runs";
        return o;
      }
  }
  o.pass = true;
  o.detail = "7 stages, every output byte-identical across reruns";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  struct Entry {
    int id;
    std::string name;
    Outcome (*fn)();
  };
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"shading split-sum vs Monte-Carlo reference", c1_shading_oracle},
      {"BRDF reciprocity and white-furnace energy", c2_brdf_physics},
      {"rasterizer + objective gradients vs finite differences", c3_gradients},
      {"reconstruction closed loop to 30 dB holdout PSNR", c4_closed_loop},
      {"multi-environment training disentangles albedo", c5_disentanglement},
      {"ICP recovers a noisy similarity transform", c6_icp},
      {"closed-form environment-scale fit", c7_env_scale},
      {"retrieval exactness and color soundness", c8_retrieval},
      {"metric fixtures", c9_metric_fixtures},
      {"CLI stage determinism", [&cli] { return c10_cli_determinism(cli); }},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << std::setw(2) << (i + 1) << ": "
              << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << " — "
              << o.detail << " [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
    if (!o.pass) ++failures;
  }
  if (failures) std::cout << failures << " criterio(n/a) failed" << std::endl;
  return failures == 0 ? 0 : 1;
}
