// resplat: car-asset reconstruction, retrieval and relit scene composition.
//
// Exit codes: 0 ok, 2 input/config error, 3 optimizer divergence,
// 4 render failure, 5 metric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "resplat/config.hpp"
#include "resplat/retrieval.hpp"
#include "resplat/scene_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace resplat;

namespace {

constexpr int kExitInput = 2, kExitDiverged = 3, kExitRender = 4, kExitMetric = 5;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<uint64_t> seed;
  std::optional<int> threads;

  PipelineConfig resolve() const {
    PipelineConfig cfg =
        config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    cfg.reconstruct.seed = cfg.seed;
    cfg.reconstruct.threads = cfg.threads;
    return cfg;
  }
};

void add_globals(CLI::App* cmd, Globals& g) {
  cmd->add_option("--config", g.config_path, "Config file (ini-style key = value)");
  cmd->add_option("--seed", g.seed, "Override the config seed");
  cmd->add_option("--out", g.out_dir, "Output directory");
  cmd->add_option("--threads", g.threads, "Worker thread count");
  cmd->footer("Config keys and defaults:\n" + dump_config(PipelineConfig{}));
}

std::string out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

void emit_snapshot(const Globals& g, const PipelineConfig& cfg) {
  write_config_snapshot(out_path(g, "config_resolved.ini"), cfg);
}

void write_image_pair(const std::string& stem, const ImageRGB& img) {
  write_pfm(stem + ".pfm", img);
  write_png_tonemapped(stem + ".png", img);
}

RenderOptions render_options(const PipelineConfig& cfg) {
  RenderOptions opt;
  if (cfg.render.background == "env")
    opt.background = BackgroundMode::kEnvLookup;
  else if (cfg.render.background == "black")
    opt.background = BackgroundMode::kBlack;
  else
    throw ConfigError("render.background must be 'black' or 'env'");
  opt.env_scale = cfg.render.env_scale;
  opt.threads = cfg.threads;
  return opt;
}

SplatList random_init(int count, double radius, uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  SplatList splats;
  for (int i = 0; i < count; ++i) {
    Splat2D s;
    Vec3 p;
    do {
      p = Vec3(uni(rng), uni(rng), uni(rng));
    } while (p.squaredNorm() > 1.0);
    s.mu = radius * p;
    Vec3 axis(uni(rng), uni(rng), uni(rng));
    if (axis.norm() < 1e-6) axis = Vec3::UnitZ();
    s.rot = Quat(Eigen::AngleAxisd(uni(rng) * std::numbers::pi, axis.normalized()));
    s.sx = s.sy = 0.1 * radius;
    s.opacity_logit = logit(0.1);
    s.material.albedo = Vec3::Constant(0.5);
    splats.push_back(s);
  }
  return splats;
}

// ---------------------------------------------------------------------------

int cmd_reconstruct(const Globals& g, const std::string& manifest_path,
                    const std::string& init_path,
                    const std::vector<std::string>& env_pool_paths, int init_count,
                    double init_radius, const std::vector<int>& holdout) {
  PipelineConfig cfg = g.resolve();
  emit_snapshot(g, cfg);

  if (!fs::exists(manifest_path)) throw InputError("missing manifest " + manifest_path);
  std::string base = fs::path(manifest_path).parent_path().string();
  TrainingManifest manifest = read_manifest(manifest_path);
  std::vector<TrainingFrame> frames = load_training_frames(manifest, base);
  if (manifest.env_path.empty()) throw InputError("manifest has no env entry");
  std::string env_file = fs::path(manifest.env_path).is_absolute()
                             ? manifest.env_path
                             : (fs::path(base) / manifest.env_path).string();
  if (!fs::exists(env_file)) throw InputError("missing env map " + env_file);
  EnvironmentMap env_init = read_env_pfm(env_file);

  std::vector<EnvironmentMap> pool;
  for (const std::string& p : env_pool_paths) {
    if (!fs::exists(p)) throw InputError("missing env map " + p);
    pool.push_back(read_env_pfm(p));
  }

  std::vector<TrainingFrame> train;
  std::vector<TrainingFrame> held;
  for (size_t i = 0; i < frames.size(); ++i) {
    if (std::find(holdout.begin(), holdout.end(), static_cast<int>(i)) != holdout.end())
      held.push_back(std::move(frames[i]));
    else
      train.push_back(std::move(frames[i]));
  }
  if (train.empty()) throw InputError("no training frames left after holdout");

  SplatList init;
  if (!init_path.empty()) {
    if (!fs::exists(init_path)) throw InputError("missing init splats " + init_path);
    init = read_splats(init_path);
  } else {
    init = random_init(init_count, init_radius, cfg.seed);
  }

  OptimizeResult res = optimize(train, init, env_init, pool, cfg.reconstruct);
  round_trip_f32(res.splats);
  write_splats(out_path(g, "asset.rspl"), res.splats);
  write_env_pfm(out_path(g, "env_fitted.pfm"), res.fitted_env);
  std::ofstream csv(out_path(g, "loss.csv"));
  csv << "iter,loss\n";
  csv.precision(17);
  for (size_t i = 0; i < res.loss_history.size(); ++i)
    csv << i << "," << res.loss_history[i] << "\n";

  if (!held.empty()) {
    PrefilteredEnv pre = prefilter(res.fitted_env);
    RenderOptions opt;
    opt.background = BackgroundMode::kBlack;
    opt.threads = cfg.threads;
    for (size_t i = 0; i < held.size(); ++i) {
      FrameBuffers fb = render(res.splats, held[i].camera, pre, opt);
      std::cout << "holdout " << i << " PSNR " << psnr(fb.rgb, held[i].image)
                << " dB\n";
    }
  }
  std::cout << "wrote " << out_path(g, "asset.rspl") << " (" << res.splats.size()
            << " splats), env scale " << res.env_scale << "\n";
  return 0;
}

int cmd_postprocess(const Globals& g, const std::string& splat_path,
                    const std::string& manifest_path, const AssetMetadata& meta) {
  PipelineConfig cfg = g.resolve();
  emit_snapshot(g, cfg);
  if (!fs::exists(splat_path)) throw InputError("missing splats " + splat_path);
  SplatList splats = read_splats(splat_path);

  if (!manifest_path.empty()) {
    if (!fs::exists(manifest_path)) throw InputError("missing manifest " + manifest_path);
    std::string base = fs::path(manifest_path).parent_path().string();
    TrainingManifest manifest = read_manifest(manifest_path);
    std::vector<TrainingFrame> frames = load_training_frames(manifest, base);
    std::vector<Camera> cameras;
    std::vector<ImageU8> masks;
    for (TrainingFrame& f : frames) {
      cameras.push_back(f.camera);
      masks.push_back(std::move(f.mask));
    }
    splats = remove_stray_splats(splats, cameras, masks, cfg.postprocess.keep_fraction);
  }

  FrontHint hint = FrontHint::kNone;
  if (cfg.postprocess.front_hint == "+x")
    hint = FrontHint::kPositiveX;
  else if (cfg.postprocess.front_hint == "-x")
    hint = FrontHint::kNegativeX;
  else if (cfg.postprocess.front_hint != "none")
    throw ConfigError("postprocess.front_hint must be none, +x or -x");

  CarAsset asset = canonicalize(splats, hint, meta);
  write_asset(out_path(g, "asset.car"), asset);
  std::cout << "wrote " << out_path(g, "asset.car") << " (" << asset.splats.size()
            << " splats, wheel line z " << asset.wheel_line_z << ")\n";
  return 0;
}

int cmd_bank_build(const Globals& g, const std::string& entries_path) {
  PipelineConfig cfg = g.resolve();
  emit_snapshot(g, cfg);
  std::ifstream f(entries_path);
  if (!f) throw InputError("missing entries file " + entries_path);
  std::vector<BankEntry> entries;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    BankEntry e;
    e.instance_id = j.at("instance_id");
    e.color = j.at("color");
    e.brand = j.value("brand", "");
    e.model = j.value("model", "");
    e.car_type = j.value("car_type", "");
    e.asset_path = j.value("asset_path", "");
    std::vector<float> emb = j.at("embedding").get<std::vector<float>>();
    e.embedding = Eigen::Map<Eigen::VectorXf>(emb.data(), static_cast<Eigen::Index>(emb.size()));
    entries.push_back(std::move(e));
  }
  build_bank(entries);  // validates dimensions before anything hits disk
  save_bank(g.out_dir, entries);
  std::cout << "wrote bank with " << entries.size() << " entries to " << g.out_dir
            << "\n";
  return 0;
}

int cmd_retrieve(const Globals& g, const std::string& bank_dir,
                 const std::string& query_path, std::optional<int> k_flag) {
  PipelineConfig cfg = g.resolve();
  emit_snapshot(g, cfg);
  MemoryBank bank = load_bank(bank_dir);
  std::ifstream f(query_path);
  if (!f) throw InputError("missing query file " + query_path);
  int k = k_flag.value_or(cfg.retrieve.k);

  std::ofstream out(out_path(g, "hits.jsonl"));
  std::string line;
  int qi = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Query q;
    std::vector<float> emb = j.at("embedding").get<std::vector<float>>();
    q.embedding = Eigen::Map<Eigen::VectorXf>(emb.data(), static_cast<Eigen::Index>(emb.size()));
    q.color = j.value("color", "");
    for (const RetrievalHit& h : retrieve(bank, q, k))
      out << json{{"query", qi},
                  {"instance_id", h.instance_id},
                  {"distance", h.distance},
                  {"entry_index", h.entry_index}}
                 .dump()
          << "\n";
    ++qi;
  }
  std::cout << "wrote " << out_path(g, "hits.jsonl") << " (" << qi << " queries)\n";
  return 0;
}

int cmd_insert(const Globals& g, const std::string& layout_path,
               const std::string& env_path, const std::string& background_path,
               const std::vector<std::string>& asset_specs,
               const std::string& ref_image_path, int64_t ref_frame, int ref_camera) {
  PipelineConfig cfg = g.resolve();
  emit_snapshot(g, cfg);
  if (!fs::exists(layout_path)) throw InputError("missing layout " + layout_path);
  if (!fs::exists(env_path)) throw InputError("missing env map " + env_path);

  SceneManifest manifest;
  manifest.layout_path = fs::absolute(layout_path).string();
  manifest.env_path = fs::absolute(env_path).string();
  manifest.env_scale = cfg.render.env_scale;
  if (!background_path.empty()) {
    if (!fs::exists(background_path))
      throw InputError("missing background splats " + background_path);
    manifest.background_path = fs::absolute(background_path).string();
  }
  for (const std::string& spec : asset_specs) {
    size_t colon = spec.rfind(':');
    if (colon == std::string::npos)
      throw InputError("asset spec must be path:track_id, got " + spec);
    SceneAssetRef ref;
    ref.asset_path = fs::absolute(spec.substr(0, colon)).string();
    ref.track_id = std::stoll(spec.substr(colon + 1));
    ref.shadow = cfg.insert.shadow;
    if (!fs::exists(ref.asset_path)) throw InputError("missing asset " + ref.asset_path);
    manifest.assets.push_back(std::move(ref));
  }

  if (cfg.insert.fit_env && !ref_image_path.empty()) {
    if (!fs::exists(ref_image_path))
      throw InputError("missing reference image " + ref_image_path);
    ImageRGB ref = ref_image_path.ends_with(".pfm") ? read_pfm(ref_image_path)
                                                    : read_png_linear(ref_image_path);
    SceneGraph scene = load_scene(manifest, "");
    const Camera* cam = nullptr;
    for (const Camera& c : scene.cameras)
      if (c.id == ref_camera) cam = &c;
    if (!cam) throw InputError("layout has no camera id " + std::to_string(ref_camera));
    PrefilteredEnv pre = prefilter(scene.env);
    try {
      FrameBuffers fb = compose(scene, pre, ref_frame, *cam, render_options(cfg));
      manifest.env_scale *= fit_env_scale(fb.rgb, ref);
    } catch (const std::runtime_error& e) {
      throw InputError(e.what());
    }
  }

  write_scene_manifest(out_path(g, "scene.json"), manifest);
  std::cout << "wrote " << out_path(g, "scene.json") << " (env scale "
            << manifest.env_scale << ")\n";
  return 0;
}

int cmd_render(const Globals& g, const std::string& scene_path,
               std::vector<int64_t> frames, int camera_id) {
  PipelineConfig cfg = g.resolve();
  emit_snapshot(g, cfg);
  if (!fs::exists(scene_path)) throw InputError("missing scene manifest " + scene_path);
  SceneManifest manifest = read_scene_manifest(scene_path);
  std::string base = fs::path(scene_path).parent_path().string();
  SceneGraph scene = load_scene(manifest, base);
  const Camera* cam = nullptr;
  for (const Camera& c : scene.cameras)
    if (c.id == camera_id) cam = &c;
  if (!cam) throw InputError("layout has no camera id " + std::to_string(camera_id));
  if (frames.empty()) frames.push_back(0);

  PrefilteredEnv pre = prefilter(scene.env);
  RenderOptions opt = render_options(cfg);
  for (int64_t f : frames) {
    FrameBuffers fb;
    try {
      fb = compose(scene, pre, f, *cam, opt);
    } catch (const std::exception& e) {
      std::cerr << "error: render failed on frame " << f << ": " << e.what() << "\n";
      return kExitRender;
    }
    char name[64];
    std::snprintf(name, sizeof(name), "frame_%04lld", static_cast<long long>(f));
    write_image_pair(out_path(g, name), fb.rgb);
  }
  std::cout << "rendered " << frames.size() << " frame(s) to " << g.out_dir << "\n";
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& gt_path,
                 const std::string& pred_path, const std::string& img_a,
                 const std::string& img_b, const std::string& feats_a,
                 const std::string& feats_b) {
  PipelineConfig cfg = g.resolve();
  emit_snapshot(g, cfg);
  std::map<std::string, double> report;

  auto load_feats = [](const std::string& dir) {
    std::ifstream hdr(dir + "/embeddings.json");
    if (!hdr) throw InputError("missing embeddings.json in " + dir);
    json h = json::parse(hdr);
    Eigen::Index rows = h.at("rows"), dim = h.at("dim");
    std::ifstream bin(dir + "/embeddings.bin", std::ios::binary);
    if (!bin) throw InputError("missing embeddings.bin in " + dir);
    std::vector<float> flat(static_cast<size_t>(rows * dim));
    bin.read(reinterpret_cast<char*>(flat.data()),
             static_cast<std::streamsize>(flat.size() * sizeof(float)));
    if (!bin && rows > 0) throw InputError("truncated embeddings.bin in " + dir);
    Eigen::MatrixXd m(rows, dim);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = flat[static_cast<size_t>(r * dim + c)];
    return m;
  };

  try {
    if (!gt_path.empty() || !pred_path.empty()) {
      if (gt_path.empty() || pred_path.empty())
        throw InputError("tracking metrics need both --gt and --pred");
      DetectionSet gt = read_detections(gt_path);
      DetectionSet pred = read_detections(pred_path);
      MatchResult match = match_frames(gt, pred, cfg.evaluate.iou_thresh);
      report["MOTA"] = mota(match.counts);
      MotpMode mode = MotpMode::kOneMinusIou;
      if (cfg.evaluate.motp_mode == "center_distance")
        mode = MotpMode::kCenterDistance;
      else if (cfg.evaluate.motp_mode != "one_minus_iou")
        throw ConfigError("evaluate.motp_mode must be one_minus_iou or center_distance");
      report["MOTP"] = motp(match, mode);
      report["IDF1"] = idf1(gt, pred, cfg.evaluate.iou_thresh);
      if (!match.matched_ious.empty()) {
        double sum = 0;
        for (double v : match.matched_ious) sum += v;
        report["IoU"] = sum / static_cast<double>(match.matched_ious.size());
      }
    }
    if (!img_a.empty() || !img_b.empty()) {
      if (img_a.empty() || img_b.empty())
        throw InputError("color metrics need both --images-a and --images-b");
      auto gather = [&](const std::string& dir) {
        std::vector<Vec3> pts;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
          if (e.path().extension() == ".pfm") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw InputError("no .pfm images in " + dir);
        int stride = std::max(1, cfg.evaluate.w1_pixel_stride);
        for (const fs::path& p : files) {
          std::vector<Vec3> lab = image_to_cielab(read_pfm(p.string()));
          for (size_t i = 0; i < lab.size(); i += static_cast<size_t>(stride))
            pts.push_back(lab[i]);
        }
        return pts;
      };
      CielabSlicedW1 w1 = cielab_sliced_w1(gather(img_a), gather(img_b),
                                           cfg.evaluate.w1_projections, cfg.seed);
      report["W1"] = w1.w1;
      report["W1_L"] = w1.w1_l;
      report["W1_ab"] = w1.w1_ab;
    }
    if (!feats_a.empty() || !feats_b.empty()) {
      if (feats_a.empty() || feats_b.empty())
        throw InputError("distribution metrics need both --feats-a and --feats-b");
      Eigen::MatrixXd fa = load_feats(feats_a), fb = load_feats(feats_b);
      report["FID"] = fid(compute_stats(fa), compute_stats(fb));
      report["KIDx1e3"] = 1e3 * kid(fa, fb);
    }
  } catch (const InputError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    std::cerr << "error: metric computation failed: " << e.what() << "\n";
    return kExitMetric;
  }
  if (report.empty()) throw InputError("evaluate: no inputs given");

  write_metric_report(out_path(g, "report.json"), report);
  for (const auto& [k, v] : report) std::cout << k << " = " << v << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resplat: relightable splat car assets, retrieval and scene composition"};
  app.require_subcommand(1);

  Globals g;

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "Optimize splats from a training manifest");
  std::string rec_manifest, rec_init;
  std::vector<std::string> rec_pool;
  std::vector<int> rec_holdout;
  int rec_init_count = 500;
  double rec_init_radius = 1.0;
  rec->add_option("--manifest", rec_manifest, "Training manifest JSON")->required();
  rec->add_option("--init", rec_init, "Initial splats (RSPL); random if omitted");
  rec->add_option("--env-pool", rec_pool, "Relighting environment PFMs");
  rec->add_option("--holdout", rec_holdout, "Manifest frame indices held out for PSNR");
  rec->add_option("--init-count", rec_init_count, "Random-init splat count");
  rec->add_option("--init-radius", rec_init_radius, "Random-init sphere radius");
  add_globals(rec, g);

  // postprocess
  auto* post = app.add_subcommand("postprocess", "Strip strays and canonicalize an asset");
  std::string post_splats, post_manifest;
  AssetMetadata post_meta;
  post->add_option("--splats", post_splats, "Input RSPL")->required();
  post->add_option("--manifest", post_manifest, "Training manifest for stray removal");
  post->add_option("--color", post_meta.color, "Asset color tag");
  post->add_option("--brand", post_meta.brand, "Asset brand tag");
  post->add_option("--model", post_meta.model, "Asset model tag");
  post->add_option("--type", post_meta.type, "Asset body-type tag");
  add_globals(post, g);

  // bank-build
  auto* bank = app.add_subcommand("bank-build", "Build the embedding memory bank");
  std::string bank_entries;
  bank->add_option("--entries", bank_entries, "JSONL with inline embeddings")->required();
  add_globals(bank, g);

  // retrieve
  auto* ret = app.add_subcommand("retrieve", "Nearest neighbors from the bank");
  std::string ret_bank, ret_query;
  std::optional<int> ret_k;
  ret->add_option("--bank", ret_bank, "Bank directory")->required();
  ret->add_option("--query", ret_query, "Query JSONL")->required();
  ret->add_option("-k,--k", ret_k, "Hits per query");
  add_globals(ret, g);

  // insert
  auto* ins = app.add_subcommand("insert", "Assemble a scene manifest");
  std::string ins_layout, ins_env, ins_bg, ins_ref;
  std::vector<std::string> ins_assets;
  int64_t ins_ref_frame = 0;
  int ins_ref_camera = 0;
  ins->add_option("--layout", ins_layout, "Camera/track layout JSON")->required();
  ins->add_option("--env", ins_env, "Environment PFM")->required();
  ins->add_option("--background", ins_bg, "Background splats (RSPL)");
  ins->add_option("--asset", ins_assets, "Asset placement as path:track_id");
  ins->add_option("--ref-image", ins_ref, "Reference image for env-scale fitting");
  ins->add_option("--ref-frame", ins_ref_frame, "Frame index of the reference image");
  ins->add_option("--ref-camera", ins_ref_camera, "Camera id of the reference image");
  add_globals(ins, g);

  // render
  auto* ren = app.add_subcommand("render", "Render scene frames");
  std::string ren_scene;
  std::vector<int64_t> ren_frames;
  int ren_camera = 0;
  ren->add_option("--scene", ren_scene, "Scene manifest JSON")->required();
  ren->add_option("--frames", ren_frames, "Frame indices (default 0)");
  ren->add_option("--camera", ren_camera, "Camera id");
  add_globals(ren, g);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Tracking / color / distribution metrics");
  std::string ev_gt, ev_pred, ev_img_a, ev_img_b, ev_feats_a, ev_feats_b;
  ev->add_option("--gt", ev_gt, "Ground-truth detections JSONL");
  ev->add_option("--pred", ev_pred, "Predicted detections JSONL");
  ev->add_option("--images-a", ev_img_a, "Directory of PFMs (reference)");
  ev->add_option("--images-b", ev_img_b, "Directory of PFMs (candidate)");
  ev->add_option("--feats-a", ev_feats_a, "Feature matrix directory (reference)");
  ev->add_option("--feats-b", ev_feats_b, "Feature matrix directory (candidate)");
  add_globals(ev, g);

  CLI11_PARSE(app, argc, argv);

  try {
    if (rec->parsed())
      return cmd_reconstruct(g, rec_manifest, rec_init, rec_pool, rec_init_count,
                             rec_init_radius, rec_holdout);
    if (post->parsed()) return cmd_postprocess(g, post_splats, post_manifest, post_meta);
    if (bank->parsed()) return cmd_bank_build(g, bank_entries);
    if (ret->parsed()) return cmd_retrieve(g, ret_bank, ret_query, ret_k);
    if (ins->parsed())
      return cmd_insert(g, ins_layout, ins_env, ins_bg, ins_assets, ins_ref,
                        ins_ref_frame, ins_ref_camera);
    if (ren->parsed()) return cmd_render(g, ren_scene, ren_frames, ren_camera);
    if (ev->parsed())
      return cmd_evaluate(g, ev_gt, ev_pred, ev_img_a, ev_img_b, ev_feats_a, ev_feats_b);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
