#include "resplat/scene_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace resplat {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json open_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return json::parse(f);
}

void save_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

Vec3 to_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected 3-vector");
  return Vec3(j[0], j[1], j[2]);
}

Quat to_quat(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::runtime_error("expected quaternion");
  return Quat(j[0], j[1], j[2], j[3]).normalized();  // w, x, y, z
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

}  // namespace

SceneLayout read_layout(const std::string& path) {
  json j = open_json(path);
  SceneLayout layout;
  for (const json& c : j.value("cameras", json::array())) {
    Camera cam;
    cam.id = c.at("id");
    cam.fx = c.at("fx");
    cam.fy = c.at("fy");
    cam.cx = c.at("cx");
    cam.cy = c.at("cy");
    cam.width = c.at("width");
    cam.height = c.at("height");
    cam.pose.rotation = Quat(c.at("qw"), c.at("qx"), c.at("qy"), c.at("qz")).normalized();
    cam.pose.translation = Vec3(c.at("tx"), c.at("ty"), c.at("tz"));
    layout.cameras.push_back(cam);
  }
  for (const json& t : j.value("tracks", json::array())) {
    Track track;
    track.track_id = t.at("track_id");
    for (const json& f : t.at("frames")) {
      TrackFrame tf;
      tf.t = f.at("t");
      tf.box.center = to_vec3(f.at("center"));
      tf.box.half_extents = to_vec3(f.at("half_extents"));
      tf.box.rotation = to_quat(f.at("quat"));
      tf.box.track_id = track.track_id;
      tf.box.timestamp = tf.t;
      track.frames.push_back(tf);
    }
    layout.tracks.push_back(std::move(track));
  }
  return layout;
}

void write_layout(const std::string& path, const SceneLayout& layout) {
  json cams = json::array(), tracks = json::array();
  for (const Camera& c : layout.cameras) {
    const Quat& q = c.pose.rotation;
    const Vec3& t = c.pose.translation;
    cams.push_back({{"id", c.id},         {"fx", c.fx},       {"fy", c.fy},
                    {"cx", c.cx},         {"cy", c.cy},       {"width", c.width},
                    {"height", c.height}, {"qw", q.w()},      {"qx", q.x()},
                    {"qy", q.y()},        {"qz", q.z()},      {"tx", t.x()},
                    {"ty", t.y()},        {"tz", t.z()}});
  }
  for (const Track& tr : layout.tracks) {
    json frames = json::array();
    for (const TrackFrame& f : tr.frames) {
      const Quat& q = f.box.rotation;
      frames.push_back(
          {{"t", f.t},
           {"center", {f.box.center.x(), f.box.center.y(), f.box.center.z()}},
           {"half_extents",
            {f.box.half_extents.x(), f.box.half_extents.y(), f.box.half_extents.z()}},
           {"quat", {q.w(), q.x(), q.y(), q.z()}}});
    }
    tracks.push_back({{"track_id", tr.track_id}, {"frames", frames}});
  }
  save_json(path, {{"cameras", cams}, {"tracks", tracks}});
}

TrainingManifest read_manifest(const std::string& path) {
  json j = open_json(path);
  TrainingManifest m;
  m.layout_path = j.at("layout");
  m.env_path = j.value("env", "");
  for (const json& e : j.at("frames")) {
    ManifestEntry entry;
    entry.image_path = e.at("image");
    entry.mask_path = e.at("mask");
    entry.normal_path = e.value("normal", "");
    entry.camera_id = e.at("camera_id");
    m.entries.push_back(std::move(entry));
  }
  return m;
}

void write_manifest(const std::string& path, const TrainingManifest& manifest) {
  json frames = json::array();
  for (const ManifestEntry& e : manifest.entries) {
    json f = {{"image", e.image_path}, {"mask", e.mask_path},
              {"camera_id", e.camera_id}};
    if (!e.normal_path.empty()) f["normal"] = e.normal_path;
    frames.push_back(std::move(f));
  }
  json j = {{"layout", manifest.layout_path}, {"frames", frames}};
  if (!manifest.env_path.empty()) j["env"] = manifest.env_path;
  save_json(path, j);
}

std::vector<TrainingFrame> load_training_frames(const TrainingManifest& manifest,
                                                const std::string& base_dir) {
  SceneLayout layout = read_layout(resolve(base_dir, manifest.layout_path));
  std::map<int, const Camera*> by_id;
  for (const Camera& c : layout.cameras) by_id[c.id] = &c;

  std::vector<TrainingFrame> frames;
  for (const ManifestEntry& e : manifest.entries) {
    TrainingFrame fr;
    std::string img = resolve(base_dir, e.image_path);
    if (!fs::exists(img)) throw std::runtime_error("manifest: missing image " + img);
    fr.image = img.ends_with(".pfm") ? read_pfm(img) : read_png_linear(img);
    std::string mask = resolve(base_dir, e.mask_path);
    if (!fs::exists(mask)) throw std::runtime_error("manifest: missing mask " + mask);
    fr.mask = read_png_mask(mask);
    if (!e.normal_path.empty()) {
      std::string nrm = resolve(base_dir, e.normal_path);
      if (!fs::exists(nrm)) throw std::runtime_error("manifest: missing normal map " + nrm);
      ImageRGB n = read_pfm(nrm);
      fr.normal_map = Image<Vec3>(n.width, n.height);
      fr.normal_map.data = n.data;
    }
    auto it = by_id.find(e.camera_id);
    if (it == by_id.end())
      throw std::runtime_error("manifest: unknown camera id " +
                               std::to_string(e.camera_id));
    fr.camera = *it->second;
    if (fr.camera.width != fr.image.width || fr.camera.height != fr.image.height)
      throw std::runtime_error("manifest: image size mismatch for " + img);
    if (fr.mask.width != fr.image.width || fr.mask.height != fr.image.height)
      throw std::runtime_error("manifest: mask size mismatch for " + mask);
    frames.push_back(std::move(fr));
  }
  return frames;
}

SceneManifest read_scene_manifest(const std::string& path) {
  json j = open_json(path);
  SceneManifest m;
  m.background_path = j.value("background", "");
  m.layout_path = j.at("layout");
  m.env_path = j.at("env");
  m.env_scale = j.value("env_scale", 1.0);
  for (const json& a : j.value("assets", json::array())) {
    SceneAssetRef ref;
    ref.asset_path = a.at("asset");
    ref.track_id = a.at("track_id");
    ref.shadow = a.value("shadow", true);
    m.assets.push_back(std::move(ref));
  }
  return m;
}

void write_scene_manifest(const std::string& path, const SceneManifest& manifest) {
  json assets = json::array();
  for (const SceneAssetRef& a : manifest.assets)
    assets.push_back(
        {{"asset", a.asset_path}, {"track_id", a.track_id}, {"shadow", a.shadow}});
  json j = {{"layout", manifest.layout_path},
            {"env", manifest.env_path},
            {"env_scale", manifest.env_scale},
            {"assets", assets}};
  if (!manifest.background_path.empty()) j["background"] = manifest.background_path;
  save_json(path, j);
}

SceneGraph load_scene(const SceneManifest& manifest, const std::string& base_dir) {
  SceneGraph scene;
  SceneLayout layout = read_layout(resolve(base_dir, manifest.layout_path));
  scene.cameras = layout.cameras;
  scene.env = read_env_pfm(resolve(base_dir, manifest.env_path));
  scene.env_scale = manifest.env_scale;
  if (!manifest.background_path.empty())
    scene.background = read_splats(resolve(base_dir, manifest.background_path));

  std::map<int64_t, const Track*> by_track;
  for (const Track& t : layout.tracks) by_track[t.track_id] = &t;
  for (const SceneAssetRef& ref : manifest.assets) {
    auto it = by_track.find(ref.track_id);
    if (it == by_track.end())
      throw std::runtime_error("scene: no track with id " +
                               std::to_string(ref.track_id));
    PlacedAsset pa;
    pa.asset = read_asset(resolve(base_dir, ref.asset_path));
    pa.shadow = ref.shadow;
    for (const TrackFrame& f : it->second->frames)
      pa.placements[f.t] = align_box(pa.asset, f.box);
    scene.assets.push_back(std::move(pa));
  }
  return scene;
}

DetectionSet read_detections(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  DetectionSet set;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    int64_t frame = j.at("frame");
    if (frame < 0) throw std::runtime_error(path + ": negative frame index");
    Detection d;
    d.id = j.at("id");
    const json& bbox = j.at("bbox");
    if (!bbox.is_array() || bbox.size() != 4)
      throw std::runtime_error(path + ": bbox must be [x,y,w,h]");
    d.x = bbox[0];
    d.y = bbox[1];
    d.w = bbox[2];
    d.h = bbox[3];
    if (set.frames.size() <= static_cast<size_t>(frame))
      set.frames.resize(static_cast<size_t>(frame) + 1);
    set.frames[static_cast<size_t>(frame)].push_back(std::move(d));
  }
  return set;
}

void write_detections(const std::string& path, const DetectionSet& set) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (size_t frame = 0; frame < set.frames.size(); ++frame)
    for (const Detection& d : set.frames[frame])
      f << json{{"frame", frame},
                {"id", d.id},
                {"bbox", {d.x, d.y, d.w, d.h}}}
               .dump()
        << "\n";
}

void write_metric_report(const std::string& path,
                         const std::map<std::string, double>& values) {
  static const std::vector<std::string> kKeys = {"MOTA", "MOTP", "IDF1",   "IoU", "W1",
                                                "W1_L", "W1_ab", "FID", "KIDx1e3"};
  json j = json::object();
  for (const std::string& k : kKeys) {
    auto it = values.find(k);
    if (it != values.end()) j[k] = it->second;
  }
  for (const auto& [k, v] : values)
    if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end())
      throw std::runtime_error("metric report: unknown key " + k);
  save_json(path, j);
}

std::map<std::string, double> read_metric_report(const std::string& path) {
  json j = open_json(path);
  std::map<std::string, double> out;
  for (auto& [k, v] : j.items()) out[k] = v;
  return out;
}

}  // namespace resplat
