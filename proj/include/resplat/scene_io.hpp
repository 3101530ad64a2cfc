#pragma once

#include <map>

#include "resplat/insertion.hpp"
#include "resplat/metrics.hpp"
#include "resplat/reconstruction.hpp"

namespace resplat {

struct TrackFrame {
  int64_t t = 0;
  OrientedBox3 box;  // rotation/center/half_extents; track_id/timestamp filled in
};

struct Track {
  int64_t track_id = 0;
  std::vector<TrackFrame> frames;
};

// Camera/track JSON: {"cameras":[{id,fx,fy,cx,cy,width,height,qw,qx,qy,qz,
// tx,ty,tz}], "tracks":[{track_id,frames:[{t,center,half_extents,quat}]}]}.
// The quaternion/translation give the world-to-camera pose.
struct SceneLayout {
  std::vector<Camera> cameras;
  std::vector<Track> tracks;
};

SceneLayout read_layout(const std::string& path);
void write_layout(const std::string& path, const SceneLayout& layout);

// Training manifest: frame image paths (PFM or PNG, linearized on read), mask
// paths, optional normal-map PFMs, camera ids resolving into the layout.
struct ManifestEntry {
  std::string image_path, mask_path, normal_path;  // normal_path optional
  int camera_id = 0;
};

struct TrainingManifest {
  std::string layout_path;
  std::string env_path;  // initial environment PFM
  std::vector<ManifestEntry> entries;
};

TrainingManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const TrainingManifest& manifest);

// Loads every frame referenced by the manifest; paths resolve relative to the
// manifest's directory.
std::vector<TrainingFrame> load_training_frames(const TrainingManifest& manifest,
                                                const std::string& base_dir);

// Scene manifest: background splat file, placed assets with per-frame
// transforms (or a track id into the layout), environment PFM and its fitted
// scale.
struct SceneAssetRef {
  std::string asset_path;
  int64_t track_id = 0;
  bool shadow = true;
};

struct SceneManifest {
  std::string background_path;  // optional RSPL
  std::string layout_path;
  std::string env_path;
  double env_scale = 1.0;
  std::vector<SceneAssetRef> assets;
};

SceneManifest read_scene_manifest(const std::string& path);
void write_scene_manifest(const std::string& path, const SceneManifest& manifest);

// Builds the renderable graph: assets loaded, placements from the tracks via
// box alignment.
SceneGraph load_scene(const SceneManifest& manifest, const std::string& base_dir);

// Detections as JSONL {"frame": f, "id": i, "bbox": [x, y, w, h]}.
DetectionSet read_detections(const std::string& path);
void write_detections(const std::string& path, const DetectionSet& set);

// Metric report with the fixed key set MOTA, MOTP, IDF1, IoU, W1, W1_L,
// W1_ab, FID, KIDx1e3; absent metrics are omitted.
void write_metric_report(const std::string& path,
                         const std::map<std::string, double>& values);
std::map<std::string, double> read_metric_report(const std::string& path);

}  // namespace resplat
