#pragma once

#include "resplat/insertion.hpp"
#include "resplat/reconstruction.hpp"

namespace resplat {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All stage settings in one place, parsed from an ini-style file of
// `[section]` headers and `key = value` lines. Unknown keys are rejected.
struct PipelineConfig {
  uint64_t seed = 0;
  int threads = 1;

  TrainConfig reconstruct;  // [reconstruct]

  struct Postprocess {
    double keep_fraction = 0.6;
    std::string front_hint = "none";  // none | +x | -x
  } postprocess;

  struct Bank {
    double min_area_px = 900;
    double max_overlap = 0.3;
  } bank;

  struct Retrieve {
    int k = 5;
  } retrieve;

  struct Insert {
    int icp_max_iters = 50;
    double icp_tol = 1e-6;
    double icp_trim = 0.2;
    double shadow_opacity = 0.6;
    double shadow_margin = 0.1;
    bool shadow = true;
    bool fit_env = true;
  } insert;

  struct Render {
    std::string background = "env";  // black | env
    double env_scale = 1.0;
  } render;

  struct Evaluate {
    double iou_thresh = 0.5;
    std::string motp_mode = "one_minus_iou";  // one_minus_iou | center_distance
    int w1_projections = 64;
    int w1_pixel_stride = 1;
  } evaluate;
};

// Single key assignment ("section.key" form); throws ConfigError on unknown
// keys or unparsable values.
void config_set(PipelineConfig& cfg, const std::string& section,
                const std::string& key, const std::string& value);

PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::string& path);

// Every key with its current value, in file format; parse(dump(c)) == c.
std::string dump_config(const PipelineConfig& cfg);

void write_config_snapshot(const std::string& path, const PipelineConfig& cfg);

}  // namespace resplat
