#include "resplat/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace resplat {

namespace {

struct Field {
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
T parse_value(const std::string& s) {
  std::istringstream is(s);
  T v;
  is >> v;
  if (is.fail() || !(is >> std::ws).eof())
    throw ConfigError("bad value '" + s + "'");
  return v;
}

template <>
bool parse_value<bool>(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("bad boolean '" + s + "'");
}

template <>
std::string parse_value<std::string>(const std::string& s) {
  return s;
}

template <typename T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }
}

template <typename T>
Field field(T PipelineConfig::* ptr) {
  return {[ptr](PipelineConfig& c, const std::string& s) { c.*ptr = parse_value<T>(s); },
          [ptr](const PipelineConfig& c) { return format_value(c.*ptr); }};
}

template <typename Sec, typename T>
Field field(Sec PipelineConfig::* sec, T Sec::* ptr) {
  return {[sec, ptr](PipelineConfig& c, const std::string& s) {
            c.*sec.*ptr = parse_value<T>(s);
          },
          [sec, ptr](const PipelineConfig& c) { return format_value(c.*sec.*ptr); }};
}

// Ordered section -> key -> accessor registry; drives parse, dump and help.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>&
registry() {
  using P = PipelineConfig;
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>
      reg = {
          {"",
           {{"seed", field(&P::seed)}, {"threads", field(&P::threads)}}},
          {"reconstruct",
           {{"lambda_opacity", field(&P::reconstruct, &TrainConfig::lambda_opacity)},
            {"lambda_normal", field(&P::reconstruct, &TrainConfig::lambda_normal)},
            {"iters_total", field(&P::reconstruct, &TrainConfig::iters_total)},
            {"synth_start", field(&P::reconstruct, &TrainConfig::synth_start)},
            {"synth_refresh", field(&P::reconstruct, &TrainConfig::synth_refresh)},
            {"synth_extra", field(&P::reconstruct, &TrainConfig::synth_extra)},
            {"synth_pool", field(&P::reconstruct, &TrainConfig::synth_pool)},
            {"lr_mu", field(&P::reconstruct, &TrainConfig::lr_mu)},
            {"lr_rot", field(&P::reconstruct, &TrainConfig::lr_rot)},
            {"lr_scale", field(&P::reconstruct, &TrainConfig::lr_scale)},
            {"lr_opacity", field(&P::reconstruct, &TrainConfig::lr_opacity)},
            {"lr_material", field(&P::reconstruct, &TrainConfig::lr_material)},
            {"lr_env_scale", field(&P::reconstruct, &TrainConfig::lr_env_scale)},
            {"densify_grad_thresh", field(&P::reconstruct, &TrainConfig::densify_grad_thresh)},
            {"densify_interval", field(&P::reconstruct, &TrainConfig::densify_interval)},
            {"densify_until", field(&P::reconstruct, &TrainConfig::densify_until)},
            {"prune_opacity", field(&P::reconstruct, &TrainConfig::prune_opacity)},
            {"ssim_window", field(&P::reconstruct, &TrainConfig::ssim_window)}}},
          {"postprocess",
           {{"keep_fraction", field(&P::postprocess, &P::Postprocess::keep_fraction)},
            {"front_hint", field(&P::postprocess, &P::Postprocess::front_hint)}}},
          {"bank",
           {{"min_area_px", field(&P::bank, &P::Bank::min_area_px)},
            {"max_overlap", field(&P::bank, &P::Bank::max_overlap)}}},
          {"retrieve", {{"k", field(&P::retrieve, &P::Retrieve::k)}}},
          {"insert",
           {{"icp_max_iters", field(&P::insert, &P::Insert::icp_max_iters)},
            {"icp_tol", field(&P::insert, &P::Insert::icp_tol)},
            {"icp_trim", field(&P::insert, &P::Insert::icp_trim)},
            {"shadow_opacity", field(&P::insert, &P::Insert::shadow_opacity)},
            {"shadow_margin", field(&P::insert, &P::Insert::shadow_margin)},
            {"shadow", field(&P::insert, &P::Insert::shadow)},
            {"fit_env", field(&P::insert, &P::Insert::fit_env)}}},
          {"render",
           {{"background", field(&P::render, &P::Render::background)},
            {"env_scale", field(&P::render, &P::Render::env_scale)}}},
          {"evaluate",
           {{"iou_thresh", field(&P::evaluate, &P::Evaluate::iou_thresh)},
            {"motp_mode", field(&P::evaluate, &P::Evaluate::motp_mode)},
            {"w1_projections", field(&P::evaluate, &P::Evaluate::w1_projections)},
            {"w1_pixel_stride", field(&P::evaluate, &P::Evaluate::w1_pixel_stride)}}},
      };
  return reg;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void config_set(PipelineConfig& cfg, const std::string& section,
                const std::string& key, const std::string& value) {
  for (const auto& [sec, fields] : registry()) {
    if (sec != section) continue;
    for (const auto& [k, f] : fields) {
      if (k != key) continue;
      try {
        f.set(cfg, value);
      } catch (const ConfigError& e) {
        throw ConfigError("config: " + (section.empty() ? key : section + "." + key) +
                          ": " + e.what());
      }
      return;
    }
    throw ConfigError("config: unknown key '" + key + "' in section [" + section + "]");
  }
  throw ConfigError("config: unknown section [" + section + "]");
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section header at line " +
                          std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value at line " + std::to_string(line_no));
    config_set(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  try {
    cfg.reconstruct.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const PipelineConfig& cfg) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [sec, fields] : registry()) {
    if (!sec.empty()) os << (first ? "" : "\n") << "[" << sec << "]\n";
    first = false;
    for (const auto& [k, f] : fields) os << k << " = " << f.get(cfg) << "\n";
  }
  return os.str();
}

void write_config_snapshot(const std::string& path, const PipelineConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw ConfigError("config: cannot write " + path);
  f << dump_config(cfg);
}

}  // namespace resplat
