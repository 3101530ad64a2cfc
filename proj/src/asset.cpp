#include "resplat/asset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace resplat {

using json = nlohmann::json;

SplatList remove_stray_splats(const SplatList& splats, const std::vector<Camera>& cameras,
                              const std::vector<ImageU8>& masks, double keep_fraction) {
  if (cameras.size() != masks.size())
    throw std::runtime_error("remove_stray_splats: cameras and masks counts differ");
  if (keep_fraction <= 0 || keep_fraction > 1)
    throw std::runtime_error("remove_stray_splats: keep_fraction must be in (0,1]");
  SplatList kept;
  for (const Splat2D& s : splats) {
    bool behind = false;
    int in_image = 0, outside = 0;
    for (size_t i = 0; i < cameras.size(); ++i) {
      const Camera& cam = cameras[i];
      if (cam.to_camera(s.mu).z() <= 0) {
        behind = true;
        break;
      }
      auto px = project(cam, s.mu);
      if (!px) continue;
      int x = static_cast<int>(px->x()), y = static_cast<int>(px->y());
      if (!masks[i].contains(x, y)) continue;
      ++in_image;
      if (!masks[i].at(x, y)) ++outside;
    }
    if (behind) continue;
    if (in_image > 0 && outside > (1.0 - keep_fraction) * in_image) continue;
    kept.push_back(s);
  }
  return kept;
}

namespace {

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  double idx = p * (v.size() - 1);
  size_t lo = static_cast<size_t>(idx);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double f = idx - lo;
  return v[lo] * (1 - f) + v[hi] * f;
}

}  // namespace

CarAsset canonicalize(const SplatList& splats, FrontHint front_hint,
                      AssetMetadata metadata) {
  if (splats.size() < 3)
    throw DegenerateGeometryError("canonicalize: need at least 3 splats");
  Vec3 mean = Vec3::Zero();
  for (const Splat2D& s : splats) mean += s.mu;
  mean /= static_cast<double>(splats.size());
  Mat3 cov = Mat3::Zero();
  for (const Splat2D& s : splats) {
    Vec3 d = s.mu - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(splats.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.eigenvalues()(0) < 1e-10 * std::max(eig.eigenvalues()(2), 1e-300))
    throw DegenerateGeometryError("canonicalize: covariance rank < 3");

  Vec3 ex = eig.eigenvectors().col(2);  // descending variance -> x, y, z
  Vec3 ey = eig.eigenvectors().col(1);
  Vec3 ez = eig.eigenvectors().col(0);

  // z sign: nonnegative skewness along z, a deterministic tie-break.
  double skew = 0;
  for (const Splat2D& s : splats) {
    double z = ez.dot(s.mu - mean);
    skew += z * z * z;
  }
  if (skew < 0) ez = -ez;

  // x sign: hint wins; otherwise put the top-half density centroid toward -x
  // (cabins sit rearward).
  if (front_hint == FrontHint::kNegativeX) {
    ex = -ex;
  } else if (front_hint == FrontHint::kNone) {
    std::vector<double> zs;
    for (const Splat2D& s : splats) zs.push_back(ez.dot(s.mu - mean));
    double zmed = percentile(zs, 0.5);
    double top_x = 0;
    int count = 0;
    for (const Splat2D& s : splats) {
      if (ez.dot(s.mu - mean) > zmed) {
        top_x += ex.dot(s.mu - mean);
        ++count;
      }
    }
    if (count > 0 && top_x > 0) ex = -ex;
  }
  ey = ez.cross(ex);  // right-handed, det +1

  Mat3 world_to_canon;
  world_to_canon.row(0) = ex.transpose();
  world_to_canon.row(1) = ey.transpose();
  world_to_canon.row(2) = ez.transpose();
  Quat q_rot(world_to_canon);

  CarAsset asset;
  asset.metadata = std::move(metadata);
  asset.splats.reserve(splats.size());
  std::vector<double> xs, ys, zs;
  for (const Splat2D& s : splats) {
    Splat2D t = s;
    t.mu = world_to_canon * (s.mu - mean);
    t.rot = (q_rot * s.rot).normalized();
    asset.splats.push_back(t);
    xs.push_back(t.mu.x());
    ys.push_back(t.mu.y());
    zs.push_back(t.mu.z());
  }
  Vec3 lo(percentile(xs, 0.01), percentile(ys, 0.01), percentile(zs, 0.01));
  Vec3 hi(percentile(xs, 0.99), percentile(ys, 0.99), percentile(zs, 0.99));
  asset.canonical_box.center = 0.5 * (lo + hi);
  asset.canonical_box.half_extents = (0.5 * (hi - lo)).cwiseMax(1e-6);
  asset.canonical_box.rotation = Quat(1, 0, 0, 0);
  asset.wheel_line_z = lo.z();
  return asset;
}

std::vector<uint8_t> package(const CarAsset& asset) {
  std::vector<uint8_t> bytes = splats_to_bytes(asset.splats);
  uint64_t trailer_offset = bytes.size();
  json j;
  j["canonical_box"] = {
      {"center", {asset.canonical_box.center.x(), asset.canonical_box.center.y(),
                  asset.canonical_box.center.z()}},
      {"half_extents",
       {asset.canonical_box.half_extents.x(), asset.canonical_box.half_extents.y(),
        asset.canonical_box.half_extents.z()}},
      {"quat", {asset.canonical_box.rotation.w(), asset.canonical_box.rotation.x(),
                asset.canonical_box.rotation.y(), asset.canonical_box.rotation.z()}}};
  j["wheel_line_z"] = asset.wheel_line_z;
  j["metadata"] = {{"color", asset.metadata.color},
                   {"brand", asset.metadata.brand},
                   {"model", asset.metadata.model},
                   {"type", asset.metadata.type}};
  std::string trailer = j.dump();
  bytes.insert(bytes.end(), trailer.begin(), trailer.end());
  uint8_t foot[8];
  std::memcpy(foot, &trailer_offset, 8);
  bytes.insert(bytes.end(), foot, foot + 8);
  return bytes;
}

CarAsset load_asset(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 24) throw std::runtime_error("asset: truncated file");
  uint64_t trailer_offset;
  std::memcpy(&trailer_offset, bytes.data() + bytes.size() - 8, 8);
  if (trailer_offset + 8 > bytes.size())
    throw std::runtime_error("asset: bad trailer offset");
  CarAsset asset;
  asset.splats = splats_from_bytes(bytes.data(), trailer_offset);
  json j = json::parse(bytes.begin() + trailer_offset, bytes.end() - 8);
  auto c = j.at("canonical_box");
  auto ctr = c.at("center");
  asset.canonical_box.center = Vec3(ctr[0], ctr[1], ctr[2]);
  auto he = c.at("half_extents");
  asset.canonical_box.half_extents = Vec3(he[0], he[1], he[2]);
  auto q = c.at("quat");
  asset.canonical_box.rotation = Quat(q[0], q[1], q[2], q[3]);
  asset.wheel_line_z = j.at("wheel_line_z");
  auto m = j.at("metadata");
  asset.metadata = {m.at("color"), m.at("brand"), m.at("model"), m.at("type")};
  return asset;
}

void write_asset(const std::string& path, const CarAsset& asset) {
  std::vector<uint8_t> bytes = package(asset);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write asset: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

CarAsset read_asset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open asset: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return load_asset(bytes);
}

}  // namespace resplat
