#pragma once

#include <vector>

#include "resplat/geom.hpp"
#include "resplat/shading.hpp"

namespace resplat {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) {
  p = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return std::log(p / (1.0 - p));
}

// Flat elliptical Gaussian primitive. The rotation's third column is the
// surface normal; sx, sy scale the two tangent axes.
struct Splat2D {
  Vec3 mu{0, 0, 0};
  Quat rot{1, 0, 0, 0};
  double sx = 0.1, sy = 0.1;
  double opacity_logit = 0.0;
  Material material;

  double opacity() const { return sigmoid(opacity_logit); }
  Vec3 tangent_x() const { return rot * Vec3::UnitX(); }
  Vec3 tangent_y() const { return rot * Vec3::UnitY(); }
  Vec3 normal() const { return rot * Vec3::UnitZ(); }
};

using SplatList = std::vector<Splat2D>;

// "RSPL" little-endian container: magic, u32 version=1, u64 count, then per
// splat mu 3xf32, quat (w,x,y,z) 4xf32, sx, sy, opacity_logit, albedo 3xf32,
// roughness, metallic.
std::vector<uint8_t> splats_to_bytes(const SplatList& splats);
SplatList splats_from_bytes(const uint8_t* data, size_t size);
void write_splats(const std::string& path, const SplatList& splats);
SplatList read_splats(const std::string& path);

// Quantizes every field through f32, so a following write/read round trip is
// bit-exact.
void round_trip_f32(SplatList& splats);

}  // namespace resplat
