#pragma once

#include "resplat/splat.hpp"

namespace resplat {

struct AssetMetadata {
  std::string color, brand, model, type;
};

// Canonical, insertable car: centroid at the origin, principal axes aligned to
// x >= y >= z variance, +x facing front.
struct CarAsset {
  SplatList splats;
  OrientedBox3 canonical_box;  // axis-aligned in the canonical frame
  double wheel_line_z = 0;     // ground-contact height, canonical frame
  AssetMetadata metadata;
};

// Drops splats behind any training camera, then splats whose projected center
// misses the mask in more than (1 - keep_fraction) of the views where it lands
// in-image.
SplatList remove_stray_splats(const SplatList& splats, const std::vector<Camera>& cameras,
                              const std::vector<ImageU8>& masks, double keep_fraction);

enum class FrontHint { kNone, kPositiveX, kNegativeX };

struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Principal-component canonicalization; splat poses are transformed
// consistently. The hint flips +x; without one, a cabin-position heuristic
// decides.
CarAsset canonicalize(const SplatList& splats, FrontHint front_hint = FrontHint::kNone,
                      AssetMetadata metadata = {});

// Asset container: RSPL splat block, JSON trailer (canonical_box,
// wheel_line_z, metadata), u64 trailer-offset footer.
std::vector<uint8_t> package(const CarAsset& asset);
CarAsset load_asset(const std::vector<uint8_t>& bytes);
void write_asset(const std::string& path, const CarAsset& asset);
CarAsset read_asset(const std::string& path);

}  // namespace resplat
