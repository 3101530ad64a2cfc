#pragma once

#include <optional>
#include <vector>

#include "resplat/image.hpp"

namespace resplat {

// Similarity transform: p -> scale * (rotation * p) + translation.
// Quaternion convention is (w,x,y,z); world is right-handed.
struct RigidSim3 {
  Quat rotation{1, 0, 0, 0};
  Vec3 translation{0, 0, 0};
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  RigidSim3 inverse() const {
    RigidSim3 inv;
    inv.rotation = rotation.conjugate();
    inv.scale = 1.0 / scale;
    inv.translation = -inv.scale * (inv.rotation * translation);
    return inv;
  }
  static RigidSim3 identity() { return {}; }
};

inline RigidSim3 compose(const RigidSim3& a, const RigidSim3& b) {
  RigidSim3 c;
  c.rotation = (a.rotation * b.rotation).normalized();
  c.scale = a.scale * b.scale;
  c.translation = a.scale * (a.rotation * b.translation) + a.translation;
  return c;
}

inline Vec3 apply(const RigidSim3& t, const Vec3& p) { return t.apply(p); }

// Pinhole camera looking down +z in its own frame. pose maps world to camera.
struct Camera {
  int id = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  RigidSim3 pose;  // world-to-camera, scale fixed to 1

  Vec3 to_camera(const Vec3& world) const { return pose.apply(world); }
  Vec3 position() const { return pose.inverse().translation; }
};

struct OrientedBox3 {
  Vec3 center{0, 0, 0};
  Vec3 half_extents{1, 1, 1};
  Quat rotation{1, 0, 0, 0};
  int64_t track_id = 0;
  int64_t timestamp = 0;

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    int k = 0;
    for (int sx : {-1, 1})
      for (int sy : {-1, 1})
        for (int sz : {-1, 1})
          out[k++] = center + rotation * Vec3(sx * half_extents.x(),
                                              sy * half_extents.y(),
                                              sz * half_extents.z());
    return out;
  }
};

struct PointCloud {
  std::vector<Vec3> points;
};

// Pixel coordinates of a world point, or nullopt when behind the camera
// (z <= 0 in camera frame).
std::optional<Vec2> project(const Camera& cam, const Vec3& world_point);

// Inverse of project for a given camera-frame depth.
Vec3 unproject(const Camera& cam, const Vec2& px, double depth);

// Filled convex hull of the eight projected box corners; all-zero when every
// corner is behind the camera. Pixel centers (x+0.5, y+0.5) decide coverage.
ImageU8 box_to_mask(const Camera& cam, const OrientedBox3& box);

}  // namespace resplat
