#include "resplat/geom.hpp"

#include <algorithm>
#include <cmath>

namespace resplat {

std::optional<Vec2> project(const Camera& cam, const Vec3& world_point) {
  Vec3 p = cam.to_camera(world_point);
  if (p.z() <= 0) return std::nullopt;
  return Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
}

Vec3 unproject(const Camera& cam, const Vec2& px, double depth) {
  Vec3 p((px.x() - cam.cx) / cam.fx * depth, (px.y() - cam.cy) / cam.fy * depth, depth);
  return cam.pose.inverse().apply(p);
}

namespace {

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew monotone chain, counter-clockwise hull.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  size_t lower = k + 1;
  for (size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_hull(const std::vector<Vec2>& hull, const Vec2& p) {
  for (size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    if (cross2(a, b, p) < 0) return false;
  }
  return true;
}

}  // namespace

ImageU8 box_to_mask(const Camera& cam, const OrientedBox3& box) {
  ImageU8 mask(cam.width, cam.height, 0);
  std::vector<Vec2> projected;
  for (const Vec3& c : box.corners()) {
    if (auto px = project(cam, c)) projected.push_back(*px);
  }
  if (projected.empty()) return mask;
  std::vector<Vec2> hull = convex_hull(projected);
  if (hull.size() < 3) return mask;
  double ymin = hull[0].y(), ymax = hull[0].y(), xmin = hull[0].x(), xmax = hull[0].x();
  for (const Vec2& p : hull) {
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
  }
  int y0 = std::max(0, static_cast<int>(std::floor(ymin)));
  int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(ymax)));
  int x0 = std::max(0, static_cast<int>(std::floor(xmin)));
  int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(xmax)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (inside_hull(hull, Vec2(x + 0.5, y + 0.5))) mask.at(x, y) = 1;
  return mask;
}

}  // namespace resplat
