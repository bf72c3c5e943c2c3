// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lidarfield {

Aabb::Aabb(const Vec3& lo, const Vec3& hi) : min_corner(lo), max_corner(hi) {
  if (!(lo.array() <= hi.array()).all() || !lo.allFinite() || !hi.allFinite()) {
    throw ValidationError("AABB min corner must be finite and <= max corner");
  }
}

Aabb Aabb::from_points(std::span<const Vec3> points) {
  if (points.empty()) throw ValidationError("AABB of an empty point set");
  Aabb box;
  box.min_corner = box.max_corner = points.front();
  for (const Vec3& p : points.subspan(1)) box.expand(p);
  return box;
}

double Aabb::volume() const {
  const Vec3 e = extent();
  return e.x() * e.y() * e.z();
}

bool Aabb::contains(const Vec3& p) const {
  return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
}

bool Aabb::contains(const Aabb& other) const {
  return contains(other.min_corner) && contains(other.max_corner);
}

void Aabb::expand(const Vec3& p) {
  min_corner = min_corner.cwiseMin(p);
  max_corner = max_corner.cwiseMax(p);
}

Aabb Aabb::merged(const Aabb& other) const {
  Aabb out = *this;
  out.expand(other.min_corner);
  out.expand(other.max_corner);
  return out;
}

std::optional<RayInterval> ray_aabb_intersect(const Vec3& origin, const Vec3& dir, const Aabb& box) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double inv = 1.0 / dir[axis];
    double t1 = (box.min_corner[axis] - origin[axis]) * inv;
    double t2 = (box.max_corner[axis] - origin[axis]) * inv;
    // 0 * inf: origin lies on the slab plane of a parallel ray, inside the slab.
    if (std::isnan(t1)) t1 = -std::numeric_limits<double>::infinity();
    if (std::isnan(t2)) t2 = std::numeric_limits<double>::infinity();
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  t_near = std::max(t_near, 0.0);
  if (t_far < t_near) return std::nullopt;
  return RayInterval{t_near, t_far};
}

bool sphere_prefilter(const Vec3& origin, const Vec3& dir, const Aabb& box) {
  const Vec3 to_center = box.center() - origin;
  const double along = to_center.dot(dir);
  const double dist_sq = along <= 0.0 ? to_center.squaredNorm()
                                      : std::max(0.0, to_center.squaredNorm() - along * along);
  const double r = box.half_diagonal();
  // Relative slack absorbs rounding for rays that graze a box corner.
  return dist_sq <= r * r * (1.0 + 1e-12) + 1e-18;
}

Aabb inflate(const Aabb& box, double step) {
  const Vec3 s = Vec3::Constant(step);
  Aabb out;
  out.min_corner = box.min_corner - s;
  out.max_corner = box.max_corner + s;
  return out;
}

double iou(const Aabb& a, const Aabb& b) {
  const Vec3 lo = a.min_corner.cwiseMax(b.min_corner);
  const Vec3 hi = a.max_corner.cwiseMin(b.max_corner);
  if (!(lo.array() < hi.array()).all()) return 0.0;
  const Vec3 e = hi - lo;
  const double inter = e.x() * e.y() * e.z();
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Aabb clip(const Aabb& box, const Aabb& bounds) {
  Aabb out;
  out.min_corner = box.min_corner.cwiseMax(bounds.min_corner).cwiseMin(bounds.max_corner);
  out.max_corner = box.max_corner.cwiseMin(bounds.max_corner).cwiseMax(out.min_corner);
  return out;
}

Aabb pad_to_min_extent(const Aabb& box, double min_side) {
  Aabb out = box;
  for (int axis = 0; axis < 3; ++axis) {
    const double side = box.max_corner[axis] - box.min_corner[axis];
    if (side < min_side) {
      const double mid = 0.5 * (box.min_corner[axis] + box.max_corner[axis]);
      out.min_corner[axis] = mid - 0.5 * min_side;
      out.max_corner[axis] = mid + 0.5 * min_side;
    }
  }
  return out;
}

}  // namespace lidarfield
