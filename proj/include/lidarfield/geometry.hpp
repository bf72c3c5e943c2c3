// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>

#include "lidarfield/types.hpp"

namespace lidarfield {

struct Aabb {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();

  Aabb() = default;
  Aabb(const Vec3& lo, const Vec3& hi);

  /// Tight box around a non-empty point set.
  static Aabb from_points(std::span<const Vec3> points);

  Vec3 center() const { return 0.5 * (min_corner + max_corner); }
  Vec3 extent() const { return max_corner - min_corner; }
  double volume() const;
  double half_diagonal() const { return 0.5 * extent().norm(); }
  /// Closed containment test.
  bool contains(const Vec3& p) const;
  bool contains(const Aabb& other) const;
  void expand(const Vec3& p);
  Aabb merged(const Aabb& other) const;

  bool operator==(const Aabb&) const = default;
};

struct RayInterval {
  double t_enter = 0.0;
  double t_exit = 0.0;

  double length() const { return t_exit - t_enter; }
  bool contains(double t) const { return t >= t_enter && t <= t_exit; }
};

/// Slab test. The interval is clamped to t >= 0; a box entirely behind the
/// origin is a miss.
std::optional<RayInterval> ray_aabb_intersect(const Vec3& origin, const Vec3& dir, const Aabb& box);

/// True iff the forward ray passes within the box's circumscribed sphere.
bool sphere_prefilter(const Vec3& origin, const Vec3& dir, const Aabb& box);

Aabb inflate(const Aabb& box, double step);

/// Intersection over union of the two volumes; 0 when disjoint.
double iou(const Aabb& a, const Aabb& b);

/// Intersection of box with bounds; degenerates to a flat box on the nearest
/// face of bounds when they are disjoint.
Aabb clip(const Aabb& box, const Aabb& bounds);

/// Grows the box symmetrically so that no side is shorter than min_side.
Aabb pad_to_min_extent(const Aabb& box, double min_side);

}  // namespace lidarfield
