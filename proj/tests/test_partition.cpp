// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <numbers>
#include <sstream>

#include "lidarfield/partition.hpp"
#include "lidarfield/random.hpp"
#include "oracles.hpp"

using namespace lidarfield;

namespace {

PosedCloud frame_at(int id, double yaw_deg, const Vec3& t) {
  PosedCloud f;
  f.frame_id = id;
  f.pose = Pose::from_yaw(yaw_deg * std::numbers::pi / 180.0, t);
  f.world.frame_id = id;
  for (int i = 0; i < 5; ++i) f.world.points.push_back(t + Vec3(2.0 + i, 1.0, 0.0));
  return f;
}

PointCloud plane_grid(double z, double step, int n) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.points.emplace_back(i * step + 0.01, j * step + 0.01, z);
  return c;
}

}  // namespace

TEST_SUITE("partition") {
  TEST_CASE("straight trajectory forms one block") {
    std::vector<PosedCloud> frames;
    for (int i = 0; i < 50; ++i) frames.push_back(frame_at(i, 0.0, {i * 1.0, 0, 0}));
    const auto blocks = build_parent_blocks(frames, 30.0, 1.0, 0.5);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].frame_ids.size() == 50);
    for (const auto& f : frames) {
      for (const Vec3& p : f.world.points) CHECK(blocks[0].box.contains(p));
      CHECK(blocks[0].box.contains(f.origin()));
    }
    CHECK(build_parent_blocks({}, 30.0, 1.0, 0.5).empty());
  }

  TEST_CASE("a 90 degree turn splits the trajectory") {
    std::vector<PosedCloud> frames;
    for (int i = 0; i < 20; ++i) frames.push_back(frame_at(i, 0.0, {i * 5.0, 0, 0}));
    for (int i = 0; i < 20; ++i) frames.push_back(frame_at(20 + i, 90.0, {100.0, i * 5.0, 0}));
    const auto blocks = build_parent_blocks(frames, 30.0, 1.0, 0.5);
    CHECK(blocks.size() >= 2);
  }

  TEST_CASE("overlapping blocks merge") {
    ParentBlock a, b;
    a.block_id = 0;
    a.box = Aabb({0, 0, 0}, {10, 10, 10});
    a.frame_ids = {0, 1};
    b.block_id = 1;
    b.box = Aabb({0, 0, 0}, {10, 10, 9});  // IoU 0.9
    b.frame_ids = {2};
    const auto merged = merge_overlapping_blocks({a, b}, 0.5);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].frame_ids == std::vector<int>{0, 1, 2});
    b.box = Aabb({20, 0, 0}, {30, 10, 10});
    CHECK(merge_overlapping_blocks({a, b}, 0.5).size() == 2);
  }

  TEST_CASE("ground extraction") {
    const PointCloud plane = plane_grid(0.0, 0.25, 20);
    GroundSplit s = extract_ground(plane, 1.0, 0.3);
    CHECK(s.ground.size() == plane.size());
    CHECK(s.non_ground.empty());

    PointCloud scene = plane;
    for (int i = 0; i < 5; ++i)
      for (int k = 0; k < 5; ++k) scene.points.emplace_back(2.1 + 0.1 * i, 2.1, 0.5 + 0.25 * k);
    s = extract_ground(scene, 1.0, 0.3);
    CHECK(s.non_ground.size() == 25);
    CHECK(s.ground.size() + s.non_ground.size() == scene.size());
    for (const Vec3& p : s.non_ground.points) CHECK(p.z() >= 0.5);

    s = extract_ground(PointCloud{}, 1.0, 0.3);
    CHECK(s.ground.empty());
    CHECK(s.non_ground.empty());
  }

  TEST_CASE("clustering examples") {
    PointCloud c;
    for (int i = 0; i < 10; ++i) c.points.emplace_back(0.1 * i, 0, 0);
    for (int i = 0; i < 10; ++i) c.points.emplace_back(50 + 0.1 * i, 0, 0);
    CHECK(cluster_regions(c, 0.5, 1).size() == 2);

    PointCloud single;
    single.points = {{0, 0, 0}};
    CHECK(cluster_regions(single, 0.5, 2).empty());

    PointCloud chain;
    for (int i = 0; i < 100; ++i) chain.points.emplace_back(0.45 * i, 0, 0);
    const auto segs = cluster_regions(chain, 0.5, 1);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].size() == 100);
  }

  TEST_CASE("clustering matches pairwise oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(1000 + static_cast<std::uint64_t>(trial));
      PointCloud c;
      const int n = 50 + static_cast<int>(rng.below(400));
      for (int i = 0; i < n; ++i) c.points.emplace_back(rng.uniform(0, 8), rng.uniform(0, 8), rng.uniform(0, 2));
      const double r = rng.uniform(0.2, 0.8);
      const std::size_t min_pts = 1 + rng.below(5);
      CHECK(cluster_regions(c, r, min_pts) == oracle::brute_components(c.points, r, min_pts));
    }
  }

  TEST_CASE("child regions") {
    PointCloud ng;
    ng.points = {{1, 3, 0}, {2, 4, 1}, {1.5, 3.5, 0.5}};
    std::vector<std::vector<std::size_t>> segs{{0, 1, 2}};
    auto children = build_child_regions(PointCloud{}, ng, segs, 0.2, 10.0);
    REQUIRE(children.size() == 1);
    CHECK(children[0].box == Aabb({1, 3, 0}, {2, 4, 1}));
    CHECK(children[0].kind == ChildKind::object);

    PointCloud flat;
    flat.points = {{1, 3, 0.7}, {2, 4, 0.7}};
    children = build_child_regions(PointCloud{}, flat, std::vector<std::vector<std::size_t>>{{0, 1}}, 0.2, 10.0);
    CHECK(children[0].box.extent().z() == doctest::Approx(0.2));
    CHECK(children[0].box.center().z() == doctest::Approx(0.7));

    const PointCloud ground = plane_grid(0.0, 1.0, 15);  // spans two tiles per axis
    children = build_child_regions(ground, PointCloud{}, {}, 0.2, 10.0);
    CHECK(children.size() == 4);
    for (const auto& ch : children) CHECK(ch.kind == ChildKind::ground);
    for (std::size_t i = 0; i < children.size(); ++i) CHECK(children[i].segment_id == static_cast<int>(i));
  }

  TEST_CASE("ray ownership") {
    std::vector<ChildRegion> children{{Aabb({0, 0, 0}, {2, 2, 2}), 0, ChildKind::object},
                                      {Aabb({0, 0, 0}, {1, 1, 1}), 1, ChildKind::object},
                                      {Aabb({5, 5, 5}, {6, 6, 6}), 2, ChildKind::object}};
    CHECK(owning_child({0.5, 0.5, 0.5}, children) == 1);
    CHECK(owning_child({1.5, 1.5, 1.5}, children) == 0);
    CHECK(owning_child({5.5, 5.5, 5.5}, children) == 2);
    CHECK_FALSE(owning_child({9, 9, 9}, children).has_value());
    // Equal volume: smaller id wins.
    std::vector<ChildRegion> twins{{Aabb({0, 0, 0}, {1, 1, 1}), 4, ChildKind::object},
                                   {Aabb({0, 0, 0}, {1, 1, 1}), 3, ChildKind::object}};
    CHECK(owning_child({0.5, 0.5, 0.5}, twins) == 3);
  }

  TEST_CASE("assign_rays invariants") {
    ParentBlock block;
    block.box = Aabb({-20, -20, -5}, {20, 20, 5});
    block.frame_ids = {0};
    block.children = {{Aabb({4, 0, -1}, {6, 2, 1}), 0, ChildKind::object}};
    PosedCloud f;
    f.frame_id = 0;
    f.pose = Pose::from_yaw(0.2, {1, -1, 0.5});
    f.world.points = {{5, 1, 0}, {-3, 7, 2}};
    const auto rays = assign_rays(std::span<const PosedCloud>(&f, 1), block);
    REQUIRE(rays.size() == 2);
    CHECK(rays[0].child_id == 0);
    CHECK_FALSE(rays[1].child_id.has_value());
    for (const LidarRay& r : rays) {
      CHECK(std::abs(r.depth - (r.endpoint - r.origin).norm()) < 1e-9);
      CHECK((r.dir - (r.endpoint - r.origin) / r.depth).norm() < 1e-9);
      if (r.child_id) CHECK(find_child(block, *r.child_id)->box.contains(r.endpoint));
    }
  }

  TEST_CASE("hierarchy sidecar round trip") {
    ParentBlock block;
    block.block_id = 3;
    block.box = Aabb({-1.5, -2, 0}, {10.125, 3, 4});
    block.frame_ids = {0, 2, 5};
    block.children = {{Aabb({0, 0, 0}, {1, 1, 0.2}), 0, ChildKind::ground},
                      {Aabb({0.1, 0.2, 0.3}, {1.0 / 3.0, 2, 3}), 1, ChildKind::object}};
    std::stringstream ss;
    write_hierarchy(ss, std::span<const ParentBlock>(&block, 1));
    const auto back = read_hierarchy(ss);
    REQUIRE(back.size() == 1);
    CHECK(back[0].block_id == 3);
    CHECK(back[0].box == block.box);
    CHECK(back[0].frame_ids == block.frame_ids);
    REQUIRE(back[0].children.size() == 2);
    CHECK(back[0].children[1].box == block.children[1].box);
    CHECK(back[0].children[1].kind == ChildKind::object);
  }
}
