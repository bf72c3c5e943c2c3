// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "lidarfield/inference.hpp"
#include "oracles.hpp"

using namespace lidarfield;

namespace {

RaySamples profile(std::vector<double> t, std::vector<double> w) {
  RaySamples s;
  s.t = std::move(t);
  s.weights = std::move(w);
  s.delta.assign(s.t.size(), 0.1);
  s.sigma.assign(s.t.size(), 0.0);
  return s;
}

ChildRegion child(const Vec3& lo, const Vec3& hi, int id) { return {Aabb(lo, hi), id, ChildKind::object}; }

class ZeroField final : public DensityField {
 public:
  Eigen::VectorXd densities(const Eigen::Matrix3Xd& p) const override { return Eigen::VectorXd::Zero(p.cols()); }
};

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("one-step depth on an opaque slab") {
    const oracle::SlabField field({{10.0, 11.0, 1000.0}});
    RayBounds b;
    b.far = 50;
    Rng rng(1);
    const DepthPrediction p = one_step_depth(field, Vec3::Zero(), Vec3::UnitX(), b, SamplingConfig{}, rng);
    REQUIRE(p.depth);
    CHECK(std::abs(*p.depth - 10.0) < 0.1);
    CHECK(p.method == DepthMethod::one_step);

    Rng rng2(2);
    const auto z = one_step_depth(ZeroField{}, Vec3::Zero(), Vec3::UnitX(), b, SamplingConfig{}, rng2);
    REQUIRE(z.depth);
    CHECK(*z.depth == 0.0);
  }

  TEST_CASE("one-step depth stays bounded") {
    const oracle::SlabField field({{3.0, 4.0, 0.3}, {20.0, 22.0, 0.5}});
    RayBounds b;
    b.far = 30;
    Rng rng(3);
    const DepthPrediction p = one_step_depth(field, Vec3::Zero(), Vec3::UnitX(), b, SamplingConfig{64, 128, 0.1}, rng);
    CHECK(*p.depth >= 0.0);
    CHECK(*p.depth <= 30.0 * p.weight_integral + 1e-12);
  }

  TEST_CASE("candidate search") {
    const std::vector<ChildRegion> one{child({5, -1, -1}, {6, 1, 1}, 0)};
    auto c = find_candidates(Vec3::Zero(), Vec3::UnitX(), one, 0.2, 3);
    REQUIRE(c.size() == 1);
    CHECK(c[0].interval.t_enter == doctest::Approx(5.0));
    CHECK(c[0].interval.t_exit == doctest::Approx(6.0));

    const std::vector<ChildRegion> near_miss{child({5, 0.1, -1}, {6, 2, 1}, 4)};
    c = find_candidates(Vec3::Zero(), Vec3::UnitX(), near_miss, 0.2, 3);
    REQUIRE(c.size() == 1);
    CHECK(c[0].segment_id == 4);

    const std::vector<ChildRegion> far_miss{child({5, 10, -1}, {6, 12, 1}, 0)};
    CHECK(find_candidates(Vec3::Zero(), Vec3::UnitX(), far_miss, 0.2, 3).empty());

    const std::vector<ChildRegion> two{child({20, -1, -1}, {21, 1, 1}, 0), child({5, -1, -1}, {6, 1, 1}, 1)};
    c = find_candidates(Vec3::Zero(), Vec3::UnitX(), two, 0.2, 3);
    REQUIRE(c.size() == 2);
    CHECK(c[0].segment_id == 1);
  }

  TEST_CASE("child selection") {
    const std::vector<Candidate> ab{{0, {4, 6}}, {1, {9, 11}}};
    // Peak in B.
    auto s = select_child(ab, profile({5, 10}, {0.3, 0.5}), 0.05);
    REQUIRE(s);
    CHECK(s->segment_id == 1);
    // Peak between candidates; A carries more weight.
    s = select_child(ab, profile({4.5, 5.5, 7.5, 10}, {0.3, 0.3, 0.35, 0.2}), 0.05);
    REQUIRE(s);
    CHECK(s->segment_id == 0);
    // Everything below threshold.
    CHECK_FALSE(select_child(ab, profile({5, 10}, {0.01, 0.02}), 0.05));
    // Equal W, peak outside both: nearer candidate wins.
    s = select_child(ab, profile({5, 7.5, 10}, {0.2, 0.5, 0.2}), 0.05);
    REQUIRE(s);
    CHECK(s->segment_id == 0);
    // Single candidate is taken directly.
    const std::vector<Candidate> single{{3, {9, 11}}};
    s = select_child(single, profile({5, 10}, {0.9, 0.06}), 0.05);
    REQUIRE(s);
    CHECK(s->segment_id == 3);
  }

  TEST_CASE("normalized depth") {
    CHECK(normalized_depth(profile({4, 5}, {0.2, 0.6}), {0, 10}) == doctest::Approx(4.75));
    CHECK(normalized_depth(profile({2, 3, 4}, {0.1, 0.1, 0.1}), {2, 4}) == doctest::Approx(3.0));
  }

  TEST_CASE("two-step depth on an analytic slab") {
    const oracle::SlabField field({{10.0, 10.4, 40.0}});
    const std::vector<ChildRegion> children{child({9.9, -1, -1}, {10.5, 1, 1}, 0), child({30, -1, -1}, {31, 1, 1}, 1)};
    InferenceConfig cfg;
    cfg.sampling = {768, 1536, 0.1};
    Rng rng(4);
    const DepthPrediction p = two_step_depth(field, Vec3::Zero(), Vec3::UnitX(), 0, 50, children, cfg, rng);
    REQUIRE(p.depth);
    REQUIRE(p.selected_child == 0);
    REQUIRE(p.interval);
    CHECK(*p.depth >= p.interval->t_enter);
    CHECK(*p.depth <= p.interval->t_exit);
    RayBounds b;
    b.far = 50;
    Rng rng2(4);
    const auto one = one_step_depth(field, Vec3::Zero(), Vec3::UnitX(), b, cfg.sampling, rng2);
    CHECK(std::abs(*one.depth - *p.depth) <= 2 * 50.0 / 768);

    Rng rng3(5);
    const auto z = two_step_depth(ZeroField{}, Vec3::Zero(), Vec3::UnitX(), 0, 50, children, cfg, rng3);
    CHECK_FALSE(z.depth);
  }

  TEST_CASE("view synthesis") {
    const Pose pose = Pose::from_yaw(0.4, {1, 2, 0.5});
    const std::vector<Vec3> dirs{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0.6, 0, -0.8)};
    const std::vector<double> truth{4, 7, 2};
    const SynthesizedView v = synthesize_view(pose, dirs, [&](const Vec3&, const Vec3&, std::size_t i) {
      DepthPrediction p;
      p.depth = truth[i];
      return p;
    });
    REQUIRE(v.cloud.size() == 3);
    CHECK(v.invalid == 0);
    for (std::size_t i = 0; i < 3; ++i) CHECK((v.cloud.points[i] - pose.apply(truth[i] * dirs[i])).norm() < 1e-12);

    const SynthesizedView none =
        synthesize_view(pose, dirs, [](const Vec3&, const Vec3&, std::size_t) { return DepthPrediction{}; });
    CHECK(none.cloud.empty());
    CHECK(none.invalid == 3);
  }
}
