// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include "lidarfield/metrics.hpp"
#include "oracles.hpp"

using namespace lidarfield;

namespace {

PointCloud cloud_of(std::vector<Vec3> pts) {
  PointCloud c;
  c.points = std::move(pts);
  return c;
}

std::vector<Vec3> random_points(Rng& rng, std::size_t n, double extent) {
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent));
  return pts;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("depth error and accuracy") {
    const std::vector<std::optional<double>> pred{10.0, 10.3, std::nullopt, 9.9};
    const std::vector<double> truth{10.0, 10.0, 10.0, 10.0};
    const DepthScores s = depth_metrics(pred, truth, 0.2);
    REQUIRE(s.dep_err);
    CHECK(*s.dep_err == doctest::Approx(0.4 / 3.0));
    CHECK(*s.dep_acc == doctest::Approx(2.0 / 3.0));
    CHECK(s.valid_fraction == doctest::Approx(0.75));

    const std::vector<std::optional<double>> none(3);
    const DepthScores e = depth_metrics(none, std::vector<double>{1, 2, 3}, 0.2);
    CHECK_FALSE(e.dep_err);
    CHECK(e.valid_fraction == 0.0);
    CHECK_THROWS_AS(depth_metrics(none, std::vector<double>{1}, 0.2), ValidationError);
  }

  TEST_CASE("chamfer and f-score examples") {
    const PointCloud a = cloud_of({Vec3(0, 0, 0), Vec3(1, 0, 0)});
    const PointCloud b = cloud_of({Vec3(0, 0, 0.1), Vec3(1, 0, 0.5)});
    const ChamferResult c = chamfer(a, b);
    CHECK(c.ab == doctest::Approx(0.3));
    CHECK(c.ba == doctest::Approx(0.3));
    CHECK(c.cd == doctest::Approx(0.3));
    CHECK(f_score(a, b, 0.2) == doctest::Approx(0.5));
    CHECK(f_score(a, a, 0.2) == doctest::Approx(1.0));
    CHECK(chamfer(a, a).cd == 0.0);
    CHECK(f_score(a, cloud_of({Vec3(50, 0, 0)}), 0.2) == 0.0);
    CHECK_THROWS_AS(chamfer(a, PointCloud{}), MetricError);
    CHECK_THROWS_AS(f_score(PointCloud{}, a, 0.2), MetricError);
  }

  TEST_CASE("threshold is inclusive") {
    const PointCloud a = cloud_of({Vec3(0, 0, 0)});
    const PointCloud b = cloud_of({Vec3(0.25, 0, 0)});
    CHECK(f_score(a, b, 0.25) == 1.0);
  }

  TEST_CASE("k-d tree matches brute force") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
      const auto pts = random_points(rng, 1 + static_cast<std::size_t>(rng.uniform(0, 600)), 5.0);
      const KdTree tree(pts);
      for (int q = 0; q < 50; ++q) {
        const Vec3 query(rng.uniform(-7, 7), rng.uniform(-7, 7), rng.uniform(-7, 7));
        CHECK(tree.nearest_distance(query) == doctest::Approx(oracle::brute_nn(query, pts)).epsilon(1e-12));
      }
    }
    std::vector<Vec3> dup(40, Vec3(1, 1, 1));
    CHECK(KdTree(dup).nearest_distance(Vec3(1, 1, 2)) == doctest::Approx(1.0));
  }

  TEST_CASE("cloud metrics match brute force") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
      const auto a = random_points(rng, 300, 2.0);
      const auto b = random_points(rng, 200, 2.0);
      CHECK(std::abs(chamfer(cloud_of(a), cloud_of(b)).cd - oracle::brute_chamfer(a, b)) <= 1e-9);
      CHECK(std::abs(f_score(cloud_of(a), cloud_of(b), 0.2) - oracle::brute_fscore(a, b, 0.2)) <= 1e-9);
    }
  }

  TEST_CASE("map metrics on an offset grid") {
    std::vector<Vec3> grid;
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 30; ++j) grid.emplace_back(i * 0.05, j * 0.05, 0.0);
    std::vector<Vec3> shifted = grid;
    for (Vec3& p : shifted) p.z() += 0.1;
    const MapReport m = map_metrics(cloud_of(shifted), cloud_of(grid));
    CHECK(m.acc == doctest::Approx(0.1));
    CHECK(m.comp == doctest::Approx(0.1));
    CHECK(m.map_cd == doctest::Approx((m.acc + m.comp) / 2));
    CHECK(m.map_f_02 == doctest::Approx(1.0));
  }

  TEST_CASE("frame metrics and aggregation") {
    const PointCloud a = cloud_of({Vec3(0, 0, 0), Vec3(1, 0, 0)});
    const std::vector<std::optional<double>> pred{1.0, std::nullopt};
    const std::vector<double> truth{1.1, 2.0};
    const MetricsReport r = frame_metrics(3, pred, truth, a, a);
    CHECK(r.frame_id == 3);
    CHECK(*r.dep_err == doctest::Approx(0.1));
    CHECK(*r.cd == 0.0);
    CHECK(r.valid_fraction == 0.5);

    const MetricsReport empty = frame_metrics(4, std::vector<std::optional<double>>(2), truth, PointCloud{}, a);
    CHECK_FALSE(empty.cd);
    CHECK_FALSE(empty.dep_err);

    const std::vector<MetricsReport> frames{r, empty};
    const MetricsReport mean = aggregate(frames);
    CHECK(mean.frame_id == -1);
    CHECK(*mean.dep_err == doctest::Approx(0.1));
    CHECK(mean.valid_fraction == doctest::Approx(0.25));
  }

  TEST_CASE("csv layout") {
    MetricsReport r;
    r.frame_id = 2;
    r.dep_err = 0.5;
    std::ostringstream out;
    write_metrics_csv(out, "m", std::vector<MetricsReport>{r});
    const std::string s = out.str();
    CHECK(s.rfind("method,frame,dep_err,dep_acc_02,cd,f_02,valid_fraction\n", 0) == 0);
    CHECK(s.find("m,2,0.5,") != std::string::npos);
    CHECK(s.find("m,mean,") != std::string::npos);
  }
}
