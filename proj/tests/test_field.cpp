// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lidarfield/field.hpp"
#include "lidarfield/random.hpp"
#include "oracles.hpp"

using namespace lidarfield;

namespace {

FieldLayout tiny_layout() {
  FieldLayout l;
  l.enc_levels = 2;
  l.hidden = {16, 16};
  l.skip_layer = -1;
  return l;
}

Eigen::Matrix3Xd random_points(Rng& rng, int n) {
  Eigen::Matrix3Xd x(3, n);
  for (int i = 0; i < n; ++i) x.col(i) = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return x;
}

}  // namespace

TEST_SUITE("neural_field") {
  TEST_CASE("positional encoding") {
    const auto zero = positional_encode(Vec3(Vec3::Zero()), 3);
    REQUIRE(zero.size() == 21);
    for (int level = 0; level < 3; ++level) {
      for (int c = 0; c < 3; ++c) {
        CHECK(zero[static_cast<std::size_t>(3 + 6 * level + c)] == 0.0);
        CHECK(zero[static_cast<std::size_t>(6 + 6 * level + c)] == 1.0);
      }
    }
    CHECK(positional_encode(Vec3(0.1, 0.2, 0.3), 0).size() == 3);
    CHECK(positional_encode(Vec3(Vec3::Zero()), 10).size() == 63);

    const Vec3 x(0.3, -0.7, 0.9);
    const auto enc = positional_encode(x, 6);
    for (int level = 0; level < 6; ++level) {
      const double f = std::ldexp(M_PI, level);
      for (int c = 0; c < 3; ++c) {
        CHECK(enc[static_cast<std::size_t>(3 + 6 * level + c)] == doctest::Approx(std::sin(f * x[c])).epsilon(1e-12));
        CHECK(enc[static_cast<std::size_t>(6 + 6 * level + c)] == doctest::Approx(std::cos(f * x[c])).epsilon(1e-12));
      }
    }
    Eigen::Matrix3Xd batch(3, 1);
    batch.col(0) = x;
    const Eigen::MatrixXd b = positional_encode(batch, 6);
    for (std::size_t i = 0; i < enc.size(); ++i) CHECK(b(static_cast<Eigen::Index>(i), 0) == doctest::Approx(enc[i]));
  }

  TEST_CASE("layout and parameter count") {
    FieldLayout l;
    CHECK(l.input_dim() == 63);
    const FieldLayout t = tiny_layout();
    // (15 -> 16) + (16 -> 16) + (16 -> 1)
    CHECK(t.param_count() == 15 * 16 + 16 + 16 * 16 + 16 + 16 + 1);
    CHECK(FieldModel(t).param_count() == t.param_count());
  }

  TEST_CASE("zero parameters give softplus(0)") {
    const FieldModel m(tiny_layout());
    Rng rng(1);
    const Eigen::VectorXd s = m.forward(random_points(rng, 10));
    for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }

  TEST_CASE("density is non-negative and deterministic") {
    FieldLayout l = tiny_layout();
    l.skip_layer = 1;
    const FieldModel m = FieldModel::initialized(l, 9);
    Rng rng(2);
    const Eigen::Matrix3Xd x = random_points(rng, 10000);
    const Eigen::VectorXd a = m.forward(x);
    const Eigen::VectorXd b = m.forward(x);
    CHECK((a.array() >= 0.0).all());
    CHECK(a == b);
    CHECK(FieldModel::initialized(l, 9).params() == m.params());
    CHECK(FieldModel::initialized(l, 10).params() != m.params());
  }

  TEST_CASE("density_at uses the normalizer") {
    const FieldModel m = FieldModel::initialized(tiny_layout(), 3);
    const SceneNormalizer norm = SceneNormalizer::for_box(Aabb({0, 0, 0}, {10, 20, 4}));
    CHECK((norm.apply(Vec3(5, 10, 2))).norm() == doctest::Approx(0.0));
    CHECK(norm.apply(Vec3(10, 20, 4)) == Vec3::Ones());
    Eigen::Matrix3Xd x(3, 1);
    x.col(0) = norm.apply(Vec3(2, 3, 1));
    CHECK(density_at(m, Vec3(2, 3, 1), norm) == m.forward(x)[0]);
  }

  TEST_CASE("bias gradient of a density sum") {
    // d(sum sigma)/d(head bias) = sum of softplus'(raw) = sum of sigmoid(raw).
    const FieldModel m = FieldModel::initialized(tiny_layout(), 4);
    Rng rng(5);
    ForwardCache cache;
    const Eigen::VectorXd s = m.forward(random_points(rng, 8), &cache);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.param_count()));
    m.backward(cache, Eigen::VectorXd::Ones(s.size()), grad);
    double expect = 0.0;
    for (Eigen::Index i = 0; i < cache.raw.size(); ++i) expect += sigmoid(cache.raw[i]);
    CHECK(grad[grad.size() - 1] == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("backward matches finite differences of a weighted density sum") {
    FieldLayout l = tiny_layout();
    l.skip_layer = 1;
    FieldModel m = FieldModel::initialized(l, 6);
    Rng rng(7);
    const Eigen::Matrix3Xd x = random_points(rng, 12);
    Eigen::VectorXd coef(12);
    for (int i = 0; i < 12; ++i) coef[i] = rng.uniform(-1, 1);
    ForwardCache cache;
    m.forward(x, &cache);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.param_count()));
    m.backward(cache, coef, grad);
    const auto f = [&](const Eigen::VectorXd& theta) {
      FieldModel probe = m;
      probe.params() = theta;
      return coef.dot(probe.forward(x));
    };
    const Eigen::VectorXd numeric = oracle::central_difference(f, m.params(), 1e-5);
    CHECK(oracle::max_relative_error(grad, numeric, 1e-6) < 1e-4);
  }

  TEST_CASE("adam") {
    Eigen::VectorXd theta = Eigen::VectorXd::Constant(3, 0.5);
    OptimizerState st = OptimizerState::fresh(3, 1e-3);
    adam_step(st, theta, Eigen::VectorXd::Zero(3), 1e-3);
    CHECK(theta == Eigen::VectorXd::Constant(3, 0.5));
    CHECK(st.step == 1);

    OptimizerState s2 = OptimizerState::fresh(1, 1e-3);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
    adam_step(s2, p, Eigen::VectorXd::Constant(1, 2.5), 1e-3);
    CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
    OptimizerState s3 = OptimizerState::fresh(1, 1e-3);
    adam_step(s3, q, Eigen::VectorXd::Constant(1, -0.01), 1e-3);
    CHECK(q[0] == doctest::Approx(1e-3).epsilon(1e-4));

    Eigen::VectorXd bad = Eigen::VectorXd::Constant(1, NAN);
    const Eigen::VectorXd before = q;
    CHECK_THROWS_AS(adam_step(s3, q, bad, 1e-3), NumericalError);
    CHECK(q == before);
    CHECK(s3.step == 1);
    CHECK((s3.v.array() >= 0).all());
  }

  TEST_CASE("learning-rate schedule") {
    CHECK(lr_at(0, 4e-5) == doctest::Approx(4e-5));
    CHECK(lr_at(4, 4e-5) == doctest::Approx(4e-5));
    CHECK(lr_at(5, 4e-5) == doctest::Approx(4e-6));
    CHECK(lr_at(119, 4e-5) == doctest::Approx(4e-6));
    CHECK(lr_at(120, 4e-5) == doctest::Approx(4e-7));
  }

  TEST_CASE("checkpoint round trip and corruption") {
    Checkpoint ck;
    ck.model = FieldModel::initialized(tiny_layout(), 11);
    ck.optimizer = OptimizerState::fresh(ck.model.param_count(), 1e-3);
    Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(ck.model.param_count()), -1, 1);
    adam_step(ck.optimizer, ck.model.params(), g, 1e-3);
    ck.normalizer = SceneNormalizer::for_box(Aabb({-1, -2, -3}, {4, 5, 6}));
    ck.epoch = 7;

    const auto bytes = serialize_checkpoint(ck);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back.model.params() == ck.model.params());
    CHECK(back.model.layout() == ck.model.layout());
    CHECK(back.optimizer.m == ck.optimizer.m);
    CHECK(back.optimizer.v == ck.optimizer.v);
    CHECK(back.optimizer.step == ck.optimizer.step);
    CHECK(back.epoch == 7);
    CHECK(back.normalizer.center == ck.normalizer.center);

    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    CHECK_THROWS_AS(deserialize_checkpoint(truncated), FormatError);

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= std::byte{0x40};
    CHECK_THROWS_AS(deserialize_checkpoint(flipped), FormatError);

    try {
      deserialize_checkpoint(serialize_checkpoint(ck, 99));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("99") != std::string::npos);
      CHECK(msg.find(std::to_string(kCheckpointVersion)) != std::string::npos);
    }

    const auto path = std::filesystem::temp_directory_path() / "lidarfield_test.ckpt";
    save_checkpoint(path, ck);
    CHECK(load_checkpoint(path).model.params() == ck.model.params());
    std::filesystem::remove(path);
  }
}
