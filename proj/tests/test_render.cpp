// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lidarfield/render.hpp"
#include "oracles.hpp"

using namespace lidarfield;

namespace {

RaySamples manual(std::vector<double> t, std::vector<double> w) {
  RaySamples s;
  s.t = std::move(t);
  s.weights = std::move(w);
  s.delta.assign(s.t.size(), 1.0);
  s.sigma.assign(s.t.size(), 0.0);
  return s;
}

bool strictly_sorted(const std::vector<double>& t) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) return false;
  return true;
}

}  // namespace

TEST_SUITE("sampling_render") {
  TEST_CASE("segmented sampling budget") {
    RayBounds b;
    b.t0 = 0;
    b.far = 50;
    b.child = RayInterval{20, 21};
    b.inflation = 0.1;
    Rng rng(3);
    for (int draw = 0; draw < 1000; ++draw) {
      const auto t = segmented_sample(b, 10, 0.1, rng);
      CHECK(t.size() <= 10);
      CHECK(strictly_sorted(t));
      CHECK(t.front() >= 0.0);
      CHECK(t.back() <= 50.0);
      const auto inside = std::count_if(t.begin(), t.end(), [](double x) { return x >= 19.9 && x <= 21.1; });
      CHECK(inside >= 1);
    }
    RayBounds plain;
    plain.far = 10;
    const auto t = segmented_sample(plain, 10, 0.1, rng);
    REQUIRE(t.size() == 10);
    for (int i = 0; i < 10; ++i) {
      CHECK(t[static_cast<std::size_t>(i)] >= i * 1.0);
      CHECK(t[static_cast<std::size_t>(i)] < (i + 1) * 1.0);
    }
  }

  TEST_CASE("multi-window sampling covers every window") {
    Rng rng(8);
    const std::vector<RayInterval> windows{{5, 6}, {30, 31}};
    for (int draw = 0; draw < 200; ++draw) {
      const auto t = segmented_sample(0.0, 50.0, windows, 40, 0.1, rng);
      CHECK(strictly_sorted(t));
      for (const auto& w : windows)
        CHECK(std::any_of(t.begin(), t.end(), [&](double x) { return w.contains(x); }));
    }
  }

  TEST_CASE("compute_weights examples") {
    const auto zero = compute_weights(std::vector<double>{0, 0, 0}, std::vector<double>{1, 1, 1});
    for (double w : zero) CHECK(w == 0.0);
    const auto opaque = compute_weights(std::vector<double>{1e6, 1, 1}, std::vector<double>{1, 1, 1});
    CHECK(opaque[0] == doctest::Approx(1.0));
    CHECK(opaque[1] < 1e-12);
    const auto w = compute_weights(std::vector<double>{1, 1}, std::vector<double>{1, 1});
    CHECK(w[0] == doctest::Approx(1 - std::exp(-1.0)).epsilon(1e-14));
    CHECK(w[1] == doctest::Approx(std::exp(-1.0) * (1 - std::exp(-1.0))).epsilon(1e-14));
  }

  TEST_CASE("weights split invariance and prefix monotonicity") {
    Rng rng(4);
    std::vector<double> sigma(20), delta(20);
    for (int i = 0; i < 20; ++i) {
      sigma[static_cast<std::size_t>(i)] = rng.uniform(0, 3);
      delta[static_cast<std::size_t>(i)] = rng.uniform(0.05, 0.5);
    }
    const auto w = compute_weights(sigma, delta);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) <= 1.0 + 1e-12);
    for (std::size_t k = 7; k < 9; ++k) {
      auto s2 = sigma, d2 = delta;
      d2[k] = delta[k] * 0.3;
      s2.insert(s2.begin() + static_cast<long>(k) + 1, sigma[k]);
      d2.insert(d2.begin() + static_cast<long>(k) + 1, delta[k] * 0.7);
      const auto w2 = compute_weights(s2, d2);
      CHECK(std::abs(w2[k] + w2[k + 1] - w[k]) < 1e-9);
      for (std::size_t i = k + 1; i < w.size(); ++i) CHECK(std::abs(w2[i + 1] - w[i]) < 1e-9);
    }
  }

  TEST_CASE("weights_backward matches finite differences") {
    Rng rng(12);
    std::vector<double> sigma(12), delta(12), g(12);
    for (std::size_t i = 0; i < 12; ++i) {
      sigma[i] = rng.uniform(0, 2);
      delta[i] = rng.uniform(0.1, 0.6);
      g[i] = rng.uniform(-1, 1);
    }
    const auto w = compute_weights(sigma, delta);
    const auto ds = weights_backward(sigma, delta, w, g);
    for (std::size_t k = 0; k < 12; ++k) {
      auto up = sigma, down = sigma;
      up[k] += 1e-6;
      down[k] -= 1e-6;
      const auto wu = compute_weights(up, delta), wd = compute_weights(down, delta);
      double num = 0.0;
      for (std::size_t i = 0; i < 12; ++i) num += g[i] * (wu[i] - wd[i]) / 2e-6;
      CHECK(ds[k] == doctest::Approx(num).epsilon(1e-6));
    }
  }

  TEST_CASE("render_depth and integrate_weight") {
    CHECK(render_depth(manual({5}, {1}), {0, 10}) == 5.0);
    const RaySamples s = manual({4, 5}, {0.2, 0.6});
    CHECK(render_depth(s, {0, 10}) == doctest::Approx(3.8));
    CHECK(integrate_weight(s, {0, 10}) == doctest::Approx(0.8));
    CHECK(integrate_weight(s, {5, 5}) == doctest::Approx(0.6));  // closed interval
    const RaySamples sym = manual({1, 2, 3}, {0.25, 0.1, 0.25});
    CHECK(render_depth(sym, {0, 4}) == doctest::Approx(2.0 * 0.6));
    CHECK(integrate_weight(manual({1, 2}, {0, 0}), {0, 5}) == 0.0);
  }

  TEST_CASE("interval lengths end at the bound") {
    const auto d = interval_lengths(std::vector<double>{1, 2, 4}, 10);
    CHECK(d == std::vector<double>{1, 2, 6});
  }

  TEST_CASE("fine sampling") {
    Rng rng(5);
    const std::vector<double> t{0, 1, 2, 3, 4};
    const std::vector<double> w{0, 0, 1, 0, 0};
    const auto merged = hierarchical_fine_sample(t, w, 5.0, 64, rng, 0.0);
    CHECK(merged.size() <= 69);
    CHECK(strictly_sorted(merged));
    for (double x : merged)
      if (std::find(t.begin(), t.end(), x) == t.end()) {
        CHECK(x >= 2.0);
        CHECK(x <= 3.0);
      }

    // Uniform weights and the all-zero case both spread evenly.
    for (const std::vector<double>& wts : {std::vector<double>(5, 0.2), std::vector<double>(5, 0.0)}) {
      std::vector<int> counts(5, 0);
      for (int draw = 0; draw < 1000; ++draw) {
        for (double x : hierarchical_fine_sample(t, wts, 5.0, 5, rng)) {
          if (std::find(t.begin(), t.end(), x) != t.end()) continue;
          ++counts[std::min<std::size_t>(4, static_cast<std::size_t>(x))];
        }
      }
      for (int c : counts) CHECK(std::abs(c - 1000) < 150);
    }
  }

  TEST_CASE("quadrature converges to the slab integrals") {
    const oracle::SlabField field({{9.5, 10.5, 2.0}});
    const auto exact = oracle::slab_integrals(2.0, 9.5, 10.5);
    double prev_err = 1e9;
    for (int n : {100, 200, 400, 800, 1600}) {
      std::vector<double> t(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = 20.0 * (i + 0.5) / n;
      const RaySamples s = render_ray(field, Vec3::Zero(), Vec3::UnitX(), t, 20.0);
      const double err = std::abs(integrate_weight(s, {0, 20}) - exact.weight) +
                         std::abs(render_depth(s, {0, 20}) - exact.depth);
      CHECK(err <= prev_err * 0.5 + 1e-12);
      prev_err = err;
    }
    CHECK(prev_err < 0.02);
  }
}
