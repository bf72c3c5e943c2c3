// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/render.hpp"

#include <algorithm>
#include <cmath>

namespace lidarfield {

Eigen::VectorXd NeuralDensity::densities(const Eigen::Matrix3Xd& points) const {
  return model_.forward(norm_.apply(points));
}

RayInterval RayBounds::child_window() const {
  const RayInterval& c = *child;
  const double lo = std::clamp(c.t_enter - inflation, t0, far);
  const double hi = std::clamp(c.t_exit + inflation, lo, far);
  return {lo, hi};
}

RayInterval RayBounds::depth_window() const {
  const RayInterval w = child_window();
  const double lo = std::clamp(w.t_enter - transition, t0, far);
  const double hi = std::clamp(w.t_exit + transition, lo, far);
  return {lo, hi};
}

void stratified_uniform(double lo, double hi, int n, Rng& rng, std::vector<double>& out) {
  if (n <= 0) return;
  const double step = (hi - lo) / n;
  for (int i = 0; i < n; ++i) out.push_back(lo + (i + rng.uniform()) * step);
}

namespace {

void sort_unique(std::vector<double>& t) {
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
}

}  // namespace

std::vector<double> segmented_sample(const RayBounds& bounds, int n, double lambda_in, Rng& rng) {
  if (!bounds.child) {
    std::vector<double> t;
    t.reserve(static_cast<std::size_t>(n));
    stratified_uniform(bounds.t0, bounds.far, n, rng, t);
    sort_unique(t);
    return t;
  }
  const RayInterval window = bounds.child_window();
  return segmented_sample(bounds.t0, bounds.far, std::span<const RayInterval>(&window, 1), n, lambda_in, rng);
}

std::vector<double> segmented_sample(double t0, double far, std::span<const RayInterval> windows, int n,
                                     double lambda_in, Rng& rng) {
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(n));
  int n_in = windows.empty() ? 0 : static_cast<int>(std::ceil(lambda_in * n - 1e-9));
  n_in = std::clamp(n_in, 0, n);
  const int k = static_cast<int>(windows.size());
  for (int i = 0; i < k; ++i) {
    const int share = n_in / k + (i < n_in % k ? 1 : 0);
    stratified_uniform(windows[static_cast<std::size_t>(i)].t_enter, windows[static_cast<std::size_t>(i)].t_exit,
                       share, rng, t);
  }
  stratified_uniform(t0, far, n - n_in, rng, t);
  sort_unique(t);
  return t;
}

std::vector<double> interval_lengths(std::span<const double> t, double upper) {
  std::vector<double> delta(t.size());
  for (std::size_t i = 0; i + 1 < t.size(); ++i) delta[i] = t[i + 1] - t[i];
  if (!t.empty()) delta.back() = std::max(0.0, upper - t.back());
  return delta;
}

std::vector<double> compute_weights(std::span<const double> sigma, std::span<const double> delta) {
  std::vector<double> w(sigma.size());
  double optical_depth = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double tau = sigma[i] * delta[i];
    // T_i * alpha_i written as T_i - T_{i+1} keeps the sum telescoping.
    w[i] = std::exp(-optical_depth) * -std::expm1(-tau);
    optical_depth += tau;
  }
  return w;
}

std::vector<double> weights_backward(std::span<const double> sigma, std::span<const double> delta,
                                     std::span<const double> weights, std::span<const double> d_weights) {
  const std::size_t n = sigma.size();
  std::vector<double> d_sigma(n);
  // dw_i/dsigma_k = -delta_k w_i for k < i, delta_k T_{k+1} for k == i.
  double suffix = 0.0;  // sum_{i>k} g_i w_i
  double optical_depth = 0.0;
  std::vector<double> transmittance_after(n);
  for (std::size_t i = 0; i < n; ++i) {
    optical_depth += sigma[i] * delta[i];
    transmittance_after[i] = std::exp(-optical_depth);
  }
  for (std::size_t k = n; k-- > 0;) {
    d_sigma[k] = delta[k] * (transmittance_after[k] * d_weights[k] - suffix);
    suffix += d_weights[k] * weights[k];
  }
  return d_sigma;
}

double render_depth(const RaySamples& samples, RayInterval over) {
  double depth = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (over.contains(samples.t[i])) depth += samples.weights[i] * samples.t[i];
  }
  return depth;
}

double integrate_weight(const RaySamples& samples, RayInterval over) {
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (over.contains(samples.t[i])) total += samples.weights[i];
  }
  return total;
}

std::vector<double> hierarchical_fine_sample(std::span<const double> t, std::span<const double> weights,
                                             double upper, int n_fine, Rng& rng, double floor) {
  std::vector<double> out(t.begin(), t.end());
  if (t.empty() || n_fine <= 0) return out;
  const std::vector<double> delta = interval_lengths(t, upper);
  std::vector<double> cdf(t.size() + 1, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mass = delta[i] > 0.0 ? std::max(weights[i], 0.0) + floor : 0.0;
    cdf[i + 1] = cdf[i] + mass;
  }
  const double total = cdf.back();
  if (!(total > 0.0)) return out;
  out.reserve(t.size() + static_cast<std::size_t>(n_fine));
  for (int k = 0; k < n_fine; ++k) {
    const double u = (k + rng.uniform()) / n_fine * total;
    // First bin whose cumulative mass exceeds u.
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    std::size_t bin = static_cast<std::size_t>(std::distance(cdf.begin() + 1, it));
    bin = std::min(bin, t.size() - 1);
    while (delta[bin] <= 0.0 && bin > 0) --bin;
    const double mass = cdf[bin + 1] - cdf[bin];
    const double frac = mass > 0.0 ? std::clamp((u - cdf[bin]) / mass, 0.0, 1.0) : 0.0;
    double node = t[bin] + frac * delta[bin];
    if (node >= upper) node = std::nextafter(upper, t[bin]);
    out.push_back(node);
  }
  sort_unique(out);
  return out;
}

RaySamples render_ray(const DensityField& field, const Vec3& origin, const Vec3& dir, std::vector<double> t,
                      double upper) {
  RaySamples s;
  s.t = std::move(t);
  s.delta = interval_lengths(s.t, upper);
  Eigen::Matrix3Xd pts(3, static_cast<Eigen::Index>(s.t.size()));
  for (std::size_t i = 0; i < s.t.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = origin + s.t[i] * dir;
  const Eigen::VectorXd sigma = s.t.empty() ? Eigen::VectorXd() : field.densities(pts);
  s.sigma.assign(sigma.data(), sigma.data() + sigma.size());
  s.weights = compute_weights(s.sigma, s.delta);
  return s;
}

RaySamples render_hierarchical(const DensityField& field, const Vec3& origin, const Vec3& dir,
                               std::vector<double> coarse_nodes, double upper, int n_fine, Rng& rng) {
  const RaySamples coarse = render_ray(field, origin, dir, std::move(coarse_nodes), upper);
  if (n_fine <= 0) return coarse;
  return render_ray(field, origin, dir, hierarchical_fine_sample(coarse.t, coarse.weights, upper, n_fine, rng),
                    upper);
}

}  // namespace lidarfield
