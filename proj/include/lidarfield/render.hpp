// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lidarfield/field.hpp"
#include "lidarfield/geometry.hpp"
#include "lidarfield/random.hpp"

namespace lidarfield {

/// Anything that yields a non-negative density at world positions.
class DensityField {
 public:
  virtual ~DensityField() = default;
  /// points is 3 x S; returns S densities.
  virtual Eigen::VectorXd densities(const Eigen::Matrix3Xd& points) const = 0;
};

/// A trained network bound to its parent-box normalization.
class NeuralDensity final : public DensityField {
 public:
  NeuralDensity(const FieldModel& model, SceneNormalizer norm) : model_(model), norm_(norm) {}
  Eigen::VectorXd densities(const Eigen::Matrix3Xd& points) const override;

 private:
  const FieldModel& model_;
  SceneNormalizer norm_;
};

/// Integration bounds along one ray.
struct RayBounds {
  double t0 = 0.0;
  double far = 0.0;
  std::optional<RayInterval> child;
  double inflation = 0.0;   // widens the child interval on both sides
  double transition = 0.0;  // extra widening for the child depth window

  /// [n_c - inflation, f_c + inflation] clipped to [t0, far]. Requires a child.
  RayInterval child_window() const;
  /// child_window() widened by transition, clipped to [t0, far].
  RayInterval depth_window() const;
  RayInterval full() const { return {t0, far}; }
};

struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<double> sigma;
  std::vector<double> weights;

  std::size_t size() const { return t.size(); }
};

struct SamplingConfig {
  int coarse = 768;
  int fine = 1536;
  double lambda_in = 0.1;
};

inline constexpr double kFineWeightFloor = 1e-5;

/// n stratified-uniform nodes on [lo, hi), appended to out.
void stratified_uniform(double lo, double hi, int n, Rng& rng, std::vector<double>& out);

/// Child-segmented stratified sampling: ceil(lambda_in * n) nodes in the
/// inflated child window and the rest over [t0, far]. Without a child, all n
/// nodes cover [t0, far]. Sorted, duplicates removed.
std::vector<double> segmented_sample(const RayBounds& bounds, int n, double lambda_in, Rng& rng);

/// Same split over several windows; the in-window budget is shared equally.
std::vector<double> segmented_sample(double t0, double far, std::span<const RayInterval> windows, int n,
                                     double lambda_in, Rng& rng);

/// delta_i = t_{i+1} - t_i, last one running to upper.
std::vector<double> interval_lengths(std::span<const double> t, double upper);

/// w_i = (1 - exp(-sigma_i delta_i)) * prod_{j<i} exp(-sigma_j delta_j).
std::vector<double> compute_weights(std::span<const double> sigma, std::span<const double> delta);

/// Chain rule through compute_weights: d(loss)/d(sigma) from d(loss)/d(w).
std::vector<double> weights_backward(std::span<const double> sigma, std::span<const double> delta,
                                     std::span<const double> weights, std::span<const double> d_weights);

/// Unnormalized expected depth: sum of w_i t_i over nodes in [a, b].
double render_depth(const RaySamples& samples, RayInterval over);

/// Sum of w_i over nodes in [a, b].
double integrate_weight(const RaySamples& samples, RayInterval over);

/// Inverse-CDF resampling of n_fine nodes from bins [t_i, t_i + delta_i) with
/// mass w_i + floor, merged with the coarse nodes and sorted.
std::vector<double> hierarchical_fine_sample(std::span<const double> t, std::span<const double> weights,
                                             double upper, int n_fine, Rng& rng,
                                             double floor = kFineWeightFloor);

/// Evaluates densities and weights for nodes along origin + t * dir.
RaySamples render_ray(const DensityField& field, const Vec3& origin, const Vec3& dir, std::vector<double> t,
                      double upper);

/// Coarse pass on the given nodes, then fine resampling and a second pass.
RaySamples render_hierarchical(const DensityField& field, const Vec3& origin, const Vec3& dir,
                               std::vector<double> coarse_nodes, double upper, int n_fine, Rng& rng);

}  // namespace lidarfield
