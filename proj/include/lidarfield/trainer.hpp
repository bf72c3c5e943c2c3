// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "lidarfield/field.hpp"
#include "lidarfield/losses.hpp"
#include "lidarfield/partition.hpp"
#include "lidarfield/render.hpp"

namespace lidarfield {

struct TrainConfig {
  int epochs = 1;
  std::size_t batch_size = 1024;
  std::uint64_t seed = 0;
  SamplingConfig sampling;
  LossWeights weights;
  double base_lr = 4e-5;
  FieldLayout layout;
  /// Rays per forward/backward pass; bounds memory, does not change results.
  std::size_t chunk_rays = 64;

  void validate() const;
};

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;  // batch means
  double wall_seconds = 0.0;
};

/// Rays with frozen quadrature nodes.
struct SampledRay {
  const LidarRay* ray = nullptr;
  RayBounds bounds;
  std::vector<double> t;
};

/// t0 = 0, far = exit of the parent box, child interval from the owning
/// child's box when the ray has one.
RayBounds ray_bounds(const LidarRay& ray, const ParentBlock& parent, const LossWeights& weights);

/// Mean loss over rays on their frozen nodes. When grad is given, adds
/// scale * d(sum of per-ray losses)/d(theta) into it.
LossBreakdown evaluate_rays(const FieldModel& model, const SceneNormalizer& norm, std::span<const SampledRay> rays,
                            const LossWeights& weights, Eigen::VectorXd* grad = nullptr, double scale = 1.0);

/// Coarse segmented nodes plus fine resampling under the current model.
std::vector<SampledRay> sample_rays(const FieldModel& model, const SceneNormalizer& norm, const ParentBlock& parent,
                                    std::span<const LidarRay* const> rays, const SamplingConfig& sampling,
                                    const LossWeights& weights, std::uint64_t seed);

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
};

using StepCallback = std::function<void(const StepLog&)>;

/// epochs x ceil(|rays| / batch_size) Adam steps on one parent block.
/// Resuming continues from the checkpoint's epoch counter and optimizer.
TrainResult train(const ParentBlock& parent, std::span<const LidarRay> rays, const TrainConfig& cfg,
                  const Checkpoint* resume = nullptr, const StepCallback& on_step = {});

/// Tab-separated: step, epoch, lr, parent_depth, child_free, child_depth, total, wall_seconds.
void write_train_log(std::ostream& out, std::span<const StepLog> log);

}  // namespace lidarfield
