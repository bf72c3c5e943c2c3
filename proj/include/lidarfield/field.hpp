// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lidarfield/geometry.hpp"
#include "lidarfield/types.hpp"

namespace lidarfield {

/// Network shape. Hidden layer `skip_layer` (0-based) receives the encoded
/// input concatenated to the previous activations. Layer 0 already sees the
/// input, so 0 and -1 both mean no skip connection.
struct FieldLayout {
  int enc_levels = 10;
  std::vector<int> hidden = {256, 256, 256, 256, 256, 256, 256, 256};
  int skip_layer = 4;

  int input_dim() const { return 3 + 6 * enc_levels; }
  int layer_input_dim(std::size_t layer) const;
  std::size_t param_count() const;
  void validate() const;

  bool operator==(const FieldLayout&) const = default;
};

/// (x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(L-1) pi x), cos(2^(L-1) pi x)),
/// each sin/cos block holding the three components.
std::vector<double> positional_encode(const Vec3& x, int levels);

/// Column-wise encoding of a batch of normalized positions.
Eigen::MatrixXd positional_encode(const Eigen::Matrix3Xd& x, int levels);

/// Maps a parent box onto [-1, 1]^3; positions outside are clamped.
struct SceneNormalizer {
  Vec3 center = Vec3::Zero();
  Vec3 half_extent = Vec3::Ones();

  static SceneNormalizer for_box(const Aabb& box);
  Vec3 apply(const Vec3& world) const;
  Eigen::Matrix3Xd apply(const Eigen::Matrix3Xd& world) const;
};

struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;  // one per hidden layer, then the head's input
  std::vector<Eigen::MatrixXd> pre_activations;
  Eigen::RowVectorXd raw;
};

double softplus(double x);
double sigmoid(double x);

/// Position-only density MLP: ReLU hidden layers and a softplus head.
class FieldModel {
 public:
  FieldModel() = default;
  /// All-zero parameters.
  explicit FieldModel(FieldLayout layout);
  /// He-uniform weights, zero biases; bit-reproducible for a given seed.
  static FieldModel initialized(FieldLayout layout, std::uint64_t seed);

  const FieldLayout& layout() const { return layout_; }
  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  /// Densities for normalized positions (3 x S). Fills cache when given.
  Eigen::VectorXd forward(const Eigen::Matrix3Xd& normalized, ForwardCache* cache = nullptr) const;

  /// Accumulates d(loss)/d(theta) into grad given d(loss)/d(sigma).
  void backward(const ForwardCache& cache, const Eigen::VectorXd& d_sigma, Eigen::VectorXd& grad) const;

 private:
  struct LayerView {
    Eigen::Map<const Eigen::MatrixXd> weight;
    Eigen::Map<const Eigen::VectorXd> bias;
  };
  LayerView layer(std::size_t index) const;
  std::size_t layer_offset(std::size_t index) const;

  FieldLayout layout_;
  Eigen::VectorXd params_;
  std::vector<std::size_t> offsets_;
};

/// Density at a world position under the parent-box normalization.
double density_at(const FieldModel& model, const Vec3& x_world, const SceneNormalizer& norm);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
  AdamConfig config;
  double base_lr = 4e-5;

  static OptimizerState fresh(std::size_t n_params, double base_lr, AdamConfig config = {});
};

/// Bias-corrected Adam update. Throws NumericalError, leaving params and
/// state untouched, if the gradient or the update is non-finite.
void adam_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

/// Step schedule: x0.1 at epoch 5 and again at epoch 120.
double lr_at(int epoch, double base);

struct Checkpoint {
  FieldModel model;
  OptimizerState optimizer;
  SceneNormalizer normalizer;
  int epoch = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<std::byte> serialize_checkpoint(const Checkpoint& ckpt, std::uint32_t version = kCheckpointVersion);
Checkpoint deserialize_checkpoint(std::span<const std::byte> bytes);

}  // namespace lidarfield
