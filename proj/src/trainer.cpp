// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace lidarfield {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (chunk_rays < 1) throw ConfigError("chunk_rays must be >= 1");
  if (sampling.coarse < 2) throw ConfigError("coarse sample count must be >= 2");
  if (sampling.fine < 0) throw ConfigError("fine sample count must be >= 0");
  if (!(sampling.lambda_in >= 0.0 && sampling.lambda_in <= 1.0)) throw ConfigError("lambda_in must lie in [0, 1]");
  if (!(base_lr > 0.0)) throw ConfigError("base learning rate must be positive");
  weights.validate();
  layout.validate();
}

RayBounds ray_bounds(const LidarRay& ray, const ParentBlock& parent, const LossWeights& weights) {
  RayBounds b;
  b.t0 = 0.0;
  const auto exit = ray_aabb_intersect(ray.origin, ray.dir, parent.box);
  b.far = std::max(exit ? exit->t_exit : ray.depth, ray.depth);
  b.inflation = weights.inflation;
  b.transition = weights.transition;
  if (ray.child_id) {
    if (const ChildRegion* child = find_child(parent, *ray.child_id)) {
      if (auto hit = ray_aabb_intersect(ray.origin, ray.dir, child->box)) {
        hit->t_enter = std::clamp(hit->t_enter, b.t0, b.far);
        hit->t_exit = std::clamp(hit->t_exit, hit->t_enter, b.far);
        b.child = *hit;
      }
    }
  }
  return b;
}

namespace {

Eigen::Matrix3Xd gather_points(std::span<const SampledRay> rays, std::size_t total) {
  Eigen::Matrix3Xd pts(3, static_cast<Eigen::Index>(total));
  Eigen::Index col = 0;
  for (const SampledRay& r : rays) {
    for (double t : r.t) pts.col(col++) = r.ray->origin + t * r.ray->dir;
  }
  return pts;
}

}  // namespace

LossBreakdown evaluate_rays(const FieldModel& model, const SceneNormalizer& norm, std::span<const SampledRay> rays,
                            const LossWeights& weights, Eigen::VectorXd* grad, double scale) {
  LossBreakdown sum;
  if (rays.empty()) return sum;
  std::size_t total = 0;
  for (const SampledRay& r : rays) total += r.t.size();
  ForwardCache cache;
  const Eigen::VectorXd sigma = model.forward(norm.apply(gather_points(rays, total)), grad ? &cache : nullptr);

  Eigen::VectorXd d_sigma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
  std::size_t offset = 0;
  for (const SampledRay& r : rays) {
    RaySamples s;
    s.t = r.t;
    s.delta = interval_lengths(s.t, r.bounds.far);
    s.sigma.assign(sigma.data() + offset, sigma.data() + offset + s.t.size());
    s.weights = compute_weights(s.sigma, s.delta);
    std::vector<double> grad_w(grad ? s.size() : 0, 0.0);
    const LossBreakdown l = total_loss(s, r.bounds, r.ray->depth, weights, grad_w, scale);
    if (!std::isfinite(l.total)) {
      throw NumericalError("non-finite loss on ray " + std::to_string(r.ray->id) + " (frame " +
                           std::to_string(r.ray->frame_id) + ")");
    }
    sum += l;
    if (grad) {
      const std::vector<double> ds = weights_backward(s.sigma, s.delta, s.weights, grad_w);
      for (std::size_t i = 0; i < ds.size(); ++i) d_sigma[static_cast<Eigen::Index>(offset + i)] = ds[i];
    }
    offset += s.t.size();
  }
  if (grad) model.backward(cache, d_sigma, *grad);
  return sum.scaled(1.0 / static_cast<double>(rays.size()));
}

std::vector<SampledRay> sample_rays(const FieldModel& model, const SceneNormalizer& norm, const ParentBlock& parent,
                                    std::span<const LidarRay* const> rays, const SamplingConfig& sampling,
                                    const LossWeights& weights, std::uint64_t seed) {
  std::vector<SampledRay> out;
  out.reserve(rays.size());
  std::vector<Rng> rngs;
  rngs.reserve(rays.size());
  std::size_t total = 0;
  for (const LidarRay* ray : rays) {
    SampledRay s;
    s.ray = ray;
    s.bounds = ray_bounds(*ray, parent, weights);
    rngs.emplace_back(mix_seed(seed, ray->id));
    s.t = segmented_sample(s.bounds, sampling.coarse, sampling.lambda_in, rngs.back());
    total += s.t.size();
    out.push_back(std::move(s));
  }
  if (sampling.fine <= 0 || out.empty()) return out;

  const Eigen::VectorXd sigma = model.forward(norm.apply(gather_points(out, total)));
  std::size_t offset = 0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    SampledRay& s = out[r];
    const std::vector<double> delta = interval_lengths(s.t, s.bounds.far);
    const std::vector<double> sig(sigma.data() + offset, sigma.data() + offset + s.t.size());
    offset += s.t.size();
    const std::vector<double> w = compute_weights(sig, delta);
    s.t = hierarchical_fine_sample(s.t, w, s.bounds.far, sampling.fine, rngs[r]);
  }
  return out;
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

TrainResult train(const ParentBlock& parent, std::span<const LidarRay> rays, const TrainConfig& cfg,
                  const Checkpoint* resume, const StepCallback& on_step) {
  cfg.validate();
  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  if (resume) {
    ck = *resume;
    if (!(ck.model.layout() == cfg.layout)) throw ConfigError("resume checkpoint layout differs from configuration");
    if (ck.optimizer.m.size() != ck.model.params().size()) {
      ck.optimizer = OptimizerState::fresh(ck.model.param_count(), cfg.base_lr);
    }
  } else {
    ck.model = FieldModel::initialized(cfg.layout, cfg.seed);
    ck.optimizer = OptimizerState::fresh(ck.model.param_count(), cfg.base_lr);
    ck.normalizer = SceneNormalizer::for_box(parent.box);
    ck.epoch = 0;
  }

  const auto start = std::chrono::steady_clock::now();
  const int first_epoch = ck.epoch;
  for (int epoch = first_epoch; epoch < first_epoch + cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
    const std::vector<std::size_t> order = shuffled_order(rays.size(), shuffle_rng);
    const double lr = lr_at(epoch, ck.optimizer.base_lr);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ck.model.param_count()));
      LossBreakdown batch_loss;
      for (std::size_t c = begin; c < end; c += cfg.chunk_rays) {
        const std::size_t c_end = std::min(end, c + cfg.chunk_rays);
        std::vector<const LidarRay*> chunk;
        chunk.reserve(c_end - c);
        for (std::size_t i = c; i < c_end; ++i) chunk.push_back(&rays[order[i]]);
        const std::uint64_t seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
        const auto sampled =
            sample_rays(ck.model, ck.normalizer, parent, chunk, cfg.sampling, cfg.weights, seed);
        const LossBreakdown l = evaluate_rays(ck.model, ck.normalizer, sampled, cfg.weights, &grad, inv_batch);
        batch_loss += l.scaled(static_cast<double>(sampled.size()) * inv_batch);
      }
      if (!grad.allFinite()) {
        std::string ids;
        for (std::size_t i = begin; i < end && i < begin + 16; ++i) ids += " " + std::to_string(rays[order[i]].id);
        throw NumericalError("non-finite gradient in batch starting at step " +
                             std::to_string(ck.optimizer.step) + "; rays:" + ids);
      }
      adam_step(ck.optimizer, ck.model.params(), grad, lr);
      StepLog entry;
      entry.step = ck.optimizer.step;
      entry.epoch = epoch;
      entry.lr = lr;
      entry.loss = batch_loss;
      entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (on_step) on_step(entry);
      result.log.push_back(entry);
    }
    ck.epoch = epoch + 1;
  }
  return result;
}

void write_train_log(std::ostream& out, std::span<const StepLog> log) {
  out << "step\tepoch\tlr\tparent_depth\tchild_free\tchild_depth\ttotal\twall_seconds\n";
  char buf[512];
  for (const StepLog& s : log) {
    std::snprintf(buf, sizeof(buf), "%lld\t%d\t%.6g\t%.9g\t%.9g\t%.9g\t%.9g\t%.3f\n", static_cast<long long>(s.step),
                  s.epoch, s.lr, s.loss.parent_depth, s.loss.child_free, s.loss.child_depth, s.loss.total,
                  s.wall_seconds);
    out << buf;
  }
}

}  // namespace lidarfield
