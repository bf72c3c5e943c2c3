// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "lidarfield/raycast.hpp"

namespace lidarfield {

namespace {

namespace fs = std::filesystem;

fs::path scan_file(const RunConfig& cfg, int frame) {
  char name[32];
  std::snprintf(name, sizeof name, "%06d.bin", frame);
  return cfg.scans_path() / name;
}

std::vector<ParentBlock> load_hierarchy(const RunConfig& cfg) {
  std::ifstream in(cfg.hierarchy_path());
  if (!in) throw ConfigError("missing hierarchy " + cfg.hierarchy_path().string() + "; run partition first");
  auto blocks = read_hierarchy(in);
  if (blocks.empty()) throw ConfigError("hierarchy " + cfg.hierarchy_path().string() + " has no blocks");
  return blocks;
}

void ensure_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
}

std::uint64_t ray_seed(std::uint64_t seed, int frame, std::size_t ray) {
  return mix_seed(mix_seed(seed, 0xe7a10000ULL + static_cast<std::uint64_t>(frame)), ray);
}

}  // namespace

EvalMethod parse_method(const std::string& name) {
  if (name == "pcnerf-two-step") return EvalMethod::two_step;
  if (name == "pcnerf-one-step") return EvalMethod::one_step;
  if (name == "raycast") return EvalMethod::raycast;
  throw ConfigError("unknown method '" + name + "' (pcnerf-two-step, pcnerf-one-step, raycast)");
}

std::string method_name(EvalMethod method) {
  switch (method) {
    case EvalMethod::two_step: return "pcnerf-two-step";
    case EvalMethod::one_step: return "pcnerf-one-step";
    case EvalMethod::raycast: return "raycast";
  }
  return "";
}

int count_frames(const RunConfig& cfg) {
  const fs::path dir = cfg.scans_path();
  if (!fs::is_directory(dir)) throw ConfigError("scan directory " + dir.string() + " does not exist");
  std::size_t scans = 0;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".bin") ++scans;
  if (scans == 0) throw ConfigError("scan directory " + dir.string() + " has no scans");
  if (!fs::exists(cfg.poses_path())) throw ConfigError("pose file " + cfg.poses_path().string() + " does not exist");
  return static_cast<int>(read_pose_file(cfg.poses_path()).size());
}

FrameSplit dataset_split(const RunConfig& cfg) { return split_frames(count_frames(cfg), cfg.sparsity); }

std::vector<PosedCloud> load_frames(const RunConfig& cfg, std::span<const int> ids) {
  const std::vector<Pose> poses = read_pose_file(cfg.poses_path());
  std::vector<PosedCloud> frames;
  frames.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= poses.size())
      throw ConfigError("frame " + std::to_string(id) + " has no pose");
    const fs::path file = scan_file(cfg, id);
    if (!fs::exists(file)) throw ConfigError("missing scan " + file.string());
    PosedCloud f;
    f.frame_id = id;
    f.pose = poses[static_cast<std::size_t>(id)];
    f.world = range_filter(to_world(read_scan_file(file, id), f.pose), f.pose.translation, cfg.max_range);
    frames.push_back(std::move(f));
  }
  return frames;
}

const ParentBlock& block_for(std::span<const ParentBlock> blocks, const Vec3& p) {
  const ParentBlock* best = nullptr;
  for (const ParentBlock& b : blocks) {
    if (b.box.contains(p) && (!best || b.box.volume() < best->box.volume())) best = &b;
  }
  if (best) return *best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const ParentBlock& b : blocks) {
    const double d = (b.box.center() - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = &b;
    }
  }
  if (!best) throw ConfigError("no parent blocks");
  return *best;
}

void write_ply(const fs::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char buf[96];
  for (const Vec3& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

void cmd_make_scene(const RunConfig& cfg, std::ostream& log) {
  if (cfg.scene_file.empty()) throw ConfigError("scene.file is not set");
  if (!fs::exists(cfg.scene_file)) throw ConfigError("scene file " + cfg.scene_file.string() + " does not exist");
  const Scene scene = read_scene_file(cfg.scene_file);
  const std::vector<Pose> poses = trajectory_poses(cfg.trajectory);
  std::error_code ec;
  fs::create_directories(cfg.scans_path(), ec);
  if (ec) throw ConfigError("cannot create " + cfg.scans_path().string() + ": " + ec.message());
  std::size_t total = 0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const int id = static_cast<int>(i);
    Rng noise(mix_seed(cfg.seed, 0x5ca40000ULL + i));
    const PointCloud scan = simulate_scan(scene, poses[i], cfg.beams, id, &noise, cfg.range_noise);
    write_scan_file(scan_file(cfg, id), scan);
    total += scan.size();
  }
  std::ofstream out(cfg.poses_path());
  if (!out) throw ConfigError("cannot write " + cfg.poses_path().string());
  out << format_poses(poses);
  log << "make-scene: " << poses.size() << " frames, " << total << " points, " << scene.primitives.size()
      << " primitives\n";
}

std::vector<ParentBlock> cmd_partition(const RunConfig& cfg, std::ostream& log) {
  const FrameSplit split = dataset_split(cfg);
  const std::vector<PosedCloud> frames = load_frames(cfg, split.train_ids);
  std::vector<ParentBlock> blocks = build_hierarchy(frames, cfg.partition);
  ensure_output(cfg);
  std::ofstream out(cfg.hierarchy_path());
  if (!out) throw ConfigError("cannot write " + cfg.hierarchy_path().string());
  write_hierarchy(out, blocks);

  std::size_t ground = 0, object = 0;
  for (const ParentBlock& b : blocks)
    for (const ChildRegion& c : b.children) (c.kind == ChildKind::ground ? ground : object)++;
  log << "partition: " << split.train_ids.size() << " train / " << split.test_ids.size() << " test frames, "
      << blocks.size() << " blocks, " << ground + object << " children (" << ground << " ground, " << object
      << " object)\n";
  return blocks;
}

void cmd_train(const RunConfig& cfg, bool resume, std::ostream& log) {
  const std::vector<ParentBlock> blocks = load_hierarchy(cfg);
  const FrameSplit split = dataset_split(cfg);
  const std::vector<PosedCloud> frames = load_frames(cfg, split.train_ids);
  for (const ParentBlock& block : blocks) {
    const std::vector<LidarRay> rays = assign_rays(frames, block);
    if (rays.empty()) {
      log << "train: block " << block.block_id << " has no rays, skipped\n";
      continue;
    }
    std::unique_ptr<Checkpoint> previous;
    const fs::path ckpt_path = cfg.checkpoint_path(block.block_id);
    if (resume) {
      if (!fs::exists(ckpt_path)) throw ConfigError("cannot resume: missing checkpoint " + ckpt_path.string());
      previous = std::make_unique<Checkpoint>(load_checkpoint(ckpt_path));
    }
    std::size_t steps_per_epoch = (rays.size() + cfg.train.batch_size - 1) / cfg.train.batch_size;
    const auto report = [&](const StepLog& s) {
      if (s.step % 50 == 0 || (s.step % static_cast<std::int64_t>(steps_per_epoch)) == 0) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "train: block %d epoch %d step %lld loss %.6g (%.1fs)\n", block.block_id,
                      s.epoch, static_cast<long long>(s.step), s.loss.total, s.wall_seconds);
        log << buf << std::flush;
      }
    };
    const TrainResult result = train(block, rays, cfg.train, previous.get(), report);
    save_checkpoint(ckpt_path, result.checkpoint);

    char name[40];
    std::snprintf(name, sizeof name, "train_log_%03d.tsv", block.block_id);
    std::ofstream tsv(cfg.output_dir / name, resume ? std::ios::app : std::ios::trunc);
    if (!tsv) throw ConfigError("cannot write training log");
    if (resume) {
      std::ostringstream body;
      write_train_log(body, result.log);
      const std::string text = body.str();
      tsv << text.substr(text.find('\n') + 1);
    } else {
      write_train_log(tsv, result.log);
    }
    if (!result.log.empty()) {
      log << "train: block " << block.block_id << " " << rays.size() << " rays, loss "
          << result.log.front().loss.total << " -> " << result.log.back().loss.total << ", epoch "
          << result.checkpoint.epoch << ", checkpoint " << ckpt_path.string() << '\n';
    }
  }
}

void cmd_raycast_build(const RunConfig& cfg, std::ostream& log) {
  const FrameSplit split = dataset_split(cfg);
  const std::vector<PosedCloud> frames = load_frames(cfg, split.train_ids);
  std::vector<PointCloud> clouds;
  clouds.reserve(frames.size());
  for (const PosedCloud& f : frames) clouds.push_back(f.world);
  const VoxelMap map = build_voxel_map(clouds, cfg.voxel);
  ensure_output(cfg);
  save_voxel_map(cfg.voxel_path().string(), map);
  log << "raycast-build: " << map.occupied_count() << " occupied voxels, " << fs::file_size(cfg.voxel_path())
      << " bytes\n";
}

EvalOutcome cmd_synthesize(const RunConfig& cfg, EvalMethod method, bool metrics, std::ostream& log) {
  const FrameSplit split = dataset_split(cfg);
  const std::vector<int>& ids = cfg.eval_on_train ? split.train_ids : split.test_ids;
  const std::vector<PosedCloud> frames = load_frames(cfg, ids);

  std::vector<ParentBlock> blocks;
  std::map<int, Checkpoint> models;
  std::unique_ptr<VoxelMap> voxels;
  if (method == EvalMethod::raycast) {
    if (!fs::exists(cfg.voxel_path()))
      throw ConfigError("missing voxel map " + cfg.voxel_path().string() + "; run raycast-build first");
    voxels = std::make_unique<VoxelMap>(load_voxel_map(cfg.voxel_path().string()));
  } else {
    blocks = load_hierarchy(cfg);
  }

  const std::string name = method_name(method);
  ensure_output(cfg);
  const fs::path synth_dir = cfg.output_dir / ("synth_" + name);
  fs::create_directories(synth_dir);
  std::ofstream stats(synth_dir / "stats.csv");
  stats << "frame,rays,valid,invalid,mean_weight\n";

  EvalOutcome outcome;
  PointCloud stitched_pred, stitched_real;
  for (const PosedCloud& frame : frames) {
    const Pose& pose = frame.pose;
    const Mat3 to_sensor = pose.rotation.transpose();
    std::vector<Vec3> dirs;
    std::vector<double> truth;
    dirs.reserve(frame.world.size());
    truth.reserve(frame.world.size());
    for (const Vec3& p : frame.world.points) {
      const Vec3 local = to_sensor * (p - pose.translation);
      const double r = local.norm();
      if (r == 0.0) continue;
      dirs.push_back(local / r);
      truth.push_back(r);
    }

    DepthFn predict;
    const ParentBlock* block = nullptr;
    std::unique_ptr<NeuralDensity> field;
    if (method == EvalMethod::raycast) {
      predict = [&](const Vec3& o, const Vec3& d, std::size_t) {
        DepthPrediction p;
        p.method = DepthMethod::ray_cast;
        p.depth = cast_ray(*voxels, o, d, cfg.max_range);
        return p;
      };
    } else {
      block = &block_for(blocks, pose.translation);
      auto it = models.find(block->block_id);
      if (it == models.end()) {
        const fs::path path = cfg.checkpoint_path(block->block_id);
        if (!fs::exists(path)) throw ConfigError("missing checkpoint " + path.string() + "; run train first");
        it = models.emplace(block->block_id, load_checkpoint(path)).first;
      }
      field = std::make_unique<NeuralDensity>(it->second.model, it->second.normalizer);
      predict = [&, block, id = frame.frame_id](const Vec3& o, const Vec3& d, std::size_t i) {
        Rng rng(ray_seed(cfg.seed, id, i));
        const auto exit = ray_aabb_intersect(o, d, block->box);
        const double far = exit ? exit->t_exit : 0.0;
        if (!(far > 0.0)) return DepthPrediction{};
        if (method == EvalMethod::one_step) {
          RayBounds bounds;
          bounds.far = far;
          return one_step_depth(*field, o, d, bounds, cfg.inference.sampling, rng);
        }
        return two_step_depth(*field, o, d, 0.0, far, block->children, cfg.inference, rng);
      };
    }

    const SynthesizedView view = synthesize_view(pose, dirs, predict);
    char fname[32];
    std::snprintf(fname, sizeof fname, "%06d.ply", frame.frame_id);
    write_ply(synth_dir / fname, view.cloud);

    std::vector<std::optional<double>> pred;
    pred.reserve(view.predictions.size());
    double w_sum = 0.0;
    for (const DepthPrediction& p : view.predictions) {
      pred.push_back(p.depth);
      w_sum += p.weight_integral;
    }
    char row[128];
    std::snprintf(row, sizeof row, "%d,%zu,%zu,%zu,%.9g\n", frame.frame_id, dirs.size(), view.cloud.size(), view.invalid,
                  dirs.empty() ? 0.0 : w_sum / static_cast<double>(dirs.size()));
    stats << row;

    if (metrics) {
      outcome.frames.push_back(frame_metrics(frame.frame_id, pred, truth, view.cloud, frame.world, cfg.tau));
      stitched_pred.points.insert(stitched_pred.points.end(), view.cloud.points.begin(), view.cloud.points.end());
      stitched_real.points.insert(stitched_real.points.end(), frame.world.points.begin(), frame.world.points.end());
    }
    log << name << ": frame " << frame.frame_id << " " << view.cloud.size() << "/" << dirs.size()
        << " rays with depth\n"
        << std::flush;
  }

  if (metrics) {
    if (!stitched_pred.empty() && !stitched_real.empty()) {
      outcome.map = map_metrics(stitched_pred, stitched_real, cfg.tau);
      outcome.has_map = true;
    }
    std::ofstream csv(cfg.output_dir / ("metrics_" + name + ".csv"));
    write_metrics_csv(csv, name, outcome.frames);
    if (outcome.has_map) {
      std::ofstream map_csv(cfg.output_dir / ("map_" + name + ".csv"));
      write_map_csv(map_csv, name, outcome.map);
    }
    print_metrics_table(log, name, outcome.frames, outcome.has_map ? &outcome.map : nullptr);
  }
  return outcome;
}

}  // namespace lidarfield
