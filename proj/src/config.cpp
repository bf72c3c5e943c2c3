// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace lidarfield {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError(key + ": cannot parse '" + value + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError(key + ": value must be finite");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

Vec3 parse_vec3(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  std::string a, b, c, extra;
  if (!(ss >> a >> b >> c) || (ss >> extra)) throw ConfigError(key + ": expected three numbers");
  return {parse_number<double>(key, a), parse_number<double>(key, b), parse_number<double>(key, c)};
}

}  // namespace

std::map<std::string, std::string> parse_ini(std::string_view text) {
  std::map<std::string, std::string> out;
  std::string section;
  int line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key = std::string(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full)) throw ConfigError(where + "duplicate key " + full);
    out[full] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

std::filesystem::path RunConfig::scans_path() const { return scans_dir.empty() ? output_dir / "scans" : scans_dir; }

std::filesystem::path RunConfig::poses_path() const {
  return pose_file.empty() ? output_dir / "poses.txt" : pose_file;
}

std::filesystem::path RunConfig::checkpoint_path(int block_id) const {
  char name[32];
  std::snprintf(name, sizeof name, "block_%03d.ckpt", block_id);
  return output_dir / name;
}

void RunConfig::validate() const {
  if (!(max_range > 0.0)) throw ConfigError("data.max_range must be positive");
  if (!(sparsity > 0.0 && sparsity < 1.0)) throw ConfigError("data.sparsity must lie in (0, 1)");
  if (!(range_noise >= 0.0)) throw ConfigError("scene.range_noise must be >= 0");
  if (!(voxel > 0.0)) throw ConfigError("eval.voxel must be positive");
  if (!(tau > 0.0)) throw ConfigError("eval.tau must be positive");
  const PartitionParams& p = partition;
  if (!(p.yaw_threshold_deg > 0.0)) throw ConfigError("partition.yaw_threshold must be positive");
  if (!(p.margin >= 0.0)) throw ConfigError("partition.margin must be >= 0");
  if (!(p.merge_iou > 0.0 && p.merge_iou <= 1.0)) throw ConfigError("partition.merge_iou must lie in (0, 1]");
  if (!(p.ground_cell > 0.0)) throw ConfigError("partition.ground_cell must be positive");
  if (!(p.ground_height >= 0.0)) throw ConfigError("partition.ground_height must be >= 0");
  if (!(p.cluster_radius > 0.0)) throw ConfigError("partition.cluster_radius must be positive");
  if (!(p.min_thickness >= 0.0)) throw ConfigError("partition.min_thickness must be >= 0");
  if (!(p.ground_tile > 0.0)) throw ConfigError("partition.ground_tile must be positive");
  if (!(inference.min_weight >= 0.0 && inference.min_weight <= 1.0))
    throw ConfigError("inference.min_weight must lie in [0, 1]");
  if (!(inference.inflate_step >= 0.0)) throw ConfigError("inference.inflate_step must be >= 0");
  if (inference.max_retries < 0) throw ConfigError("inference.max_retries must be >= 0");
  beams.validate();
  trajectory.validate();
  train.validate();
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  const auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  const auto dbl = [](double& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<double>(k, v); };
  };
  const auto integer = [](int& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<int>(k, v); };
  };
  const auto size = [](std::size_t& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<std::size_t>(k, v); };
  };
  const auto file = [&path](std::filesystem::path& dst) -> Setter {
    return [&dst, &path](const std::string&, const std::string& v) { dst = path(v); };
  };

  FieldLayout& layout = cfg.train.layout;
  int hidden_layers = static_cast<int>(layout.hidden.size());
  int hidden_width = layout.hidden.empty() ? 256 : layout.hidden.front();

  const std::map<std::string, Setter> setters = {
      {"run.output", file(cfg.output_dir)},
      {"run.seed", [&](const std::string& k, const std::string& v) { cfg.seed = parse_number<std::uint64_t>(k, v); }},
      {"data.scans", file(cfg.scans_dir)},
      {"data.poses", file(cfg.pose_file)},
      {"data.max_range", dbl(cfg.max_range)},
      {"data.sparsity", dbl(cfg.sparsity)},
      {"scene.file", file(cfg.scene_file)},
      {"scene.frames", integer(cfg.trajectory.frames)},
      {"scene.start", [&](const std::string& k, const std::string& v) { cfg.trajectory.start = parse_vec3(k, v); }},
      {"scene.end", [&](const std::string& k, const std::string& v) { cfg.trajectory.end = parse_vec3(k, v); }},
      {"scene.yaw", dbl(cfg.trajectory.yaw_deg)},
      {"scene.azimuth_beams", integer(cfg.beams.azimuth_beams)},
      {"scene.elevation_beams", integer(cfg.beams.elevation_beams)},
      {"scene.elevation_min", dbl(cfg.beams.elevation_min_deg)},
      {"scene.elevation_max", dbl(cfg.beams.elevation_max_deg)},
      {"scene.max_range", dbl(cfg.beams.max_range)},
      {"scene.range_noise", dbl(cfg.range_noise)},
      {"partition.yaw_threshold", dbl(cfg.partition.yaw_threshold_deg)},
      {"partition.margin", dbl(cfg.partition.margin)},
      {"partition.merge_iou", dbl(cfg.partition.merge_iou)},
      {"partition.ground_cell", dbl(cfg.partition.ground_cell)},
      {"partition.ground_height", dbl(cfg.partition.ground_height)},
      {"partition.cluster_radius", dbl(cfg.partition.cluster_radius)},
      {"partition.cluster_min_points", size(cfg.partition.cluster_min_points)},
      {"partition.min_thickness", dbl(cfg.partition.min_thickness)},
      {"partition.ground_tile", dbl(cfg.partition.ground_tile)},
      {"sampling.coarse", integer(cfg.train.sampling.coarse)},
      {"sampling.fine", integer(cfg.train.sampling.fine)},
      {"sampling.lambda_in", dbl(cfg.train.sampling.lambda_in)},
      {"loss.parent_depth", dbl(cfg.train.weights.parent_depth)},
      {"loss.child_free", dbl(cfg.train.weights.child_free)},
      {"loss.child_depth", dbl(cfg.train.weights.child_depth)},
      {"loss.inflation", dbl(cfg.train.weights.inflation)},
      {"loss.transition", dbl(cfg.train.weights.transition)},
      {"train.epochs", integer(cfg.train.epochs)},
      {"train.batch_size", size(cfg.train.batch_size)},
      {"train.chunk_rays", size(cfg.train.chunk_rays)},
      {"train.learning_rate", dbl(cfg.train.base_lr)},
      {"model.encoding_levels", integer(layout.enc_levels)},
      {"model.hidden_layers", integer(hidden_layers)},
      {"model.hidden_width", integer(hidden_width)},
      {"model.skip_layer", integer(layout.skip_layer)},
      {"inference.min_weight", dbl(cfg.inference.min_weight)},
      {"inference.inflate_step", dbl(cfg.inference.inflate_step)},
      {"inference.max_retries", integer(cfg.inference.max_retries)},
      {"eval.voxel", dbl(cfg.voxel)},
      {"eval.tau", dbl(cfg.tau)},
      {"eval.on_train",
       [&](const std::string& k, const std::string& v) { cfg.eval_on_train = parse_bool(k, v); }},
  };

  for (const auto& [key, value] : parse_ini(text)) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key " + key);
    it->second(key, value);
  }
  if (hidden_layers < 1 || hidden_width < 1) throw ConfigError("model.hidden_layers and hidden_width must be >= 1");
  layout.hidden.assign(static_cast<std::size_t>(hidden_layers), hidden_width);
  cfg.train.seed = cfg.seed;
  cfg.inference.sampling = cfg.train.sampling;
  cfg.inference.inflation = cfg.train.weights.inflation;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

}  // namespace lidarfield
