// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: make-scene, partition, train, raycast-build,
// synthesize, eval.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "lidarfield/pipeline.hpp"

namespace {

using namespace lidarfield;

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

int fail(const char* kind, const std::string& what, int code) {
  std::string line = what;
  for (char& c : line)
    if (c == '\n') c = ' ';
  std::cerr << "error: " << kind << ": " << line << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR neural-field toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::optional<double> sparsity;
  std::string method = "pcnerf-two-step";
  bool resume = false;

  const auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override run.seed");
    cmd->add_option("--output", output, "override run.output");
    cmd->add_option("--sparsity", sparsity, "override data.sparsity");
  };

  auto* make_scene = app.add_subcommand("make-scene", "simulate scans of a synthetic scene");
  auto* partition = app.add_subcommand("partition", "build parent blocks and child regions");
  auto* train = app.add_subcommand("train", "train one field per parent block");
  auto* raycast = app.add_subcommand("raycast-build", "voxelize training frames for the ray-casting baseline");
  auto* synthesize = app.add_subcommand("synthesize", "write synthesized test views as PLY");
  auto* eval = app.add_subcommand("eval", "synthesize test views and write metrics");
  for (auto* cmd : {make_scene, partition, train, raycast, synthesize, eval}) common(cmd);
  train->add_flag("--resume", resume, "continue from existing checkpoints");
  for (auto* cmd : {synthesize, eval}) {
    cmd->add_option("--method", method, "pcnerf-two-step | pcnerf-one-step | raycast");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), kExitInput);
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
    }
    if (!output.empty()) cfg.output_dir = output;
    if (sparsity) cfg.sparsity = *sparsity;
    cfg.validate();

    if (make_scene->parsed()) cmd_make_scene(cfg, std::cout);
    if (partition->parsed()) cmd_partition(cfg, std::cout);
    if (train->parsed()) cmd_train(cfg, resume, std::cout);
    if (raycast->parsed()) cmd_raycast_build(cfg, std::cout);
    if (synthesize->parsed()) cmd_synthesize(cfg, parse_method(method), false, std::cout);
    if (eval->parsed()) cmd_eval(cfg, parse_method(method), std::cout);
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), kExitNumerical);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), kExitInput);
  } catch (const FormatError& e) {
    return fail("format", e.what(), kExitInput);
  } catch (const ValidationError& e) {
    return fail("validation", e.what(), kExitInput);
  } catch (const MetricError& e) {
    return fail("metric", e.what(), kExitInput);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", e.what(), kExitInput);
  }
  return 0;
}
