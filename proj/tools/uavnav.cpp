// Command-line workbench: train, eval, replay and validate.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "uavnav/harness.hpp"

namespace fs = std::filesystem;
using namespace uavnav;

namespace {

Mode parse_mode(const std::string& s) {
  if (s == "test") return Mode::kTest;
  if (s == "train") return Mode::kTrain;
  throw ConfigError("--mode must be 'test' or 'train'");
}

RunConfig config_for(const Checkpoint& ckpt, const std::string& override_path) {
  if (override_path.empty()) return checkpoint_config(ckpt);
  RunConfig c = load_config(override_path);
  check_architecture(ckpt, c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadrotor navigation PPO workbench"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers, max_iterations;
  bool no_wall_clock = false;
  auto* train = app.add_subcommand("train", "Train a policy and write metrics.csv and checkpoints");
  train->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Master seed (overrides run.seed)");
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--workers", workers, "Rollout workers (overrides run.workers)")->check(CLI::PositiveNumber);
  train->add_option("--max-iterations", max_iterations, "Iteration cap (overrides run.max_iterations)");
  train->add_flag("--no-wall-clock", no_wall_clock, "Write 0 in wall_clock_s so metrics.csv is byte-reproducible");

  std::string ckpt_path, eval_out, mode_name = "test", eval_config;
  int episodes = 100;
  std::uint64_t eval_seed = 0;
  bool stochastic = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test (or train) rectangles");
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--episodes", episodes, "Episode count")->capture_default_str();
  eval->add_option("--seed", eval_seed, "Seed")->capture_default_str();
  eval->add_option("--mode", mode_name, "test or train")->capture_default_str();
  eval->add_flag("--stochastic", stochastic, "Sample actions instead of taking the argmax");
  eval->add_option("--out", eval_out, "Per-episode outcome CSV");
  eval->add_option("--config", eval_config, "Use this config instead of the one embedded in the checkpoint");

  std::string replay_out;
  auto* rep = app.add_subcommand("replay", "Write one greedy episode as line-delimited JSON");
  rep->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  rep->add_option("--seed", eval_seed, "Seed")->capture_default_str();
  rep->add_option("--out", replay_out, "Output file")->required();
  rep->add_option("--mode", mode_name, "test or train")->capture_default_str();
  rep->add_option("--config", eval_config, "Use this config instead of the one embedded in the checkpoint");

  auto* val = app.add_subcommand("validate", "Check a config file and exit");
  val->add_option("--config", config_path, "Config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      RunConfig config = load_config(config_path);
      if (seed) config.seed = *seed;
      if (workers) config.workers = *workers;
      if (max_iterations) config.max_iterations = *max_iterations;
      if (no_wall_clock) config.record_wall_clock = false;
      const TrainSummary s = run_train(config, out_dir, [](const IterationMetrics& m) {
        std::printf("iter %4d  steps %6zu  episodes %4zu  mean_reward %9.2f  goal %.3f  collision %.3f  %.1fs\n",
                    m.iteration, m.total_steps, m.episodes, m.mean_reward, m.goal_rate, m.collision_rate,
                    m.wall_clock_s);
        std::fflush(stdout);
      });
      std::printf("stopped after %d iterations (%s); final checkpoint %s\n", s.iterations,
                  std::string(to_string(s.stop_reason)).c_str(), s.final_checkpoint.string().c_str());
    } else if (eval->parsed()) {
      if (episodes <= 0) throw ConfigError("--episodes must be positive");
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      const RunConfig config = config_for(ckpt, eval_config);
      const EvalResult r = run_eval(ckpt, config, {episodes, eval_seed, parse_mode(mode_name), false}, stochastic);
      int goals = 0;
      for (const EpisodeOutcome& o : r.outcomes) goals += o.event == Event::kGoalReached;
      std::printf("goal_rate %.4f (%d/%d) mode=%s policy=%s\n", r.goal_rate, goals, episodes, mode_name.c_str(),
                  stochastic ? "stochastic" : "greedy");
      if (!eval_out.empty()) write_eval_csv(eval_out, r);
    } else if (rep->parsed()) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      const RunConfig config = config_for(ckpt, eval_config);
      const Mode mode = parse_mode(mode_name);
      const EpisodeOutcome o = replay(ckpt, config, eval_seed, mode);
      std::ofstream out(replay_out, std::ios::trunc);
      if (!out) throw IoError("cannot open " + replay_out);
      write_trajectory(out, o, eval_seed, mode);
      std::printf("%s after %d steps, return %.3f\n", std::string(to_string(o.event)).c_str(), o.steps,
                  o.total_reward);
    } else if (val->parsed()) {
      validate(load_config(config_path));
      std::printf("%s: ok\n", config_path.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
