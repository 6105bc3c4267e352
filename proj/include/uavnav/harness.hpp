#ifndef UAVNAV_HARNESS_HPP
#define UAVNAV_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavnav/checkpoint.hpp"
#include "uavnav/config.hpp"
#include "uavnav/env.hpp"
#include "uavnav/errors.hpp"
#include "uavnav/ppo.hpp"

namespace uavnav {

namespace fs = std::filesystem;

enum class StopReason { kEarlyStop, kMaxIterations };

inline std::string_view to_string(StopReason r) {
  return r == StopReason::kEarlyStop ? "early_stop" : "max_iterations";
}

struct TrainSummary {
  int iterations = 0;
  StopReason stop_reason = StopReason::kMaxIterations;
  double final_goal_rate = 0.0;
  fs::path metrics_path;
  fs::path final_checkpoint;
};

inline Checkpoint make_checkpoint(const Trainer& t, const RunConfig& config) {
  return {t.params(), t.adam(), t.seed(), static_cast<std::uint64_t>(t.iteration()), to_config_text(config)};
}

/// Trains until the goal-rate stop rule fires or max_iterations is reached.
///
/// Writes <out>/metrics.csv (flushed per iteration), <out>/checkpoint_NNNN.ckpt
/// every checkpoint_every iterations, <out>/final.ckpt and <out>/summary.json.
/// The config is validated before the output directory is touched.
inline TrainSummary run_train(const RunConfig& config, const fs::path& out_dir,
                              const std::function<void(const IterationMetrics&)>& on_iteration = {}) {
  validate(config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  TrainSummary summary;
  summary.metrics_path = out_dir / "metrics.csv";
  std::ofstream metrics(summary.metrics_path, std::ios::trunc);
  if (!metrics) throw IoError("cannot open " + summary.metrics_path.string());
  metrics << kMetricsHeader << "\n" << std::flush;

  Trainer trainer(config.world, config.env, config.ppo, config.architecture(), config.seed,
                  static_cast<std::size_t>(config.workers));
  while (trainer.iteration() < config.max_iterations) {
    IterationMetrics m;
    try {
      m = trainer.train_iteration();
    } catch (const NumericalError& e) {
      throw NumericalError("training iteration " + std::to_string(trainer.iteration() + 1) + ": " + e.what());
    }
    if (!config.record_wall_clock) m.wall_clock_s = 0.0;
    metrics << to_csv_row(m) << "\n" << std::flush;
    if (!metrics) throw IoError("write failed for " + summary.metrics_path.string());
    if (on_iteration) on_iteration(m);
    summary.final_goal_rate = m.goal_rate;
    if (trainer.iteration() % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "checkpoint_%04d.ckpt", trainer.iteration());
      save_checkpoint(out_dir / name, make_checkpoint(trainer, config));
    }
    if (trainer.should_stop()) {
      summary.stop_reason = StopReason::kEarlyStop;
      break;
    }
  }
  summary.iterations = trainer.iteration();
  summary.final_checkpoint = out_dir / "final.ckpt";
  save_checkpoint(summary.final_checkpoint, make_checkpoint(trainer, config));

  nlohmann::ordered_json j;
  j["iterations"] = summary.iterations;
  j["stop_reason"] = std::string(to_string(summary.stop_reason));
  j["final_goal_rate"] = summary.final_goal_rate;
  j["seed"] = config.seed;
  j["workers"] = config.workers;
  std::ofstream(out_dir / "summary.json") << j.dump(2) << "\n";
  return summary;
}

/// Chooses an action from the live environment and the flattened observation.
using Controller = std::function<ActionIndex(const NavEnv&, const FlatObservation&, Rng&)>;

inline Controller policy_controller(const PolicyParams& params, bool stochastic) {
  return [&params, stochastic](const NavEnv&, const FlatObservation& obs, Rng& rng) {
    return decide(params, obs, rng, !stochastic, false).action;
  };
}

inline Controller scripted_controller() {
  return [](const NavEnv& env, const FlatObservation&, Rng&) {
    return steer_toward_goal(env.state(), env.episode().goal, env.config().dt);
  };
}

struct TrajectoryStep {
  int step = 0;
  VehicleState pose;  // after the step
  ActionIndex action = 0;
  double reward = 0.0;
  Event event = Event::kNone;
};

struct EpisodeOutcome {
  int index = 0;
  EpisodeConfig config;
  Event event = Event::kNone;
  int steps = 0;
  double total_reward = 0.0;
  std::vector<TrajectoryStep> trajectory;  // filled only when requested
};

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 0;
  Mode mode = Mode::kTest;
  bool keep_trajectories = false;
};

struct EvalResult {
  double goal_rate = 0.0;
  std::vector<EpisodeOutcome> outcomes;
};

/// Runs `episodes` episodes with one environment seeded by `seed`; episode k of
/// two evaluations with the same seed is identical.
inline EvalResult run_episodes(const RunConfig& config, const Controller& controller, const EvalOptions& opt) {
  if (opt.episodes <= 0) throw ConfigError("eval: episodes must be positive");
  validate(config);
  NavEnv env(config.world, config.env, opt.seed);
  Rng action_rng = Rng::derive(opt.seed, 1);
  EvalResult result;
  int goals = 0;
  for (int k = 0; k < opt.episodes; ++k) {
    EpisodeOutcome o;
    o.index = k;
    FlatObservation obs = flatten(env.reset(opt.mode), config.world);
    o.config = env.episode();
    while (true) {
      const ActionIndex a = controller(env, obs, action_rng);
      const StepOutcome out = env.step(a);
      o.total_reward += out.reward;
      if (opt.keep_trajectories) o.trajectory.push_back({o.steps, env.state(), a, out.reward, out.event});
      ++o.steps;
      obs = flatten(out.observation, config.world);
      if (out.done) {
        o.event = out.event;
        break;
      }
    }
    goals += o.event == Event::kGoalReached;
    result.outcomes.push_back(std::move(o));
  }
  result.goal_rate = static_cast<double>(goals) / static_cast<double>(opt.episodes);
  return result;
}

inline void check_architecture(const Checkpoint& ckpt, const RunConfig& config) {
  if (!(ckpt.params.arch == config.architecture()))
    throw CheckpointError("checkpoint architecture does not match the configuration's camera/model settings");
}

/// Config embedded in the checkpoint, checked against its weights.
inline RunConfig checkpoint_config(const Checkpoint& ckpt) {
  RunConfig config = parse_config(ckpt.config_text, "<checkpoint config>");
  check_architecture(ckpt, config);
  return config;
}

inline EvalResult run_eval(const Checkpoint& ckpt, const RunConfig& config, const EvalOptions& opt,
                           bool stochastic = false) {
  check_architecture(ckpt, config);
  return run_episodes(config, policy_controller(ckpt.params, stochastic), opt);
}

/// One greedy episode with full trajectory; equals episode 0 of run_eval with the same seed.
inline EpisodeOutcome replay(const Checkpoint& ckpt, const RunConfig& config, std::uint64_t seed,
                             Mode mode = Mode::kTest) {
  EvalOptions opt{1, seed, mode, true};
  return std::move(run_eval(ckpt, config, opt).outcomes.front());
}

inline void write_eval_csv(const fs::path& path, const EvalResult& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out << "episode,start_x,start_y,start_yaw,goal_x,goal_y,outcome,steps,total_reward\n";
  for (const EpisodeOutcome& o : r.outcomes) {
    using detail::format_double;
    out << o.index << "," << format_double(o.config.start.x) << "," << format_double(o.config.start.y) << ","
        << format_double(o.config.start.yaw) << "," << format_double(o.config.goal.x) << ","
        << format_double(o.config.goal.y) << "," << to_string(o.event) << "," << o.steps << ","
        << format_double(o.total_reward) << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

/// Line-delimited JSON: one "episode" header record, then one "step" record per step.
inline void write_trajectory(std::ostream& out, const EpisodeOutcome& o, std::uint64_t seed, Mode mode) {
  nlohmann::ordered_json head;
  head["type"] = "episode";
  head["seed"] = seed;
  head["mode"] = std::string(to_string(mode));
  head["start"] = {{"x", o.config.start.x}, {"y", o.config.start.y}, {"yaw", o.config.start.yaw}};
  head["goal"] = {{"x", o.config.goal.x}, {"y", o.config.goal.y}};
  head["outcome"] = std::string(to_string(o.event));
  head["steps"] = o.steps;
  head["total_reward"] = o.total_reward;
  out << head.dump() << "\n";
  for (const TrajectoryStep& s : o.trajectory) {
    nlohmann::ordered_json j;
    j["type"] = "step";
    j["step"] = s.step;
    j["x"] = s.pose.x;
    j["y"] = s.pose.y;
    j["yaw"] = s.pose.yaw;
    j["action"] = s.action;
    j["reward"] = s.reward;
    j["event"] = std::string(to_string(s.event));
    out << j.dump() << "\n";
  }
}

}  // namespace uavnav

#endif  // UAVNAV_HARNESS_HPP
