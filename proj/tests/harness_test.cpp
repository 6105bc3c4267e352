#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "uavnav/harness.hpp"

namespace uavnav {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("uavnav_h_" + name);
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// 10 x 10 obstacle-free arena with a small model, cheap enough for unit tests.
RunConfig tiny_config() {
  return parse_config(
      "arena.min = 0, 0\narena.max = 10, 10\nstart_region = 1, 1, 3, 9\ngoal_region = 7, 1, 9, 9\n"
      "test_region.start = 1, 1, 3, 9\ntest_region.goal = 7, 1, 9, 9\n"
      "ppo.batch_min_steps = 300\nppo.epochs = 2\nppo.minibatch = 64\nmodel.hidden = 16\n"
      "run.max_iterations = 3\nrun.checkpoint_every = 2\nrun.record_wall_clock = false\n");
}

TEST(RunTrain, ZeroIterationsWritesHeaderOnly) {
  RunConfig c = tiny_config();
  c.max_iterations = 0;
  const fs::path out = temp_dir("zero");
  const TrainSummary s = run_train(c, out);
  EXPECT_EQ(s.iterations, 0);
  EXPECT_EQ(read_file(out / "metrics.csv"), std::string(kMetricsHeader) + "\n");
  EXPECT_TRUE(fs::exists(out / "final.ckpt"));
  fs::remove_all(out);
}

TEST(RunTrain, InvalidConfigTouchesNothing) {
  RunConfig c = tiny_config();
  c.ppo.clip = -1;
  const fs::path out = temp_dir("invalid");
  EXPECT_THROW(run_train(c, out), ConfigError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(RunTrain, WritesMetricsCheckpointsAndSummary) {
  const fs::path out = temp_dir("full");
  const TrainSummary s = run_train(tiny_config(), out);
  EXPECT_EQ(s.iterations, 3);
  EXPECT_EQ(s.stop_reason, StopReason::kMaxIterations);
  EXPECT_TRUE(fs::exists(out / "checkpoint_0002.ckpt"));
  EXPECT_FALSE(fs::exists(out / "checkpoint_0003.ckpt"));
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  std::ifstream in(out / "metrics.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kMetricsHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    const IterationMetrics m = parse_csv_row(line);
    EXPECT_EQ(m.iteration, ++rows);
    EXPECT_EQ(to_csv_row(m), line);
    EXPECT_EQ(m.wall_clock_s, 0.0);
  }
  EXPECT_EQ(rows, 3);
  const Checkpoint ck = load_checkpoint(out / "final.ckpt");
  EXPECT_EQ(ck.iteration, 3u);
  EXPECT_EQ(checkpoint_config(ck), tiny_config());
  fs::remove_all(out);
}

TEST(RunTrain, SameSeedIsByteIdentical) {
  const fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
  run_train(tiny_config(), a);
  run_train(tiny_config(), b);
  EXPECT_EQ(read_file(a / "metrics.csv"), read_file(b / "metrics.csv"));
  EXPECT_EQ(read_file(a / "final.ckpt"), read_file(b / "final.ckpt"));
  RunConfig other = tiny_config();
  other.seed = 1;
  const fs::path c = temp_dir("det_c");
  run_train(other, c);
  EXPECT_NE(read_file(a / "metrics.csv"), read_file(c / "metrics.csv"));
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}

TEST(RunTrain, GoalEverywhereStopsAtFifthIteration) {
  RunConfig c = tiny_config();
  c.world.goal_radius = c.world.diagonal();
  c.max_iterations = 50;
  const fs::path out = temp_dir("goal");
  const TrainSummary s = run_train(c, out);
  EXPECT_EQ(s.iterations, 5);
  EXPECT_EQ(s.stop_reason, StopReason::kEarlyStop);
  EXPECT_EQ(s.final_goal_rate, 1.0);
  fs::remove_all(out);
}

TEST(RunEval, ScriptedControllerInOpenWorld) {
  RunConfig c = tiny_config();
  c.world.arena = {{0, 0}, {40, 40}};
  c.env.test_regions = {{{5, 5}, {15, 35}}, {{25, 5}, {35, 35}}};
  const EvalResult r = run_episodes(c, scripted_controller(), {100, 3, Mode::kTest, false});
  EXPECT_EQ(r.goal_rate, 1.0);
  EXPECT_EQ(r.outcomes.size(), 100u);
}

TEST(RunEval, ZeroEpisodesIsAnError) {
  EXPECT_THROW(run_episodes(tiny_config(), scripted_controller(), {0, 1, Mode::kTest, false}), ConfigError);
}

TEST(Replay, MatchesFirstEvalEpisode) {
  const RunConfig c = tiny_config();
  const Checkpoint ck{init_params(c.architecture(), 5), AdamState::zeros(c.architecture()), 5, 0, to_config_text(c)};
  const EvalResult ev = run_eval(ck, c, {3, 21, Mode::kTest, false});
  const EpisodeOutcome rep = replay(ck, c, 21);
  EXPECT_EQ(rep.config, ev.outcomes[0].config);
  EXPECT_EQ(rep.steps, ev.outcomes[0].steps);
  ASSERT_EQ(rep.trajectory.size(), static_cast<std::size_t>(rep.steps));
  double sum = 0.0;
  for (std::size_t i = 0; i < rep.trajectory.size(); ++i) {
    EXPECT_EQ(rep.trajectory[i].step, static_cast<int>(i));
    sum += rep.trajectory[i].reward;
    if (i + 1 < rep.trajectory.size()) {
      EXPECT_EQ(rep.trajectory[i].event, Event::kNone);
    }
  }
  EXPECT_EQ(sum, ev.outcomes[0].total_reward);
  EXPECT_EQ(rep.trajectory.back().event, rep.event);
  EXPECT_NE(rep.event, Event::kNone);

  std::stringstream ss;
  write_trajectory(ss, rep, 21, Mode::kTest);
  std::string line;
  std::getline(ss, line);
  const auto head = nlohmann::json::parse(line);
  EXPECT_EQ(head["type"], "episode");
  EXPECT_EQ(head["outcome"], std::string(to_string(rep.event)));
  int steps = 0;
  while (std::getline(ss, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["step"], steps++);
  }
  EXPECT_EQ(steps, rep.steps);
}

TEST(RunEval, ReproducibleAndArchitectureChecked) {
  const RunConfig c = tiny_config();
  const Checkpoint ck{init_params(c.architecture(), 6), AdamState::zeros(c.architecture()), 6, 0, to_config_text(c)};
  const EvalResult a = run_eval(ck, c, {20, 4, Mode::kTest, false}, true);
  const EvalResult b = run_eval(ck, c, {20, 4, Mode::kTest, false}, true);
  EXPECT_EQ(a.goal_rate, b.goal_rate);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(a.outcomes[i].total_reward, b.outcomes[i].total_reward);
  RunConfig other = c;
  other.hidden = {8};
  EXPECT_THROW(run_eval(ck, other, {1, 1, Mode::kTest, false}), CheckpointError);
}

}  // namespace
}  // namespace uavnav
