#ifndef UAVNAV_ENV_HPP
#define UAVNAV_ENV_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uavnav/errors.hpp"
#include "uavnav/geometry.hpp"
#include "uavnav/rng.hpp"
#include "uavnav/vehicle.hpp"
#include "uavnav/world.hpp"

namespace uavnav {

using GoalPoint = Vec2;

enum class Mode { kTrain, kTest };

enum class Event { kNone, kGoalReached, kCollision, kTimeout };

inline std::string_view to_string(Event e) {
  switch (e) {
    case Event::kNone: return "none";
    case Event::kGoalReached: return "goal_reached";
    case Event::kCollision: return "collision";
    case Event::kTimeout: return "timeout";
  }
  return "none";
}

inline std::string_view to_string(Mode m) { return m == Mode::kTrain ? "train" : "test"; }

/// Reward weights. Defaults are the published ones; exposed for ablation.
struct RewardConfig {
  double progress_scale = 20.0;
  double goal_bonus = 2000.0;
  double collision_penalty = 1000.0;
  double step_penalty = 1.0;
  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

struct SamplingRegions {
  Rect start;
  Rect goal;
  friend bool operator==(const SamplingRegions&, const SamplingRegions&) = default;
};

struct EnvConfig {
  double dt = 0.2;
  int max_steps = 400;
  // Training rectangles come from WorldConfig::start_region / goal_region.
  SamplingRegions test_regions{{{4.0, -10.0}, {8.0, 10.0}}, {{32.0, -10.0}, {36.0, 10.0}}};
  RewardConfig reward;
  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

inline SamplingRegions regions_for(Mode mode, const WorldConfig& w, const EnvConfig& e) {
  return mode == Mode::kTrain ? SamplingRegions{w.start_region, w.goal_region} : e.test_regions;
}

/// Per-step reward: progress shaping + goal bonus - collision penalty - step penalty.
///
/// Progress is d_prev - d_curr, so moving closer pays a positive reward.
inline double reward(double d_prev, double d_curr, bool goal_reached, bool collided,
                     const RewardConfig& cfg = {}) {
  return cfg.progress_scale * (d_prev - d_curr) + cfg.goal_bonus * (goal_reached ? 1.0 : 0.0) -
         cfg.collision_penalty * (collided ? 1.0 : 0.0) - cfg.step_penalty;
}

/// Bearing to the goal relative to heading, wrapped to (-pi, pi]; positive means
/// the goal is to the left. Coincident positions give 0.
inline double heading_error(const VehicleState& s, GoalPoint g) {
  const double dx = g.x - s.x, dy = g.y - s.y;
  if (dx == 0.0 && dy == 0.0) return 0.0;
  return wrap_angle(std::atan2(dy, dx) - s.yaw);
}

struct Observation {
  std::vector<double> depth;  // row-major, normalized to [0, 1]
  double heading_error = 0.0;
  double distance = 0.0;
};

inline Observation observe(const VehicleState& s, GoalPoint g, const WorldConfig& w) {
  DepthImage img = render_depth(s, w, w.camera);
  for (double& v : img.values) v /= w.camera.max_range;
  return {std::move(img.values), heading_error(s, g), distance(s.position(), g)};
}

/// Network input: depth cells, heading_error / pi, distance / arena diagonal.
using FlatObservation = std::vector<double>;

inline std::size_t flat_observation_size(const CameraConfig& cam) {
  return static_cast<std::size_t>(cam.rows * cam.cols) + 2;
}

inline FlatObservation flatten(const Observation& obs, const WorldConfig& w) {
  FlatObservation flat(obs.depth);
  flat.push_back(obs.heading_error / std::numbers::pi);
  flat.push_back(obs.distance / w.diagonal());
  return flat;
}

struct EpisodeConfig {
  VehicleState start;
  GoalPoint goal;
  int max_steps = 0;
  std::uint64_t seed = 0;  // seed of the draw that produced start and goal
  friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

/// Uniform start in regions.start, uniform goal in regions.goal, uniform yaw in (-pi, pi].
/// Draws where the start collides, the goal sits inside an inflated obstacle or
/// the two are within goal_radius are rejected. When goal_radius covers the
/// whole arena (>= its diagonal) every pose is already at the goal, so the
/// separation test is skipped rather than failing.
inline std::pair<VehicleState, GoalPoint> sample_start_goal(const SamplingRegions& regions,
                                                            const WorldConfig& w, Rng& rng) {
  constexpr int kMaxTries = 1000;
  const bool goal_everywhere = w.goal_radius >= w.diagonal();
  for (int i = 0; i < kMaxTries; ++i) {
    VehicleState s;
    s.x = rng.uniform(regions.start.min.x, regions.start.max.x);
    s.y = rng.uniform(regions.start.min.y, regions.start.max.y);
    GoalPoint g{rng.uniform(regions.goal.min.x, regions.goal.max.x),
                rng.uniform(regions.goal.min.y, regions.goal.max.y)};
    s.yaw = std::numbers::pi - 2.0 * std::numbers::pi * rng.uniform();
    if (!goal_everywhere && distance(s.position(), g) <= w.goal_radius) continue;
    if (collision(s.position(), w) || collision(g, w)) continue;
    return {s, g};
  }
  throw ConfigError("start/goal sampling failed after 1000 tries; check the sampling rectangles");
}

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  Event event = Event::kNone;
};

/// One episodic navigation task. Single owner; holds its own seeded RNG.
class NavEnv {
 public:
  NavEnv(WorldConfig world, EnvConfig config, std::uint64_t seed)
      : world_(std::move(world)), config_(std::move(config)), rng_(seed) {}

  Observation reset(Mode mode) {
    const std::uint64_t episode_seed = rng_.next_u64();
    Rng episode_rng(episode_seed);
    auto [start, goal] = sample_start_goal(regions_for(mode, world_, config_), world_, episode_rng);
    return reset(EpisodeConfig{start, goal, config_.max_steps, episode_seed});
  }

  /// Starts an explicitly specified episode.
  Observation reset(const EpisodeConfig& episode) {
    episode_ = episode;
    state_ = episode.start;
    step_count_ = 0;
    done_ = false;
    started_ = true;
    return observe(state_, episode_.goal, world_);
  }

  /// Advances one control interval. Goal is tested before collision, then timeout.
  StepOutcome step(ActionIndex a) {
    if (!started_) throw ContractViolation("step called before reset");
    if (done_) throw ContractViolation("step called on a finished episode");
    const Command cmd = decode_action(a);
    const double d_prev = distance(state_.position(), episode_.goal);
    state_ = integrate(state_, cmd, config_.dt);
    ++step_count_;
    const double d_curr = distance(state_.position(), episode_.goal);

    Event event = Event::kNone;
    if (d_curr < world_.goal_radius) {
      event = Event::kGoalReached;
    } else if (collision(state_.position(), world_)) {
      event = Event::kCollision;
    } else if (step_count_ >= episode_.max_steps) {
      event = Event::kTimeout;
    }
    done_ = event != Event::kNone;
    StepOutcome out;
    out.observation = observe(state_, episode_.goal, world_);
    out.reward = reward(d_prev, d_curr, event == Event::kGoalReached, event == Event::kCollision,
                        config_.reward);
    out.done = done_;
    out.event = event;
    return out;
  }

  const VehicleState& state() const { return state_; }
  const EpisodeConfig& episode() const { return episode_; }
  int step_count() const { return step_count_; }
  bool done() const { return done_; }
  const WorldConfig& world() const { return world_; }
  const EnvConfig& config() const { return config_; }

 private:
  WorldConfig world_;
  EnvConfig config_;
  Rng rng_;
  EpisodeConfig episode_;
  VehicleState state_;
  int step_count_ = 0;
  bool done_ = false;
  bool started_ = false;
};

/// Hand-written baseline: rotate in place toward the goal, then fly at full
/// speed with the yaw rate that best cancels the heading error.
inline ActionIndex steer_toward_goal(const VehicleState& s, GoalPoint g, double dt) {
  const double err = heading_error(s, g);
  std::size_t best = 0;
  for (std::size_t i = 1; i < kYawRates.size(); ++i) {
    if (std::abs(err - kYawRates[i] * dt) < std::abs(err - kYawRates[best] * dt)) best = i;
  }
  const double dist = distance(s.position(), g);
  std::size_t speed = 2;
  if (std::abs(err) > std::numbers::pi / 4) {
    speed = 0;
  } else if (dist < 1.0) {
    speed = 1;
  }
  return static_cast<ActionIndex>(speed * kYawRates.size() + best);
}

}  // namespace uavnav

#endif  // UAVNAV_ENV_HPP
