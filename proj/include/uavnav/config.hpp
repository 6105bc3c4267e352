#ifndef UAVNAV_CONFIG_HPP
#define UAVNAV_CONFIG_HPP

// Hierarchical key-value configuration text.
//
//   # comment
//   arena.min = 0, -20          # flat dotted keys
//   obstacle[0].kind = cylinder
//   [camera]                    # section header: prefixes the keys below
//   max_range = 10
//
// Points are "x, y"; rectangles are "min_x, min_y, max_x, max_y". Every key
// must be known; typos are rejected with the offending line.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uavnav/env.hpp"
#include "uavnav/errors.hpp"
#include "uavnav/nn.hpp"
#include "uavnav/ppo.hpp"
#include "uavnav/world.hpp"

namespace uavnav {

struct RunConfig {
  WorldConfig world;
  EnvConfig env;
  PpoHyper ppo;
  std::vector<int> hidden = {256, 256};
  std::uint64_t seed = 0;
  int max_iterations = 200;
  int eval_episodes = 100;
  int checkpoint_every = 5;
  int workers = 1;
  bool record_wall_clock = true;

  Architecture architecture() const {
    return {static_cast<int>(flat_observation_size(world.camera)), hidden, kNumActions, "tanh"};
  }
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line = 0;
};

class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& source) {
    KeyValues kv;
    kv.source_ = source;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string s = trim(raw.substr(0, raw.find('#')));
      if (s.empty()) continue;
      if (s.front() == '[' && s.back() == ']' && s.find('=') == std::string::npos) {
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) kv.fail(line, "expected 'key = value', got '" + s + "'");
      std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty()) kv.fail(line, "missing key");
      if (value.empty()) kv.fail(line, "missing value for key '" + key + "'");
      if (!section.empty()) key = section + "." + key;
      auto [it, inserted] = kv.entries_.emplace(key, Entry{value, line});
      if (!inserted)
        kv.fail(line, "duplicate key '" + key + "' (first set on line " + std::to_string(it->second.line) + ")");
    }
    return kv;
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  const Entry* take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_)
      if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
  }

  void reject_unknown() const {
    const Entry* first = nullptr;
    std::string first_key;
    for (const auto& [k, e] : entries_) {
      if (used_.count(k)) continue;
      if (!first || e.line < first->line) {
        first = &e;
        first_key = k;
      }
    }
    if (first) fail(first->line, "unknown key '" + first_key + "'");
  }

  std::vector<double> numbers(const Entry& e, const std::string& key, std::size_t count) const {
    std::vector<double> out;
    std::stringstream ss(e.value);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(number(trim(tok), e, key));
    if (count != 0 && out.size() != count)
      fail(e.line, "key '" + key + "' expects " + std::to_string(count) + " comma-separated numbers, got " +
                       std::to_string(out.size()));
    return out;
  }

  double number(const std::string& tok, const Entry& e, const std::string& key) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::logic_error&) {
      fail(e.line, "key '" + key + "': '" + tok + "' is not a number");
    }
    if (used != tok.size()) fail(e.line, "key '" + key + "': '" + tok + "' is not a number");
    return v;
  }

  void get(const std::string& key, double& out) {
    if (const Entry* e = take(key)) out = numbers(*e, key, 1)[0];
  }
  void get(const std::string& key, int& out) {
    if (const Entry* e = take(key)) out = integer(*e, key);
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const Entry* e = take(key)) {
      std::size_t used = 0;
      try {
        if (e->value.find('-') != std::string::npos) throw std::invalid_argument("negative");
        out = std::stoull(e->value, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used == 0 || used != e->value.size()) fail(e->line, "key '" + key + "' expects a non-negative integer");
    }
  }
  void get(const std::string& key, bool& out) {
    if (const Entry* e = take(key)) {
      if (e->value == "true") out = true;
      else if (e->value == "false") out = false;
      else fail(e->line, "key '" + key + "' expects true or false");
    }
  }
  void get(const std::string& key, Vec2& out) {
    if (const Entry* e = take(key)) {
      const auto v = numbers(*e, key, 2);
      out = {v[0], v[1]};
    }
  }
  void get(const std::string& key, Rect& out) {
    if (const Entry* e = take(key)) {
      const auto v = numbers(*e, key, 4);
      out = {{v[0], v[1]}, {v[2], v[3]}};
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (const Entry* e = take(key)) {
      out.clear();
      for (double d : numbers(*e, key, 0)) {
        if (d != static_cast<int>(d) || d <= 0) fail(e->line, "key '" + key + "' expects positive integers");
        out.push_back(static_cast<int>(d));
      }
    }
  }

  int integer(const Entry& e, const std::string& key) const {
    const double d = numbers(e, key, 1)[0];
    if (d != static_cast<double>(static_cast<long long>(d)) || std::abs(d) > 2e9)
      fail(e.line, "key '" + key + "' expects an integer");
    return static_cast<int>(d);
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

 private:
  std::string source_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

inline void read_obstacles(KeyValues& kv, std::vector<Obstacle>& obstacles) {
  static const std::regex pattern(R"(obstacle\[(\d+)\]\.(\w+))");
  std::map<int, int> first_line;
  for (const std::string& key : kv.keys_with_prefix("obstacle")) {
    std::smatch m;
    if (!std::regex_match(key, m, pattern)) continue;  // reported as unknown later
    const int idx = std::stoi(m[1]);
    const int line = kv.line_of(key);
    if (!first_line.count(idx) || line < first_line[idx]) first_line[idx] = line;
  }
  if (first_line.empty()) return;
  obstacles.clear();
  int expected = 0;
  for (const auto& [idx, line] : first_line) {
    if (idx != expected)
      kv.fail(line, "obstacle indices must be contiguous from 0; found obstacle[" + std::to_string(idx) + "]");
    ++expected;
    const std::string base = "obstacle[" + std::to_string(idx) + "].";
    Obstacle o;
    const Entry* kind = kv.take(base + "kind");
    if (!kind) kv.fail(line, "missing " + base + "kind");
    if (kind->value == "cylinder") {
      o.kind = ObstacleKind::kCylinder;
      if (!kv.take(base + "radius")) kv.fail(line, "missing " + base + "radius");
      kv.get(base + "radius", o.radius);
    } else if (kind->value == "box") {
      o.kind = ObstacleKind::kBox;
      if (!kv.take(base + "half_extents")) kv.fail(line, "missing " + base + "half_extents");
      kv.get(base + "half_extents", o.half_extents);
      kv.get(base + "yaw", o.yaw);
    } else {
      kv.fail(kind->line, "obstacle kind must be 'cylinder' or 'box', got '" + kind->value + "'");
    }
    if (!kv.take(base + "center")) kv.fail(line, "missing " + base + "center");
    kv.get(base + "center", o.center);
    obstacles.push_back(o);
  }
}

}  // namespace detail

/// Checks every cross-module invariant before anything runs.
inline void validate(const RunConfig& c) {
  validate(c.world);
  validate_region(c.world.start_region, c.world, "start_region");
  validate_region(c.world.goal_region, c.world, "goal_region");
  validate_region(c.env.test_regions.start, c.world, "test_region.start");
  validate_region(c.env.test_regions.goal, c.world, "test_region.goal");
  if (!(c.env.dt > 0.0)) throw ConfigError("episode.dt must be > 0");
  if (c.env.max_steps <= 0) throw ConfigError("episode.max_steps must be positive");
  validate(c.ppo);
  if (c.hidden.empty()) throw ConfigError("model.hidden needs at least one layer");
  if (c.max_iterations < 0) throw ConfigError("run.max_iterations must be >= 0");
  if (c.eval_episodes <= 0) throw ConfigError("run.eval_episodes must be positive");
  if (c.checkpoint_every <= 0) throw ConfigError("run.checkpoint_every must be positive");
  if (c.workers <= 0) throw ConfigError("run.workers must be positive");
}

/// Parses config text over the built-in defaults; `source` prefixes error messages.
inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  detail::KeyValues kv = detail::KeyValues::parse(text, source);
  RunConfig c;
  WorldConfig& w = c.world;
  kv.get("arena.min", w.arena.min);
  kv.get("arena.max", w.arena.max);
  detail::read_obstacles(kv, w.obstacles);
  kv.get("start_region", w.start_region);
  kv.get("goal_region", w.goal_region);
  kv.get("goal_radius", w.goal_radius);
  kv.get("vehicle_radius", w.vehicle_radius);
  kv.get("altitude", w.altitude);
  kv.get("camera.h_fov_deg", w.camera.h_fov_deg);
  kv.get("camera.v_fov_deg", w.camera.v_fov_deg);
  kv.get("camera.rows", w.camera.rows);
  kv.get("camera.cols", w.camera.cols);
  kv.get("camera.max_range", w.camera.max_range);

  kv.get("episode.max_steps", c.env.max_steps);
  kv.get("episode.dt", c.env.dt);
  kv.get("test_region.start", c.env.test_regions.start);
  kv.get("test_region.goal", c.env.test_regions.goal);
  kv.get("reward.progress_scale", c.env.reward.progress_scale);
  kv.get("reward.goal_bonus", c.env.reward.goal_bonus);
  kv.get("reward.collision_penalty", c.env.reward.collision_penalty);
  kv.get("reward.step_penalty", c.env.reward.step_penalty);

  kv.get("ppo.gamma", c.ppo.gamma);
  kv.get("ppo.lambda", c.ppo.lambda);
  kv.get("ppo.clip", c.ppo.clip);
  kv.get("ppo.lr", c.ppo.lr);
  kv.get("ppo.batch_min_steps", c.ppo.batch_min_steps);
  kv.get("ppo.minibatch", c.ppo.minibatch);
  kv.get("ppo.epochs", c.ppo.epochs);
  kv.get("ppo.vf_coeff", c.ppo.vf_coeff);
  kv.get("ppo.entropy_coeff", c.ppo.entropy_coeff);
  kv.get("model.hidden", c.hidden);

  kv.get("run.seed", c.seed);
  kv.get("run.max_iterations", c.max_iterations);
  kv.get("run.eval_episodes", c.eval_episodes);
  kv.get("run.checkpoint_every", c.checkpoint_every);
  kv.get("run.workers", c.workers);
  kv.get("run.record_wall_clock", c.record_wall_clock);
  kv.reject_unknown();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

/// Serializes every field so that parse_config(to_config_text(c)) == c.
inline std::string to_config_text(const RunConfig& c) {
  auto num = [](double v) { return detail::format_double(v); };
  auto vec = [&](Vec2 p) { return num(p.x) + ", " + num(p.y); };
  auto rect = [&](const Rect& r) { return vec(r.min) + ", " + vec(r.max); };
  std::ostringstream o;
  const WorldConfig& w = c.world;
  o << "arena.min = " << vec(w.arena.min) << "\n";
  o << "arena.max = " << vec(w.arena.max) << "\n";
  for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
    const Obstacle& ob = w.obstacles[i];
    const std::string base = "obstacle[" + std::to_string(i) + "].";
    if (ob.kind == ObstacleKind::kCylinder) {
      o << base << "kind = cylinder\n" << base << "radius = " << num(ob.radius) << "\n";
    } else {
      o << base << "kind = box\n" << base << "half_extents = " << vec(ob.half_extents) << "\n";
      o << base << "yaw = " << num(ob.yaw) << "\n";
    }
    o << base << "center = " << vec(ob.center) << "\n";
  }
  o << "start_region = " << rect(w.start_region) << "\n";
  o << "goal_region = " << rect(w.goal_region) << "\n";
  o << "goal_radius = " << num(w.goal_radius) << "\n";
  o << "vehicle_radius = " << num(w.vehicle_radius) << "\n";
  o << "altitude = " << num(w.altitude) << "\n";
  o << "camera.h_fov_deg = " << num(w.camera.h_fov_deg) << "\n";
  o << "camera.v_fov_deg = " << num(w.camera.v_fov_deg) << "\n";
  o << "camera.rows = " << w.camera.rows << "\n";
  o << "camera.cols = " << w.camera.cols << "\n";
  o << "camera.max_range = " << num(w.camera.max_range) << "\n";
  o << "episode.max_steps = " << c.env.max_steps << "\n";
  o << "episode.dt = " << num(c.env.dt) << "\n";
  o << "test_region.start = " << rect(c.env.test_regions.start) << "\n";
  o << "test_region.goal = " << rect(c.env.test_regions.goal) << "\n";
  o << "reward.progress_scale = " << num(c.env.reward.progress_scale) << "\n";
  o << "reward.goal_bonus = " << num(c.env.reward.goal_bonus) << "\n";
  o << "reward.collision_penalty = " << num(c.env.reward.collision_penalty) << "\n";
  o << "reward.step_penalty = " << num(c.env.reward.step_penalty) << "\n";
  o << "ppo.gamma = " << num(c.ppo.gamma) << "\n";
  o << "ppo.lambda = " << num(c.ppo.lambda) << "\n";
  o << "ppo.clip = " << num(c.ppo.clip) << "\n";
  o << "ppo.lr = " << num(c.ppo.lr) << "\n";
  o << "ppo.batch_min_steps = " << c.ppo.batch_min_steps << "\n";
  o << "ppo.minibatch = " << c.ppo.minibatch << "\n";
  o << "ppo.epochs = " << c.ppo.epochs << "\n";
  o << "ppo.vf_coeff = " << num(c.ppo.vf_coeff) << "\n";
  o << "ppo.entropy_coeff = " << num(c.ppo.entropy_coeff) << "\n";
  o << "model.hidden = ";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) o << (i ? ", " : "") << c.hidden[i];
  o << "\n";
  o << "run.seed = " << c.seed << "\n";
  o << "run.max_iterations = " << c.max_iterations << "\n";
  o << "run.eval_episodes = " << c.eval_episodes << "\n";
  o << "run.checkpoint_every = " << c.checkpoint_every << "\n";
  o << "run.workers = " << c.workers << "\n";
  o << "run.record_wall_clock = " << (c.record_wall_clock ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace uavnav

#endif  // UAVNAV_CONFIG_HPP
