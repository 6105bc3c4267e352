#ifndef UAVNAV_PPO_HPP
#define UAVNAV_PPO_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <iterator>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "uavnav/env.hpp"
#include "uavnav/errors.hpp"
#include "uavnav/nn.hpp"
#include "uavnav/rng.hpp"

namespace uavnav {

struct PpoHyper {
  double gamma = 0.99;
  double lambda = 1.0;
  double clip = 0.3;
  double lr = 5e-5;
  int batch_min_steps = 10000;
  int minibatch = 128;
  int epochs = 30;
  double vf_coeff = 1.0;
  double entropy_coeff = 0.0;
  friend bool operator==(const PpoHyper&, const PpoHyper&) = default;
};

inline void validate(const PpoHyper& h) {
  auto fail = [](const std::string& msg) { throw ConfigError("ppo: " + msg); };
  if (!(h.gamma >= 0.0 && h.gamma <= 1.0)) fail("gamma must be in [0, 1]");
  if (!(h.lambda >= 0.0 && h.lambda <= 1.0)) fail("lambda must be in [0, 1]");
  if (!(h.clip > 0.0)) fail("clip must be > 0");
  if (!(h.lr > 0.0)) fail("lr must be > 0");
  if (h.batch_min_steps <= 0) fail("batch_min_steps must be positive");
  if (h.minibatch <= 0) fail("minibatch must be positive");
  if (h.epochs <= 0) fail("epochs must be positive");
  if (!(h.vf_coeff >= 0.0)) fail("vf_coeff must be >= 0");
  if (!(h.entropy_coeff >= 0.0)) fail("entropy_coeff must be >= 0");
}

enum class DoneKind { kNone, kTerminal, kTruncated };

struct Transition {
  FlatObservation obs;
  ActionIndex action = 0;
  double reward = 0.0;
  double log_prob_old = 0.0;
  double value_old = 0.0;
  DoneKind done_kind = DoneKind::kNone;
};

struct EpisodeRecord {
  std::size_t begin = 0;  // index of the first transition in the batch
  std::size_t length = 0;
  Event event = Event::kNone;
  double total_reward = 0.0;
  FlatObservation final_obs;  // observation after the last step, for timeout bootstrapping
  EpisodeConfig config;
};

/// Complete episodes only; advantages and returns are filled by compute_gae.
struct RolloutBatch {
  std::vector<Transition> transitions;
  std::vector<EpisodeRecord> episodes;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t steps() const { return transitions.size(); }
};

inline Eigen::VectorXd to_vector(const FlatObservation& obs) {
  return Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
}

struct PolicyDecision {
  ActionIndex action = 0;
  double log_prob = 0.0;
  double value = 0.0;
};

/// Samples (or argmaxes, when greedy) the categorical policy at one observation.
inline PolicyDecision decide(const PolicyParams& params, const FlatObservation& obs, Rng& rng, bool greedy,
                             bool with_value = true) {
  const Eigen::VectorXd x = to_vector(obs);
  const Eigen::VectorXd logits = forward_policy(params, x);
  const Eigen::VectorXd logp = log_softmax(logits);
  const Eigen::VectorXd prob = logp.array().exp().matrix();
  PolicyDecision d;
  d.action = greedy ? argmax(logits) : sample_categorical(prob, rng);
  d.log_prob = logp(d.action);
  d.value = with_value ? forward_value(params, x) : 0.0;
  return d;
}

/// Runs one full episode with the policy and appends it to `batch`.
inline void collect_episode(const PolicyParams& params, NavEnv& env, Mode mode, Rng& rng, bool greedy,
                            RolloutBatch& batch) {
  const WorldConfig& world = env.world();
  FlatObservation obs = flatten(env.reset(mode), world);
  EpisodeRecord ep;
  ep.begin = batch.transitions.size();
  ep.config = env.episode();
  while (true) {
    const PolicyDecision d = decide(params, obs, rng, greedy);
    StepOutcome out = env.step(d.action);
    Transition t{std::move(obs), d.action, out.reward, d.log_prob, d.value, DoneKind::kNone};
    if (out.done)
      t.done_kind = out.event == Event::kTimeout ? DoneKind::kTruncated : DoneKind::kTerminal;
    batch.transitions.push_back(std::move(t));
    ep.total_reward += out.reward;
    obs = flatten(out.observation, world);
    if (out.done) {
      ep.event = out.event;
      break;
    }
  }
  ep.length = batch.transitions.size() - ep.begin;
  ep.final_obs = std::move(obs);
  batch.episodes.push_back(std::move(ep));
}

/// One rollout worker: its own environment and action-sampling stream.
struct RolloutWorker {
  NavEnv env;
  Rng rng;
};

/// Collects complete training episodes until at least `min_steps` transitions exist.
///
/// With N workers each one runs until it alone holds ceil(min_steps / N) steps,
/// finishing its current episode; results are concatenated in worker order.
inline RolloutBatch collect_rollouts(const PolicyParams& params, std::span<RolloutWorker> workers, int min_steps,
                                     Mode mode = Mode::kTrain) {
  if (workers.empty()) throw ContractViolation("collect_rollouts: no workers");
  if (min_steps <= 0) throw ContractViolation("collect_rollouts: min_steps must be positive");
  const std::size_t n = workers.size();
  const std::size_t quota = (static_cast<std::size_t>(min_steps) + n - 1) / n;
  std::vector<RolloutBatch> parts(n);
  auto run = [&](std::size_t w) {
    while (parts[w].steps() < quota) collect_episode(params, workers[w].env, mode, workers[w].rng, false, parts[w]);
  };
  if (n == 1) {
    run(0);
  } else {
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n; ++w)
      threads.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (std::thread& t : threads) t.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }
  RolloutBatch out = std::move(parts[0]);
  for (std::size_t w = 1; w < n; ++w) {
    const std::size_t offset = out.transitions.size();
    for (EpisodeRecord& ep : parts[w].episodes) {
      ep.begin += offset;
      out.episodes.push_back(std::move(ep));
    }
    std::move(parts[w].transitions.begin(), parts[w].transitions.end(), std::back_inserter(out.transitions));
  }
  return out;
}

/// GAE over one episode. values[t] = V(s_t); `bootstrap` is V(s_T) after the
/// last step (0 for terminal endings). Returns unnormalized advantages.
inline std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                          double bootstrap, double gamma, double lambda) {
  if (rewards.size() != values.size()) throw ContractViolation("gae: rewards and values differ in length");
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    const double next_value = t + 1 < rewards.size() ? values[t + 1] : bootstrap;
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    adv[t] = running;
  }
  return adv;
}

/// Fills advantages (normalized to zero mean, unit variance over the batch)
/// and returns (raw advantage + value). Timeouts bootstrap with the current
/// value estimate of the final observation.
inline void compute_gae(RolloutBatch& batch, double gamma, double lambda, const PolicyParams& params) {
  const std::size_t n = batch.steps();
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);
  std::vector<double> rewards, values;
  for (const EpisodeRecord& ep : batch.episodes) {
    if (ep.length == 0 || ep.begin + ep.length > n) throw ContractViolation("compute_gae: malformed episode");
    const Transition& last = batch.transitions[ep.begin + ep.length - 1];
    if (last.done_kind == DoneKind::kNone) throw ContractViolation("compute_gae: incomplete episode");
    rewards.clear();
    values.clear();
    for (std::size_t i = ep.begin; i < ep.begin + ep.length; ++i) {
      rewards.push_back(batch.transitions[i].reward);
      values.push_back(batch.transitions[i].value_old);
    }
    const double bootstrap =
        last.done_kind == DoneKind::kTruncated ? forward_value(params, to_vector(ep.final_obs)) : 0.0;
    const std::vector<double> adv = gae_advantages(rewards, values, bootstrap, gamma, lambda);
    for (std::size_t k = 0; k < adv.size(); ++k) {
      batch.advantages[ep.begin + k] = adv[k];
      batch.returns[ep.begin + k] = adv[k] + values[k];
    }
  }
  if (n == 0) return;
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  for (double& a : batch.advantages) a = sd > 0.0 ? (a - mean) / sd : a - mean;
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  std::size_t minibatches = 0;
};

/// Fisher-Yates with the portable Rng, so the order is identical everywhere.
inline void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

inline Minibatch gather_minibatch(const RolloutBatch& batch, std::span<const std::size_t> idx, Eigen::Index input) {
  Minibatch mb;
  const auto b = static_cast<Eigen::Index>(idx.size());
  mb.obs.resize(input, b);
  mb.actions.resize(idx.size());
  mb.log_prob_old.resize(b);
  mb.advantages.resize(b);
  mb.returns.resize(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const std::size_t i = idx[static_cast<std::size_t>(j)];
    const Transition& t = batch.transitions[i];
    if (static_cast<Eigen::Index>(t.obs.size()) != input) throw ContractViolation("observation size mismatch");
    mb.obs.col(j) = to_vector(t.obs);
    mb.actions[static_cast<std::size_t>(j)] = t.action;
    mb.log_prob_old(j) = t.log_prob_old;
    mb.advantages(j) = batch.advantages[i];
    mb.returns(j) = batch.returns[i];
  }
  return mb;
}

/// `epochs` shuffled passes of minibatch Adam on the clipped PPO loss.
inline UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBatch& batch,
                              const PpoHyper& hyper, Rng& rng) {
  if (batch.advantages.size() != batch.steps() || batch.returns.size() != batch.steps())
    throw ContractViolation("ppo_update: batch has no advantages; run compute_gae first");
  const PpoLossSpec spec{hyper.clip, hyper.vf_coeff, hyper.entropy_coeff};
  const AdamConfig adam_cfg{hyper.lr};
  std::vector<std::size_t> order(batch.steps());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto mb_size = static_cast<std::size_t>(hyper.minibatch);
  UpdateStats stats;
  PolicyParams grad;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += mb_size) {
      const std::size_t len = std::min(mb_size, order.size() - start);
      const Minibatch mb = gather_minibatch(batch, std::span(order).subspan(start, len), params.policy.input_size());
      LossStats loss;
      try {
        loss = ppo_loss(params, mb, spec, &grad);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " [epoch " + std::to_string(epoch) + ", minibatch at " +
                             std::to_string(start) + "]");
      }
      adam_step(params, grad, adam, adam_cfg);
      stats.policy_loss += loss.policy_loss;
      stats.value_loss += loss.value_loss;
      stats.entropy += loss.entropy;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    const double k = static_cast<double>(stats.minibatches);
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
  }
  return stats;
}

struct IterationMetrics {
  int iteration = 0;
  std::size_t total_steps = 0;
  std::size_t episodes = 0;
  double mean_reward = 0.0;
  double goal_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_ep_len = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double wall_clock_s = 0.0;
  friend bool operator==(const IterationMetrics&, const IterationMetrics&) = default;
};

/// Episode statistics of a batch (losses are left at zero).
inline IterationMetrics episode_metrics(const RolloutBatch& batch) {
  IterationMetrics m;
  m.total_steps = batch.steps();
  m.episodes = batch.episodes.size();
  if (m.episodes == 0) return m;
  std::size_t goals = 0, collisions = 0, timeouts = 0;
  double reward_sum = 0.0;
  for (const EpisodeRecord& ep : batch.episodes) {
    reward_sum += ep.total_reward;
    goals += ep.event == Event::kGoalReached;
    collisions += ep.event == Event::kCollision;
    timeouts += ep.event == Event::kTimeout;
  }
  const double n = static_cast<double>(m.episodes);
  m.mean_reward = reward_sum / n;
  m.goal_rate = static_cast<double>(goals) / n;
  m.collision_rate = static_cast<double>(collisions) / n;
  m.timeout_rate = static_cast<double>(timeouts) / n;
  m.mean_ep_len = static_cast<double>(m.total_steps) / n;
  return m;
}

inline constexpr const char* kMetricsHeader =
    "iteration,total_steps,episodes,mean_reward,goal_rate,collision_rate,timeout_rate,mean_ep_len,"
    "policy_loss,value_loss,entropy,wall_clock_s";

namespace detail {
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string to_csv_row(const IterationMetrics& m) {
  using detail::format_double;
  std::string row = std::to_string(m.iteration) + "," + std::to_string(m.total_steps) + "," +
                    std::to_string(m.episodes);
  for (double v : {m.mean_reward, m.goal_rate, m.collision_rate, m.timeout_rate, m.mean_ep_len, m.policy_loss,
                   m.value_loss, m.entropy, m.wall_clock_s})
    row += "," + format_double(v);
  return row;
}

inline IterationMetrics parse_csv_row(const std::string& row) {
  std::vector<std::string> cells;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (cells.size() != 12) throw ConfigError("metrics row has " + std::to_string(cells.size()) + " fields, expected 12");
  IterationMetrics m;
  try {
    m.iteration = std::stoi(cells[0]);
    m.total_steps = std::stoull(cells[1]);
    m.episodes = std::stoull(cells[2]);
    double* fields[] = {&m.mean_reward, &m.goal_rate, &m.collision_rate, &m.timeout_rate, &m.mean_ep_len,
                        &m.policy_loss, &m.value_loss, &m.entropy, &m.wall_clock_s};
    for (std::size_t i = 0; i < 9; ++i) *fields[i] = std::stod(cells[i + 3]);
  } catch (const std::logic_error&) {
    throw ConfigError("malformed metrics row: " + row);
  }
  return m;
}

/// True iff the last `window` goal rates all strictly exceed `threshold`.
inline bool early_stop(std::span<const double> goal_rate_history, std::size_t window = 5, double threshold = 0.8) {
  if (goal_rate_history.size() < window) return false;
  return std::all_of(goal_rate_history.end() - static_cast<std::ptrdiff_t>(window), goal_rate_history.end(),
                     [&](double g) { return g > threshold; });
}

/// Owns everything one training run mutates: weights, optimizer, rollout
/// workers and the shuffle stream. All streams derive from the master seed.
class Trainer {
 public:
  Trainer(WorldConfig world, EnvConfig env, PpoHyper hyper, Architecture arch, std::uint64_t seed,
          std::size_t workers = 1)
      : hyper_(hyper), seed_(seed) {
    if (workers == 0) throw ConfigError("workers must be >= 1");
    if (static_cast<std::size_t>(arch.input) != flat_observation_size(world.camera))
      throw ConfigError("model input size " + std::to_string(arch.input) + " does not match camera (" +
                        std::to_string(flat_observation_size(world.camera)) + ")");
    params_ = init_params(arch, Rng::derive(seed, 0).next_u64());
    adam_ = AdamState::zeros(arch);
    update_rng_ = Rng::derive(seed, 1);
    for (std::size_t w = 0; w < workers; ++w)
      workers_.push_back({NavEnv(world, env, Rng::derive(seed, 1000 + w).next_u64()), Rng::derive(seed, 2000 + w)});
  }

  /// collect -> GAE -> update; metrics describe the episodes collected this iteration.
  IterationMetrics train_iteration() {
    const auto t0 = std::chrono::steady_clock::now();
    RolloutBatch batch = collect_rollouts(params_, workers_, hyper_.batch_min_steps);
    compute_gae(batch, hyper_.gamma, hyper_.lambda, params_);
    const UpdateStats up = ppo_update(params_, adam_, batch, hyper_, update_rng_);
    IterationMetrics m = episode_metrics(batch);
    m.iteration = ++iteration_;
    m.policy_loss = up.policy_loss;
    m.value_loss = up.value_loss;
    m.entropy = up.entropy;
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    goal_rates_.push_back(m.goal_rate);
    return m;
  }

  bool should_stop() const { return early_stop(goal_rates_); }

  const PolicyParams& params() const { return params_; }
  const AdamState& adam() const { return adam_; }
  int iteration() const { return iteration_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& goal_rate_history() const { return goal_rates_; }

 private:
  PpoHyper hyper_;
  std::uint64_t seed_;
  PolicyParams params_;
  AdamState adam_;
  Rng update_rng_;
  std::vector<RolloutWorker> workers_;
  int iteration_ = 0;
  std::vector<double> goal_rates_;
};

}  // namespace uavnav

#endif  // UAVNAV_PPO_HPP
