#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "uavnav/ppo.hpp"

namespace uavnav {
namespace {

TEST(ClippedSurrogate, Examples) {
  EXPECT_EQ(clipped_surrogate(1.0, -3.7, 0.1), -3.7);
  EXPECT_NEAR(clipped_surrogate(1.5, 2.0, 0.3), 2.6, 1e-15);
  EXPECT_NEAR(clipped_surrogate(0.5, -1.0, 0.3), -0.7, 1e-15);
}

TEST(ClippedSurrogate, Properties) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double r = std::exp(rng.uniform(-2, 2)), a = 5 * rng.normal(), eps = rng.uniform(0.01, 0.5);
    EXPECT_EQ(clipped_surrogate(1.0, a, eps), a);
    EXPECT_LE(clipped_surrogate(r, a, eps), r * a);
  }
}

TEST(EarlyStop, Rule) {
  const std::vector<double> fires{0.81, 0.82, 0.85, 0.9, 0.81};
  const std::vector<double> too_short{0.81, 0.81, 0.81, 0.81};
  const std::vector<double> boundary{0.9, 0.9, 0.8, 0.9, 0.9};
  const std::vector<double> recovers{0.1, 0.8, 0.9, 0.9, 0.9, 0.9, 0.95};
  EXPECT_TRUE(early_stop(fires));
  EXPECT_FALSE(early_stop(too_short));
  EXPECT_FALSE(early_stop(boundary));
  EXPECT_TRUE(early_stop(recovers));
}

TEST(Gae, SingleTerminalStep) {
  const std::vector<double> r{5.0}, v{2.0};
  const auto a = gae_advantages(r, v, 0.0, 1.0, 1.0);
  EXPECT_EQ(a[0], 3.0);
  EXPECT_EQ(a[0] + v[0], 5.0);
}

TEST(Gae, LambdaOneIsDiscountedReturnMinusBaseline) {
  Rng rng(2);
  std::vector<double> r(5), v(5);
  for (int i = 0; i < 5; ++i) {
    r[static_cast<std::size_t>(i)] = rng.normal();
    v[static_cast<std::size_t>(i)] = rng.normal();
  }
  const auto a = gae_advantages(r, v, 0.0, 0.99, 1.0);
  for (std::size_t t = 0; t < 5; ++t) {
    double g = 0.0;
    for (std::size_t k = t; k < 5; ++k) g += std::pow(0.99, static_cast<double>(k - t)) * r[k];
    EXPECT_NEAR(a[t], g - v[t], 1e-12);
  }
}

TEST(Gae, LambdaZeroIsTdResidual) {
  const std::vector<double> r{1.0, -2.0, 0.5}, v{0.3, 0.7, -0.1};
  const auto a = gae_advantages(r, v, 0.4, 0.9, 0.0);
  EXPECT_EQ(a[0], 1.0 + 0.9 * 0.7 - 0.3);
  EXPECT_EQ(a[1], -2.0 + 0.9 * -0.1 - 0.7);
  EXPECT_EQ(a[2], 0.5 + 0.9 * 0.4 - -0.1);
}

TEST(Gae, MatchesDoubleSumOracle) {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 1 + rng.below(10);
    std::vector<double> r(n), v(n);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = rng.uniform(-1, 1);
      v[t] = rng.uniform(-1, 1);
    }
    const double boot = rng.below(2) ? rng.uniform(-1, 1) : 0.0;
    const double gamma = rng.uniform(), lambda = rng.uniform();
    const auto a = gae_advantages(r, v, boot, gamma, lambda);
    const auto o = oracle::gae(r, v, boot, gamma, lambda);
    for (std::size_t t = 0; t < n; ++t) EXPECT_NEAR(a[t], o[t], 1e-12);
  }
}

WorldConfig small_world() {
  WorldConfig w;
  w.arena = {{0, 0}, {10, 10}};
  w.start_region = {{1, 1}, {3, 9}};
  w.goal_region = {{7, 1}, {9, 9}};
  return w;
}

Architecture small_arch() { return {110, {16}, 15, "tanh"}; }

std::vector<RolloutWorker> make_workers(std::size_t n, std::uint64_t seed) {
  std::vector<RolloutWorker> ws;
  for (std::size_t i = 0; i < n; ++i) ws.push_back({NavEnv(small_world(), {}, seed + i), Rng(seed * 31 + i)});
  return ws;
}

TEST(CollectRollouts, OneStepMinimumGivesOneCompleteEpisode) {
  const PolicyParams p = init_params(small_arch(), 1);
  auto ws = make_workers(1, 4);
  const RolloutBatch b = collect_rollouts(p, ws, 1);
  ASSERT_EQ(b.episodes.size(), 1u);
  EXPECT_EQ(b.steps(), b.episodes[0].length);
  EXPECT_NE(b.transitions.back().done_kind, DoneKind::kNone);
}

TEST(CollectRollouts, CompleteEpisodesBound) {
  const PolicyParams p = init_params(small_arch(), 1);
  auto ws = make_workers(1, 5);
  const RolloutBatch b = collect_rollouts(p, ws, 2000);
  EXPECT_GE(b.steps(), 2000u);
  EXPECT_LT(b.steps(), 2000u + 400u);
  std::size_t expect_begin = 0;
  for (const EpisodeRecord& ep : b.episodes) {
    EXPECT_EQ(ep.begin, expect_begin);
    expect_begin += ep.length;
    for (std::size_t i = ep.begin; i + 1 < ep.begin + ep.length; ++i)
      EXPECT_EQ(b.transitions[i].done_kind, DoneKind::kNone);
    EXPECT_NE(b.transitions[ep.begin + ep.length - 1].done_kind, DoneKind::kNone);
    EXPECT_EQ(b.transitions[ep.begin + ep.length - 1].done_kind == DoneKind::kTruncated, ep.event == Event::kTimeout);
    double sum = 0.0;
    for (std::size_t i = ep.begin; i < ep.begin + ep.length; ++i) {
      sum += b.transitions[i].reward;
      EXPECT_LE(b.transitions[i].log_prob_old, 0.0);
    }
    EXPECT_EQ(sum, ep.total_reward);
  }
  EXPECT_EQ(expect_begin, b.steps());
}

TEST(CollectRollouts, DeterministicForSeedAndWorkerCount) {
  const PolicyParams p = init_params(small_arch(), 2);
  for (std::size_t n : {1u, 3u}) {
    auto a = make_workers(n, 6), b = make_workers(n, 6);
    const RolloutBatch x = collect_rollouts(p, a, 1500), y = collect_rollouts(p, b, 1500);
    ASSERT_EQ(x.steps(), y.steps());
    EXPECT_GE(x.steps(), 1500u);
    for (std::size_t i = 0; i < x.steps(); ++i) {
      EXPECT_EQ(x.transitions[i].action, y.transitions[i].action);
      EXPECT_EQ(x.transitions[i].reward, y.transitions[i].reward);
      EXPECT_EQ(x.transitions[i].obs, y.transitions[i].obs);
    }
  }
}

TEST(ComputeGae, NormalizesAndBootstrapsTimeouts) {
  const PolicyParams p = init_params(small_arch(), 3);
  auto ws = make_workers(1, 7);
  RolloutBatch b = collect_rollouts(p, ws, 3000);
  compute_gae(b, 0.99, 0.95, p);
  double mean = 0, var = 0;
  for (double a : b.advantages) mean += a;
  mean /= static_cast<double>(b.steps());
  for (double a : b.advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(b.steps());
  EXPECT_LT(std::abs(mean), 1e-10);
  EXPECT_NEAR(var, 1.0, 1e-10);
  // Returns are raw (unnormalized) GAE + value, episode by episode.
  for (const EpisodeRecord& ep : b.episodes) {
    std::vector<double> r, v;
    for (std::size_t i = ep.begin; i < ep.begin + ep.length; ++i) {
      r.push_back(b.transitions[i].reward);
      v.push_back(b.transitions[i].value_old);
    }
    const double boot = ep.event == Event::kTimeout ? forward_value(p, to_vector(ep.final_obs)) : 0.0;
    const auto o = oracle::gae(r, v, boot, 0.99, 0.95);
    for (std::size_t k = 0; k < o.size(); ++k) EXPECT_NEAR(b.returns[ep.begin + k], o[k] + v[k], 1e-9);
  }
}

RolloutBatch synthetic_batch(const PolicyParams& p, std::size_t n, Rng& rng) {
  RolloutBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.obs.resize(110);
    for (double& x : t.obs) x = rng.uniform(-1, 1);
    const PolicyDecision d = decide(p, t.obs, rng, false);
    t.action = d.action;
    t.log_prob_old = d.log_prob;
    t.value_old = d.value;
    t.reward = rng.normal();
    t.done_kind = DoneKind::kTerminal;
    b.episodes.push_back({i, 1, Event::kCollision, t.reward, t.obs, {}});
    b.transitions.push_back(std::move(t));
    b.advantages.push_back(rng.normal());
    b.returns.push_back(rng.normal());
  }
  return b;
}

TEST(PpoUpdate, ZeroAdvantageNoValueNoEntropyLeavesParams) {
  Rng rng(8);
  PolicyParams p = init_params(small_arch(), 8);
  RolloutBatch b = synthetic_batch(p, 100, rng);
  std::fill(b.advantages.begin(), b.advantages.end(), 0.0);
  const PolicyParams before = p;
  AdamState adam = AdamState::zeros(p.arch);
  PpoHyper h;
  h.vf_coeff = 0.0;
  h.entropy_coeff = 0.0;
  h.epochs = 2;
  h.minibatch = 32;
  ppo_update(p, adam, b, h, rng);
  EXPECT_EQ(adam.t, 8);  // 2 epochs x ceil(100 / 32)
  for (std::size_t l = 0; l < p.policy.layers.size(); ++l) {
    EXPECT_EQ(p.policy.layers[l].weight, before.policy.layers[l].weight);
    EXPECT_EQ(p.value.layers[l].weight, before.value.layers[l].weight);
  }
}

TEST(PpoUpdate, OnPolicyGradientIsVanillaPolicyGradient) {
  // At theta == theta_old every ratio is 1, so the surrogate gradient equals
  // -mean(A * grad log pi(a|s)), computed here one sample at a time.
  Rng rng(9);
  const PolicyParams p = init_params(small_arch(), 9);
  const RolloutBatch b = synthetic_batch(p, 20, rng);
  std::vector<std::size_t> idx(20);
  for (std::size_t i = 0; i < 20; ++i) idx[i] = i;
  const Minibatch mb = gather_minibatch(b, idx, 110);
  PolicyParams g;
  ppo_loss(p, mb, {0.3, 0.0, 0.0}, &g);

  PolicyParams expected = PolicyParams::zeros(p.arch);
  for (std::size_t i = 0; i < 20; ++i) {
    std::vector<Eigen::MatrixXd> acts;
    const Eigen::VectorXd x = to_vector(b.transitions[i].obs);
    const Eigen::VectorXd logits = p.policy.forward(x, &acts);
    const Eigen::VectorXd prob = log_softmax(logits).array().exp().matrix();
    Eigen::VectorXd dlogp = -prob;
    dlogp(b.transitions[i].action) += 1.0;
    p.policy.backward(acts, (-b.advantages[i] / 20.0) * dlogp, expected.policy);
  }
  for (std::size_t l = 0; l < g.policy.layers.size(); ++l) {
    EXPECT_TRUE(g.policy.layers[l].weight.isApprox(expected.policy.layers[l].weight, 1e-10));
    EXPECT_TRUE(g.policy.layers[l].bias.isApprox(expected.policy.layers[l].bias, 1e-10));
  }
}

TEST(PpoUpdate, LossDecreasesOnFrozenBatch) {
  Rng rng(10);
  PolicyParams p = init_params(small_arch(), 10);
  const RolloutBatch b = synthetic_batch(p, 256, rng);
  std::vector<std::size_t> idx(256);
  for (std::size_t i = 0; i < 256; ++i) idx[i] = i;
  const Minibatch all = gather_minibatch(b, idx, 110);
  const PpoLossSpec spec{0.3, 1.0, 0.0};
  const double before = ppo_loss(p, all, spec).total;
  AdamState adam = AdamState::zeros(p.arch);
  PpoHyper h;
  h.lr = 1e-3;
  h.epochs = 10;
  h.minibatch = 64;
  ppo_update(p, adam, b, h, rng);
  EXPECT_LT(ppo_loss(p, all, spec).total, before);
}

TEST(PpoUpdate, RequiresAdvantages) {
  Rng rng(11);
  PolicyParams p = init_params(small_arch(), 11);
  RolloutBatch b = synthetic_batch(p, 4, rng);
  b.advantages.clear();
  AdamState adam = AdamState::zeros(p.arch);
  EXPECT_THROW(ppo_update(p, adam, b, {}, rng), ContractViolation);
}

TEST(Metrics, EpisodeStatistics) {
  RolloutBatch b;
  for (int i = 0; i < 10; ++i) {
    EpisodeRecord ep;
    ep.begin = b.transitions.size();
    ep.length = static_cast<std::size_t>(i + 1);
    ep.event = i < 8 ? Event::kGoalReached : (i == 8 ? Event::kCollision : Event::kTimeout);
    ep.total_reward = 10.0 * i;
    b.transitions.resize(b.transitions.size() + ep.length);
    b.episodes.push_back(ep);
  }
  const IterationMetrics m = episode_metrics(b);
  EXPECT_EQ(m.goal_rate, 0.8);
  EXPECT_NEAR(m.goal_rate + m.collision_rate + m.timeout_rate, 1.0, 1e-12);
  EXPECT_EQ(m.mean_reward, 45.0);
  EXPECT_EQ(m.total_steps, 55u);
  EXPECT_EQ(m.mean_ep_len, 5.5);
}

TEST(Metrics, CsvRoundTripIsLossless) {
  Rng rng(12);
  IterationMetrics m;
  m.iteration = 17;
  m.total_steps = 10123;
  m.episodes = 99;
  m.mean_reward = rng.normal() * 1000;
  m.goal_rate = 0.81;
  m.collision_rate = 0.1 + 1e-17;
  m.timeout_rate = 1.0 / 3.0;
  m.mean_ep_len = 102.25;
  m.policy_loss = -rng.normal() * 1e-3;
  m.value_loss = 1e6 * rng.uniform();
  m.entropy = std::log(15.0);
  m.wall_clock_s = 12.5;
  EXPECT_EQ(parse_csv_row(to_csv_row(m)), m);
  std::string header = kMetricsHeader;
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 11);
  EXPECT_EQ(header,
            "iteration,total_steps,episodes,mean_reward,goal_rate,collision_rate,timeout_rate,mean_ep_len,"
            "policy_loss,value_loss,entropy,wall_clock_s");
  EXPECT_THROW(parse_csv_row("1,2,3"), ConfigError);
}

TEST(Trainer, IterationProducesConsistentMetrics) {
  PpoHyper h;
  h.batch_min_steps = 500;
  h.epochs = 2;
  Trainer t(small_world(), {}, h, small_arch(), 5);
  const IterationMetrics m = t.train_iteration();
  EXPECT_EQ(m.iteration, 1);
  EXPECT_GE(m.total_steps, 500u);
  EXPECT_NEAR(m.goal_rate + m.collision_rate + m.timeout_rate, 1.0, 1e-12);
  EXPECT_TRUE(all_finite(t.params()));
  EXPECT_FALSE(t.should_stop());
}

TEST(Trainer, RejectsMismatchedInputSize) {
  EXPECT_THROW(Trainer(small_world(), {}, {}, Architecture{50, {8}, 15, "tanh"}, 1), ConfigError);
}

}  // namespace
}  // namespace uavnav
