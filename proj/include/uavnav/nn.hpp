#ifndef UAVNAV_NN_HPP
#define UAVNAV_NN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uavnav/errors.hpp"
#include "uavnav/rng.hpp"

namespace uavnav {

/// Layer sizes shared by the policy and value trunks. The two networks have
/// identical hidden widths but separate weights.
struct Architecture {
  int input = 110;
  std::vector<int> hidden = {256, 256};
  int actions = 15;
  std::string activation = "tanh";

  std::vector<int> policy_sizes() const { return sizes_with_head(actions); }
  std::vector<int> value_sizes() const { return sizes_with_head(1); }
  friend bool operator==(const Architecture&, const Architecture&) = default;

 private:
  std::vector<int> sizes_with_head(int head) const {
    std::vector<int> s{input};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(head);
    return s;
  }
};

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// tanh hidden layers, linear output layer.
struct Mlp {
  std::vector<Layer> layers;

  static Mlp zeros(const std::vector<int>& sizes) {
    Mlp m;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
      m.layers.push_back({Eigen::MatrixXd::Zero(sizes[i + 1], sizes[i]), Eigen::VectorXd::Zero(sizes[i + 1])});
    return m;
  }

  Eigen::Index input_size() const { return layers.front().weight.cols(); }
  Eigen::Index output_size() const { return layers.back().weight.rows(); }

  /// Forward pass over a batch of column vectors. When `acts` is given it
  /// receives the input and every hidden activation (for backprop).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>* acts = nullptr) const {
    if (x.rows() != input_size())
      throw ContractViolation("mlp: input has " + std::to_string(x.rows()) + " rows, expected " +
                              std::to_string(input_size()));
    Eigen::MatrixXd a = x;
    if (acts) acts->assign(1, x);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Eigen::MatrixXd z = layers[l].weight * a;
      z.colwise() += layers[l].bias;
      if (l + 1 == layers.size()) return z;
      a = z.array().tanh().matrix();
      if (acts) acts->push_back(a);
    }
    return a;
  }

  /// Accumulates parameter gradients into `grad` given dLoss/dOutput; returns nothing
  /// for the input since observations are not trained.
  void backward(const std::vector<Eigen::MatrixXd>& acts, Eigen::MatrixXd d_out, Mlp& grad) const {
    for (std::size_t l = layers.size(); l-- > 0;) {
      grad.layers[l].weight.noalias() += d_out * acts[l].transpose();
      grad.layers[l].bias += d_out.rowwise().sum();
      if (l == 0) break;
      Eigen::MatrixXd d_a = layers[l].weight.transpose() * d_out;
      d_out = d_a.array() * (1.0 - acts[l].array().square());
    }
  }
};

/// Policy and value network weights.
struct PolicyParams {
  Architecture arch;
  Mlp policy;
  Mlp value;

  static PolicyParams zeros(const Architecture& arch) {
    return {arch, Mlp::zeros(arch.policy_sizes()), Mlp::zeros(arch.value_sizes())};
  }
};

/// Visits every tensor with a stable name ("policy.0.weight", ...). Weights
/// are column-major, as stored by Eigen.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  auto visit = [&](const char* prefix, auto& mlp) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      const std::string base = std::string(prefix) + "." + std::to_string(l) + ".";
      fn(base + "weight", mlp.layers[l].weight);
      fn(base + "bias", mlp.layers[l].bias);
    }
  };
  visit("policy", p.policy);
  visit("value", p.value);
}

inline std::size_t parameter_count(const PolicyParams& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

inline bool all_finite(const PolicyParams& p) {
  bool ok = true;
  for_each_tensor(p, [&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

namespace detail {

/// Orthogonal matrix (rows x cols) scaled by `gain`, from the QR of a Gaussian draw.
inline Eigen::MatrixXd orthogonal(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng) {
  const Eigen::Index big = std::max(rows, cols), small = std::min(rows, cols);
  Eigen::MatrixXd g(big, small);
  for (Eigen::Index j = 0; j < small; ++j)
    for (Eigen::Index i = 0; i < big; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < small; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return gain * (rows >= cols ? q : Eigen::MatrixXd(q.transpose()));
}

inline Mlp init_mlp(const std::vector<int>& sizes, double head_gain, Rng& rng) {
  Mlp m = Mlp::zeros(sizes);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const double gain = l + 1 == m.layers.size() ? head_gain : std::sqrt(2.0);
    m.layers[l].weight = orthogonal(sizes[l + 1], sizes[l], gain, rng);
  }
  return m;
}

}  // namespace detail

/// Orthogonal init; policy head scaled by 0.01 so the initial policy is near uniform.
inline PolicyParams init_params(const Architecture& arch, std::uint64_t seed) {
  if (arch.activation != "tanh") throw ContractViolation("only tanh activation is supported");
  Rng rng(seed);
  PolicyParams p{arch, {}, {}};
  p.policy = detail::init_mlp(arch.policy_sizes(), 0.01, rng);
  p.value = detail::init_mlp(arch.value_sizes(), 1.0, rng);
  return p;
}

inline Eigen::VectorXd forward_policy(const PolicyParams& p, const Eigen::VectorXd& obs) {
  return p.policy.forward(obs);
}

inline double forward_value(const PolicyParams& p, const Eigen::VectorXd& obs) {
  return p.value.forward(obs)(0, 0);
}

struct CategoricalStats {
  Eigen::VectorXd prob;
  double log_prob = 0.0;
  double entropy = 0.0;
};

/// Log-softmax with max subtraction; stable for logits of any finite magnitude.
inline Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

inline double categorical_entropy(const Eigen::VectorXd& prob, const Eigen::VectorXd& log_prob) {
  return -(prob.array() * log_prob.array()).sum();
}

inline CategoricalStats softmax_logprob(const Eigen::VectorXd& logits, int action) {
  if (action < 0 || action >= logits.size()) throw ContractViolation("softmax_logprob: action out of range");
  const Eigen::VectorXd logp = log_softmax(logits);
  Eigen::VectorXd prob = logp.array().exp().matrix();
  const double h = categorical_entropy(prob, logp);
  return {std::move(prob), logp(action), h};
}

/// Inverse-CDF draw with one uniform variate.
inline int sample_categorical(const Eigen::VectorXd& prob, Rng& rng) {
  const double u = rng.uniform();
  double cdf = 0.0;
  int last_positive = 0;
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    if (prob(i) <= 0.0) continue;
    cdf += prob(i);
    last_positive = static_cast<int>(i);
    if (u < cdf) return last_positive;
  }
  return last_positive;  // u landed in rounding slack above the final cdf
}

inline int argmax(const Eigen::VectorXd& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

/// Coefficients of the clipped-surrogate PPO loss.
struct PpoLossSpec {
  double clip = 0.3;
  double vf_coeff = 1.0;
  double entropy_coeff = 0.0;
};

/// Column-per-sample training data for one gradient step.
struct Minibatch {
  Eigen::MatrixXd obs;  // input x B
  std::vector<int> actions;
  Eigen::VectorXd log_prob_old;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return obs.cols(); }
};

struct LossStats {
  double total = 0.0;
  double policy_loss = 0.0;  // -mean clipped surrogate
  double value_loss = 0.0;   // mean 0.5 (V - R)^2
  double entropy = 0.0;      // mean policy entropy
};

/// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A), to be maximized.
inline double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

/// PPO loss L = -mean(surrogate) + c_v mean(0.5 (V - R)^2) - c_e mean(entropy).
///
/// If `grad` is non-null it is overwritten with dL/dparams. The min picks the
/// unclipped branch on ties; the clipped branch carries zero gradient whenever
/// it is strictly smaller, since clip(ratio) is then constant in ratio.
inline LossStats ppo_loss(const PolicyParams& p, const Minibatch& mb, const PpoLossSpec& spec,
                          PolicyParams* grad = nullptr) {
  const Eigen::Index n = mb.size();
  if (n == 0) throw ContractViolation("ppo_loss: empty minibatch");
  if (static_cast<Eigen::Index>(mb.actions.size()) != n || mb.log_prob_old.size() != n ||
      mb.advantages.size() != n || mb.returns.size() != n)
    throw ContractViolation("ppo_loss: minibatch fields disagree on size");

  std::vector<Eigen::MatrixXd> pol_acts, val_acts;
  const Eigen::MatrixXd logits = p.policy.forward(mb.obs, grad ? &pol_acts : nullptr);
  const Eigen::MatrixXd values = p.value.forward(mb.obs, grad ? &val_acts : nullptr);

  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd d_logits(logits.rows(), n);
  Eigen::MatrixXd d_values(1, n);
  LossStats s;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd logp = log_softmax(logits.col(i));
    const Eigen::VectorXd prob = logp.array().exp().matrix();
    const double h = categorical_entropy(prob, logp);
    const int a = mb.actions[static_cast<std::size_t>(i)];
    const double ratio = std::exp(logp(a) - mb.log_prob_old(i));
    const double adv = mb.advantages(i);
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - spec.clip, 1.0 + spec.clip) * adv;
    const bool unclipped_active = unclipped <= clipped;
    const double err = values(0, i) - mb.returns(i);

    s.policy_loss -= std::min(unclipped, clipped);
    s.value_loss += 0.5 * err * err;
    s.entropy += h;

    if (grad) {
      // d(-surrogate)/dlogits = -ratio * A * (onehot - p) on the active branch;
      // d(-c_e H)/dlogits = c_e p (log p + H).
      const double g = unclipped_active ? unclipped : 0.0;
      Eigen::VectorXd d = g * prob + spec.entropy_coeff * (prob.array() * (logp.array() + h)).matrix();
      d(a) -= g;
      d_logits.col(i) = inv_n * d;
      d_values(0, i) = inv_n * spec.vf_coeff * err;
    }
  }
  s.policy_loss *= inv_n;
  s.value_loss *= inv_n;
  s.entropy *= inv_n;
  s.total = s.policy_loss + spec.vf_coeff * s.value_loss - spec.entropy_coeff * s.entropy;
  if (!std::isfinite(s.total))
    throw NumericalError("ppo_loss: non-finite loss (policy " + std::to_string(s.policy_loss) + ", value " +
                         std::to_string(s.value_loss) + ", entropy " + std::to_string(s.entropy) + ")");

  if (grad) {
    *grad = PolicyParams::zeros(p.arch);
    p.policy.backward(pol_acts, std::move(d_logits), grad->policy);
    p.value.backward(val_acts, std::move(d_values), grad->value);
    if (!all_finite(*grad)) throw NumericalError("ppo_loss: non-finite gradient");
  }
  return s;
}

struct AdamState {
  PolicyParams m;
  PolicyParams v;
  std::int64_t t = 0;

  static AdamState zeros(const Architecture& arch) {
    return {PolicyParams::zeros(arch), PolicyParams::zeros(arch), 0};
  }
};

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam, in place.
inline void adam_step(PolicyParams& params, const PolicyParams& grads, AdamState& adam, const AdamConfig& cfg) {
  ++adam.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    if (p.rows() != g.rows() || p.cols() != g.cols() || p.rows() != m.rows() || p.cols() != m.cols())
      throw ContractViolation("adam_step: shape mismatch");
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  };
  auto update_mlp = [&](Mlp& p, const Mlp& g, Mlp& m, Mlp& v) {
    if (p.layers.size() != g.layers.size() || p.layers.size() != m.layers.size())
      throw ContractViolation("adam_step: layer count mismatch");
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      update(p.layers[l].weight, g.layers[l].weight, m.layers[l].weight, v.layers[l].weight);
      update(p.layers[l].bias, g.layers[l].bias, m.layers[l].bias, v.layers[l].bias);
    }
  };
  update_mlp(params.policy, grads.policy, adam.m.policy, adam.v.policy);
  update_mlp(params.value, grads.value, adam.m.value, adam.v.value);
}

}  // namespace uavnav

#endif  // UAVNAV_NN_HPP
