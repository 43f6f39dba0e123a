#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s4rl/adam.hpp"
#include "s4rl/augment.hpp"
#include "s4rl/dataset.hpp"
#include "s4rl/policy.hpp"
#include "s4rl/twin_q.hpp"

namespace s4rl {

// Parameters of the conservative regularizer: how many actions back the
// soft-maximum estimate and how strongly the term is weighted.
struct CqlConfig {
  std::size_t n_samples = 10;
  double weight = 1.0;

  void validate() const {
    require(n_samples >= 2, "cql n_samples must be at least 2");
    require(weight >= 0.0, "cql weight must be non-negative");
  }
};

// Augmentation-averaged policy evaluation: which transformation, how many
// draws are averaged, and which sides of the objective see them.
struct S4rlConfig {
  AugmentKind kind = Identity{};
  std::size_t count = 2;
  bool augment_targets = true;
  bool augment_policy = false;

  void validate() const {
    require(count >= 1, "augmentation count must be at least 1");
    validate_kind(kind);
  }
};

struct EntropyCoef {
  double value = 0.2;
  bool auto_tune = false;
  double target_entropy = 0.0;
  AdamState opt = AdamState::for_params(1, 3e-4);
  double log_alpha = 0.0;

  void validate() const { require(value > 0.0, "entropy coefficient must be positive"); }
};

struct AgentConfig {
  std::vector<std::size_t> policy_hidden = {64, 64};
  std::vector<std::size_t> critic_hidden = {64, 64};
  double lr = 3e-4;
  std::size_t batch = 256;
  double gamma = 0.99;
  double tau_polyak = 0.005;
  CqlConfig cql;
  S4rlConfig s4rl;
  double entropy_coef = 0.2;
  bool auto_entropy = false;

  void validate() const {
    require(!policy_hidden.empty() && !critic_hidden.empty(),
            "networks need at least one hidden layer");
    require(lr > 0.0, "learning rate must be positive");
    require(batch >= 1, "batch size must be at least 1");
    require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
    require(tau_polyak >= 0.0 && tau_polyak <= 1.0, "tau must lie in [0,1]");
    cql.validate();
    s4rl.validate();
    require(entropy_coef > 0.0, "entropy coefficient must be positive");
  }
};

struct StepDiagnostics {
  std::uint64_t step = 0;
  double critic_loss = 0.0;
  double bellman_term = 0.0;
  double cql_term = 0.0;
  double policy_loss = 0.0;
  double q_data_mean = 0.0;
  double q_sampled_mean = 0.0;
  double conservative_gap = 0.0;
  double target_mean = 0.0;
  double policy_logp_mean = 0.0;
  double alpha = 0.0;
};

// Per-sample critic internals, filled on request so tests can replay the
// arithmetic independently.
struct CriticDebug {
  // preds[c][b]: augmentation-averaged online critic value of sample b.
  std::vector<std::vector<double>> preds{2};
  // Soft-maximum estimate and dataset-action value, per critic and sample.
  std::vector<std::vector<double>> lse{2};
  std::vector<std::vector<double>> q_data{2};
};

// The networks, optimizers, and entropy coefficient shared by every agent
// variant. One train step at a time; clones may be rolled out concurrently.
struct ActorCriticCore {
  EnvSpec spec;
  GaussianPolicy policy;
  TwinQ critics;
  AdamState opt_policy, opt_q1, opt_q2;
  EntropyCoef entropy;
  std::uint64_t step = 0;

  ActorCriticCore() = default;

  ActorCriticCore(const EnvSpec& env_spec, const AgentConfig& cfg,
                  SeededRng& init_rng)
      : spec(env_spec),
        policy(env_spec, cfg.policy_hidden, init_rng),
        critics(env_spec, cfg.critic_hidden, cfg.tau_polyak, init_rng) {
    opt_policy = AdamState::for_params(policy.net().param_count(), cfg.lr);
    opt_q1 = AdamState::for_params(critics.q1.param_count(), cfg.lr);
    opt_q2 = AdamState::for_params(critics.q2.param_count(), cfg.lr);
    entropy.value = cfg.entropy_coef;
    entropy.auto_tune = cfg.auto_entropy;
    entropy.target_entropy = -static_cast<double>(env_spec.action_dim);
    entropy.log_alpha = std::log(cfg.entropy_coef);
    entropy.validate();
  }

  double alpha() const { return entropy.value; }
};

// Soft-policy-improvement loss over dataset states: maximize
// E[min_c Q_c(s, a~pi) - alpha log pi(a|s)], i.e. minimize its negation.
// Shared by all agent variants; augmentation never touches this path unless
// states were pre-augmented by the caller. Returns (loss, mean logp, mean qmin).
struct PolicyLossOut {
  double loss = 0.0;
  double logp_mean = 0.0;
  double qmin_mean = 0.0;
};

inline PolicyLossOut policy_loss_and_grad(ActorCriticCore& core,
                                          const std::vector<Vec>& states,
                                          SeededRng& rng,
                                          std::vector<double>* grad_out) {
  const std::size_t batch = states.size();
  require(batch > 0, "policy loss needs a non-empty batch");
  const double alpha = core.alpha();
  const double inv_b = 1.0 / static_cast<double>(batch);

  thread_local Tape pi_tape, q_tape;
  thread_local Vec concat, input_grad;
  PolicyLossOut out;
  for (const Vec& s : states) {
    PolicySample ps = core.policy.sample(s, rng, grad_out ? &pi_tape : nullptr);
    Tape* t1p = grad_out ? &q_tape : nullptr;
    const double q1 = q_eval(core.critics.q1, s, ps.action, concat, t1p);
    thread_local Tape q_tape2;
    Tape* t2p = grad_out ? &q_tape2 : nullptr;
    const double q2 = q_eval(core.critics.q2, s, ps.action, concat, t2p);
    const double qmin = std::min(q1, q2);
    out.loss += inv_b * (alpha * ps.log_prob - qmin);
    out.logp_mean += inv_b * ps.log_prob;
    out.qmin_mean += inv_b * qmin;
    if (grad_out) {
      // d loss / d action through the minimizing critic only.
      input_grad.assign(core.spec.state_dim + core.spec.action_dim, 0.0);
      thread_local std::vector<double> q_grad_scratch;
      const DenseNet& qnet = q1 <= q2 ? core.critics.q1 : core.critics.q2;
      const Tape& qtape = q1 <= q2 ? q_tape : q_tape2;
      q_grad_scratch.assign(qnet.param_count(), 0.0);
      const double one = -inv_b;  // d loss / d qmin
      qnet.backward(qtape, std::span<const double>(&one, 1), q_grad_scratch,
                    input_grad);
      core.policy.backward(
          pi_tape, ps,
          std::span<const double>(input_grad).subspan(core.spec.state_dim),
          alpha * inv_b, *grad_out);
    }
  }
  if (!std::isfinite(out.loss))
    throw NumericError("policy loss is not finite");
  return out;
}

// One optional entropy-coefficient update toward the target entropy.
inline void entropy_autotune_step(EntropyCoef& e, double logp_mean) {
  if (!e.auto_tune) return;
  const double grad = -e.value * (logp_mean + e.target_entropy);
  double la[1] = {e.log_alpha};
  const double g[1] = {grad};
  adam_step(std::span<double>(la, 1), std::span<const double>(g, 1), e.opt,
            "entropy coefficient");
  e.log_alpha = la[0];
  e.value = std::exp(e.log_alpha);
}

}  // namespace s4rl
