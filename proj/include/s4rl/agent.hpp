#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "s4rl/agent_core.hpp"

namespace s4rl {

inline double stable_logsumexp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

// Proposal actions for the soft-maximum estimate: half uniform over the
// action box, half from the current policy, each with the importance
// correction -log(proposal density) - log(count) baked into log_weight so
// that logsumexp(q + log_weight) estimates the soft maximum of q over the
// action space. Exhaustive proposal sets with zero weights reduce it to the
// exact log-sum-exp.
struct CqlProposalSet {
  std::vector<Vec> actions;
  std::vector<double> log_weights;
  std::size_t n_policy = 0;  // trailing actions drawn from the policy
};

inline CqlProposalSet sample_cql_proposals(const GaussianPolicy& policy,
                                           const EnvSpec& spec, const Vec& state,
                                           std::size_t count, SeededRng& rng) {
  require(count >= 2, "need at least two proposal actions");
  CqlProposalSet out;
  const std::size_t n_uniform = count / 2;
  out.n_policy = count - n_uniform;
  out.actions.reserve(count);
  out.log_weights.reserve(count);
  double log_box_volume = 0.0;
  for (std::size_t d = 0; d < spec.action_dim; ++d)
    log_box_volume += std::log(spec.action_hi[d] - spec.action_lo[d]);
  const double log_n = std::log(static_cast<double>(count));
  for (std::size_t k = 0; k < n_uniform; ++k) {
    Vec a(spec.action_dim);
    for (std::size_t d = 0; d < spec.action_dim; ++d)
      a[d] = rng.uniform(spec.action_lo[d], spec.action_hi[d]);
    out.actions.push_back(std::move(a));
    out.log_weights.push_back(log_box_volume - log_n);
  }
  for (std::size_t k = 0; k < out.n_policy; ++k) {
    PolicySample ps = policy.sample(state, rng);
    out.actions.push_back(std::move(ps.action));
    out.log_weights.push_back(-ps.log_prob - log_n);
  }
  return out;
}

// Soft-maximum estimate over a proposal set. q[k] must align with
// proposals.actions[k]. Exhaustive proposals with zero log-weights make
// this the exact log-sum-exp over the action set.
inline double cql_logsumexp(std::span<const double> q,
                            const CqlProposalSet& props) {
  require(q.size() == props.actions.size(), "proposal/value count mismatch");
  thread_local std::vector<double> shifted;
  shifted.resize(q.size());
  for (std::size_t k = 0; k < q.size(); ++k)
    shifted[k] = q[k] + props.log_weights[k];
  return stable_logsumexp(shifted);
}

// A minibatch, unpacked column-wise.
struct BatchView {
  std::vector<Vec> s, a, s_next;
  Vec r;
  std::vector<unsigned char> done;

  static BatchView from(const OfflineDataset& ds,
                        const std::vector<std::size_t>& idx) {
    BatchView b;
    b.s.reserve(idx.size());
    b.a.reserve(idx.size());
    b.s_next.reserve(idx.size());
    b.r.reserve(idx.size());
    b.done.reserve(idx.size());
    for (std::size_t i : idx) {
      const Transition& t = ds.transitions[i];
      b.s.push_back(t.s);
      b.a.push_back(t.a);
      b.s_next.push_back(t.s_next);
      b.r.push_back(t.r);
      b.done.push_back(t.done ? 1 : 0);
    }
    return b;
  }

  std::size_t size() const { return s.size(); }
};

// Conservative actor-critic whose policy-evaluation inputs are averaged
// over augmented copies of the state. With the identity augmentation and
// count 1 every number it produces coincides with the plain conservative
// baseline.
class S4rlAgent {
public:
  S4rlAgent(const EnvSpec& spec, AgentConfig cfg, SeededRng& init_rng)
      : cfg_(std::move(cfg)), core_(spec, cfg_, init_rng) {
    cfg_.validate();
  }

  const AgentConfig& config() const { return cfg_; }
  ActorCriticCore& core() { return core_; }
  const ActorCriticCore& core() const { return core_; }

  // Bootstrapped targets: a' is sampled from the current policy at the raw
  // next state; the target critics see `count` augmented copies of the next
  // state, averaged per critic, then the twin minimum. Mix-up leaves next
  // states unchanged by definition, so the target side degrades to identity
  // for that kind. Terminal transitions mask the whole bootstrap.
  Vec bellman_targets(const BatchView& batch, SeededRng& rng) const {
    const std::size_t n = batch.size();
    require(n > 0, "bellman_targets: empty batch");
    const double alpha = core_.alpha();

    std::vector<Vec> next_actions(n);
    Vec next_logp(n);
    for (std::size_t b = 0; b < n; ++b) {
      PolicySample ps = core_.policy.sample(batch.s_next[b], rng);
      next_actions[b] = std::move(ps.action);
      next_logp[b] = ps.log_prob;
    }

    const AugmentKind target_kind = target_side_kind();
    const std::size_t count = cfg_.s4rl.count;
    auto augmented =
        augment_batch(batch.s_next, {}, target_kind, core_.spec, rng, count);

    Vec y(n);
    thread_local Vec concat;
    const double inv_count = 1.0 / static_cast<double>(count);
    for (std::size_t b = 0; b < n; ++b) {
      double q1 = 0.0, q2 = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        q1 += q_eval(core_.critics.target1, augmented[j][b], next_actions[b], concat);
        q2 += q_eval(core_.critics.target2, augmented[j][b], next_actions[b], concat);
      }
      q1 *= inv_count;
      q2 *= inv_count;
      const double qmin = std::min(q1, q2);
      const double bootstrap = batch.done[b] ? 0.0 : 1.0;
      y[b] = batch.r[b] +
             cfg_.gamma * bootstrap * (qmin - alpha * next_logp[b]);
    }
    if (!all_finite(y)) throw NumericError("bellman targets are not finite");
    return y;
  }

  // Critic objective: conservative term on the raw states (soft-maximum of
  // sampled actions minus the dataset-action value, the released-code form
  // of the regularizer) plus the mean squared error between the
  // augmentation-averaged online critics and the detached targets. Fills
  // parameter gradients for both critics.
  struct CriticLossOut {
    double loss = 0.0;
    double bellman = 0.0;
    double cql = 0.0;
    double q_data_mean = 0.0;
    double q_sampled_mean = 0.0;
  };

  CriticLossOut critic_loss_and_grad(const BatchView& batch, const Vec& targets,
                                     SeededRng& rng,
                                     std::vector<double>* grad_q1,
                                     std::vector<double>* grad_q2,
                                     CriticDebug* debug = nullptr) const {
    const std::size_t n = batch.size();
    require(n > 0 && targets.size() == n, "critic loss: batch/target mismatch");
    const std::size_t count = cfg_.s4rl.count;
    const double inv_count = 1.0 / static_cast<double>(count);
    const double inv_2b = 1.0 / (2.0 * static_cast<double>(n));

    auto augmented =
        augment_batch(batch.s, batch.s_next, cfg_.s4rl.kind, core_.spec, rng, count);

    const DenseNet* nets[2] = {&core_.critics.q1, &core_.critics.q2};
    std::vector<double>* grads[2] = {grad_q1, grad_q2};
    if (debug)
      for (int c = 0; c < 2; ++c) {
        debug->preds[c].assign(n, 0.0);
        debug->lse[c].assign(n, 0.0);
        debug->q_data[c].assign(n, 0.0);
      }

    CriticLossOut out;
    thread_local Vec concat;
    thread_local std::vector<Tape> bellman_tapes;
    thread_local Tape data_tape;
    thread_local std::vector<Tape> proposal_tapes;
    bellman_tapes.resize(count);
    const bool use_cql = cfg_.cql.weight > 0.0;
    std::size_t sampled_count = 0;

    for (std::size_t b = 0; b < n; ++b) {
      CqlProposalSet props;
      if (use_cql) {
        props = sample_cql_proposals(core_.policy, core_.spec, batch.s[b],
                                     cfg_.cql.n_samples, rng);
        proposal_tapes.resize(props.actions.size());
      }
      for (int c = 0; c < 2; ++c) {
        // Augmentation-averaged prediction against the detached target.
        double pred = 0.0;
        for (std::size_t j = 0; j < count; ++j)
          pred += q_eval(*nets[c], augmented[j][b], batch.a[b], concat,
                         grads[c] ? &bellman_tapes[j] : nullptr);
        pred *= inv_count;
        const double residual = pred - targets[b];
        out.bellman += residual * residual * inv_2b;
        if (debug) debug->preds[c][b] = pred;
        if (grads[c]) {
          const double coef = 2.0 * residual * inv_2b * inv_count;
          for (std::size_t j = 0; j < count; ++j)
            nets[c]->backward(bellman_tapes[j],
                              std::span<const double>(&coef, 1), *grads[c]);
        }

        // Regularizer inputs stay unaugmented.
        const double q_data = q_eval(*nets[c], batch.s[b], batch.a[b], concat,
                                     use_cql && grads[c] ? &data_tape : nullptr);
        out.q_data_mean += q_data * inv_2b;
        if (debug) debug->q_data[c][b] = q_data;

        if (use_cql) {
          const double w = cfg_.cql.weight * inv_2b;
          if (grads[c]) {
            const double coef = -w;
            nets[c]->backward(data_tape, std::span<const double>(&coef, 1),
                              *grads[c]);
          }
          thread_local std::vector<double> qvals;
          qvals.resize(props.actions.size());
          for (std::size_t k = 0; k < props.actions.size(); ++k)
            qvals[k] = q_eval(*nets[c], batch.s[b], props.actions[k], concat,
                              grads[c] ? &proposal_tapes[k] : nullptr);
          const double lse = cql_logsumexp(qvals, props);
          out.cql += (lse - q_data) * inv_2b;
          if (debug) debug->lse[c][b] = lse;
          for (double q : qvals) {
            out.q_sampled_mean += q;
            ++sampled_count;
          }
          if (grads[c]) {
            for (std::size_t k = 0; k < props.actions.size(); ++k) {
              // Softmax of (q + log_weight) from the soft-maximum term.
              const double coef =
                  w * std::exp(qvals[k] + props.log_weights[k] - lse);
              nets[c]->backward(proposal_tapes[k],
                                std::span<const double>(&coef, 1), *grads[c]);
            }
          }
        }
      }
    }
    out.q_sampled_mean = sampled_count > 0
                             ? out.q_sampled_mean / static_cast<double>(sampled_count)
                             : out.q_data_mean;
    out.loss = cfg_.cql.weight * out.cql + out.bellman;
    if (!std::isfinite(out.loss))
      throw NumericError("critic loss is not finite");
    return out;
  }

  StepDiagnostics train_step(const OfflineDataset& ds, SeededRng& rng) {
    return step_impl(ds, rng, /*update_policy=*/true);
  }

  // Critic and target update only; the policy stays frozen.
  StepDiagnostics critic_only_step(const OfflineDataset& ds, SeededRng& rng) {
    return step_impl(ds, rng, /*update_policy=*/false);
  }

  StepDiagnostics train_step_on(const BatchView& batch, SeededRng& rng,
                                bool update_policy = true) {
    return step_on_batch(batch, rng, update_policy);
  }

private:
  AugmentKind target_side_kind() const {
    if (!cfg_.s4rl.augment_targets) return Identity{};
    if (std::holds_alternative<MixUp>(cfg_.s4rl.kind)) return Identity{};
    return cfg_.s4rl.kind;
  }

  StepDiagnostics step_impl(const OfflineDataset& ds, SeededRng& rng,
                            bool update_policy) {
    require(!ds.transitions.empty(), "train_step: dataset is empty");
    // Draw order per step: batch indices, next-state policy samples, target
    // augmentations, online augmentations, proposal actions, policy-update
    // samples. Fixed so replays and ablations align stream-for-stream.
    const auto idx = sample_indices(ds, cfg_.batch, rng);
    const BatchView batch = BatchView::from(ds, idx);
    return step_on_batch(batch, rng, update_policy);
  }

  StepDiagnostics step_on_batch(const BatchView& batch, SeededRng& rng,
                                bool update_policy) {
    StepDiagnostics diag;
    diag.step = core_.step;
    const char* phase = "bellman targets";
    try {
      const Vec y = bellman_targets(batch, rng);
      for (double v : y) diag.target_mean += v / static_cast<double>(y.size());

      phase = "critic loss";
      thread_local std::vector<double> g1, g2;
      g1.assign(core_.critics.q1.param_count(), 0.0);
      g2.assign(core_.critics.q2.param_count(), 0.0);
      const CriticLossOut closs = critic_loss_and_grad(batch, y, rng, &g1, &g2);
      diag.critic_loss = closs.loss;
      diag.bellman_term = closs.bellman;
      diag.cql_term = closs.cql;
      diag.q_data_mean = closs.q_data_mean;
      diag.q_sampled_mean = closs.q_sampled_mean;
      diag.conservative_gap = closs.q_data_mean - closs.q_sampled_mean;

      phase = "critic update";
      adam_step(core_.critics.q1, g1, core_.opt_q1, "critic 1");
      adam_step(core_.critics.q2, g2, core_.opt_q2, "critic 2");

      if (update_policy) {
        phase = "policy loss";
        thread_local std::vector<double> gp;
        gp.assign(core_.policy.net().param_count(), 0.0);
        const std::vector<Vec>* pi_states = &batch.s;
        std::vector<Vec> augmented_states;
        if (cfg_.s4rl.augment_policy) {
          auto aug = augment_batch(batch.s, batch.s_next, cfg_.s4rl.kind,
                                   core_.spec, rng, 1);
          augmented_states = std::move(aug[0]);
          pi_states = &augmented_states;
        }
        const PolicyLossOut pl = policy_loss_and_grad(core_, *pi_states, rng, &gp);
        diag.policy_loss = pl.loss;
        diag.policy_logp_mean = pl.logp_mean;

        phase = "policy update";
        adam_step(core_.policy.net(), gp, core_.opt_policy, "policy");
        entropy_autotune_step(core_.entropy, pl.logp_mean);
      }
      diag.alpha = core_.alpha();

      phase = "target update";
      core_.critics.polyak_update();
    } catch (const NumericError& e) {
      throw NumericError("train step " + std::to_string(core_.step) +
                         " diverged during " + phase + ": " + e.what());
    }
    ++core_.step;

    const double check[] = {diag.critic_loss, diag.bellman_term, diag.cql_term,
                            diag.policy_loss, diag.q_data_mean,
                            diag.conservative_gap, diag.target_mean, diag.alpha};
    if (!all_finite(check))
      throw NumericError("train step " + std::to_string(diag.step) +
                         ": non-finite diagnostics");
    return diag;
  }

  AgentConfig cfg_;
  ActorCriticCore core_;
};

}  // namespace s4rl
