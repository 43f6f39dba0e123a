#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "s4rl/agent.hpp"

namespace s4rl {

// Plain conservative Q-learning agent, written directly against the
// unaugmented objective: soft-maximum regularizer plus the single-sample
// Bellman error. Kept as its own code path so augmented variants can be
// checked against it stream-for-stream.
class CqlBaselineAgent {
public:
  CqlBaselineAgent(const EnvSpec& spec, AgentConfig cfg, SeededRng& init_rng)
      : cfg_(std::move(cfg)), core_(spec, cfg_, init_rng) {
    cfg_.validate();
  }

  const AgentConfig& config() const { return cfg_; }
  ActorCriticCore& core() { return core_; }
  const ActorCriticCore& core() const { return core_; }

  // y = r + gamma (1 - done) (min_c targetQ_c(s', a') - alpha log pi(a'|s')),
  // a' sampled from the current policy at s'.
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
    Vec y(n);
    thread_local Vec concat;
    for (std::size_t b = 0; b < n; ++b) {
      const double q1 =
          q_eval(core_.critics.target1, batch.s_next[b], next_actions[b], concat);
      const double q2 =
          q_eval(core_.critics.target2, batch.s_next[b], next_actions[b], concat);
      const double bootstrap = batch.done[b] ? 0.0 : 1.0;
      y[b] = batch.r[b] + cfg_.gamma * bootstrap *
                              (std::min(q1, q2) - alpha * next_logp[b]);
    }
    if (!all_finite(y)) throw NumericError("bellman targets are not finite");
    return y;
  }

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
                                     std::vector<double>* grad_q2) const {
    const std::size_t n = batch.size();
    require(n > 0 && targets.size() == n, "critic loss: batch/target mismatch");
    const double inv_2b = 1.0 / (2.0 * static_cast<double>(n));
    const DenseNet* nets[2] = {&core_.critics.q1, &core_.critics.q2};
    std::vector<double>* grads[2] = {grad_q1, grad_q2};
    const bool use_cql = cfg_.cql.weight > 0.0;

    CriticLossOut out;
    thread_local Vec concat;
    thread_local Tape tape;
    thread_local std::vector<Tape> proposal_tapes;
    std::size_t sampled_count = 0;
    for (std::size_t b = 0; b < n; ++b) {
      CqlProposalSet props;
      if (use_cql) {
        props = sample_cql_proposals(core_.policy, core_.spec, batch.s[b],
                                     cfg_.cql.n_samples, rng);
        proposal_tapes.resize(props.actions.size());
      }
      for (int c = 0; c < 2; ++c) {
        const double pred = q_eval(*nets[c], batch.s[b], batch.a[b], concat,
                                   grads[c] ? &tape : nullptr);
        const double residual = pred - targets[b];
        out.bellman += residual * residual * inv_2b;
        out.q_data_mean += pred * inv_2b;
        if (grads[c]) {
          const double coef = 2.0 * residual * inv_2b;
          nets[c]->backward(tape, std::span<const double>(&coef, 1), *grads[c]);
        }
        if (use_cql) {
          const double w = cfg_.cql.weight * inv_2b;
          if (grads[c]) {
            // Dataset-action value enters the regularizer with weight -1.
            const double coef = -w;
            nets[c]->backward(tape, std::span<const double>(&coef, 1),
                              *grads[c]);
          }
          thread_local std::vector<double> qvals;
          qvals.resize(props.actions.size());
          for (std::size_t k = 0; k < props.actions.size(); ++k)
            qvals[k] = q_eval(*nets[c], batch.s[b], props.actions[k], concat,
                              grads[c] ? &proposal_tapes[k] : nullptr);
          const double lse = cql_logsumexp(qvals, props);
          out.cql += (lse - pred) * inv_2b;
          for (double q : qvals) {
            out.q_sampled_mean += q;
            ++sampled_count;
          }
          if (grads[c]) {
            for (std::size_t k = 0; k < props.actions.size(); ++k) {
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
    return step_impl(ds, rng, true);
  }

  StepDiagnostics critic_only_step(const OfflineDataset& ds, SeededRng& rng) {
    return step_impl(ds, rng, false);
  }

  StepDiagnostics train_step_on(const BatchView& batch, SeededRng& rng,
                                bool update_policy = true) {
    return step_on_batch(batch, rng, update_policy);
  }

private:
  StepDiagnostics step_impl(const OfflineDataset& ds, SeededRng& rng,
                            bool update_policy) {
    require(!ds.transitions.empty(), "train_step: dataset is empty");
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
        const PolicyLossOut pl = policy_loss_and_grad(core_, batch.s, rng, &gp);
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
    return diag;
  }

  AgentConfig cfg_;
  ActorCriticCore core_;
};

}  // namespace s4rl
