#pragma once

#include <string>
#include <vector>

#include "s4rl/agent.hpp"
#include "s4rl/dataset.hpp"
#include "s4rl/rollout.hpp"

namespace s4rl {

// Small online soft actor-critic run. Not a deliverable in itself: it
// manufactures partially-trained behavior policies for the medium-grade
// dataset splits, mirroring how those splits are constructed upstream.
struct OnlineSacOptions {
  std::size_t budget_steps = 6000;
  std::size_t warmup_steps = 500;
  std::size_t snapshot_count = 10;
  double target_normalized = 50.0;  // snapshot the policy near this score
  std::size_t eval_every = 500;
  std::size_t eval_episodes = 5;
  std::vector<std::size_t> hidden = {64, 64};
  double lr = 1e-3;
  std::size_t batch = 64;
  double entropy_coef = 0.2;
};

struct OnlineSacResult {
  GaussianPolicy medium;                  // ~target_normalized policy
  double medium_normalized = 0.0;
  std::vector<GaussianPolicy> snapshots;  // training progression, oldest first
};

inline PolicyFn stochastic_policy(const GaussianPolicy& policy) {
  return [&policy](const EnvState& s, SeededRng& rng) {
    return policy.sample(s.x, rng).action;
  };
}

inline PolicyFn deterministic_policy(const GaussianPolicy& policy) {
  return [&policy](const EnvState& s, SeededRng&) {
    return policy.mean_action(s.x);
  };
}

inline OnlineSacResult train_online_sac(const EnvBase& env,
                                        const ReferenceScores& refs,
                                        const OnlineSacOptions& opt,
                                        SeededRng& rng) {
  AgentConfig cfg;
  cfg.policy_hidden = opt.hidden;
  cfg.critic_hidden = opt.hidden;
  cfg.lr = opt.lr;
  cfg.batch = opt.batch;
  cfg.gamma = env.spec().gamma;
  cfg.cql.weight = 0.0;  // plain SAC
  cfg.s4rl.kind = Identity{};
  cfg.s4rl.count = 1;
  cfg.entropy_coef = opt.entropy_coef;

  SeededRng init_rng = rng.split("sac/init");
  SeededRng env_rng = rng.split("sac/env");
  SeededRng train_rng = rng.split("sac/train");
  S4rlAgent agent(env.spec(), cfg, init_rng);

  std::vector<Transition> buffer;
  buffer.reserve(opt.budget_steps);
  OnlineSacResult out;
  out.snapshots.push_back(agent.core().policy);
  const std::size_t snap_every =
      std::max<std::size_t>(1, opt.budget_steps / opt.snapshot_count);

  auto eval_score = [&](std::uint64_t step) {
    SeededRng eval_rng = rng.split("sac/eval/" + std::to_string(step));
    const double raw = mean_return(env, deterministic_policy(agent.core().policy),
                                   opt.eval_episodes, eval_rng);
    return normalized_score(raw, refs);
  };

  EnvState s = env.reset(env_rng);
  const PolicyFn explore = uniform_random_policy(env.spec());
  bool reached = false;
  double best_score = -std::numeric_limits<double>::infinity();
  GaussianPolicy best_policy = agent.core().policy;
  for (std::size_t step = 1; step <= opt.budget_steps && !reached; ++step) {
    Vec a = step <= opt.warmup_steps
                ? explore(s, env_rng)
                : agent.core().policy.sample(s.x, env_rng).action;
    StepResult r = env.step(s, a);
    buffer.push_back({s.x, std::move(a), r.reward, r.state.x, r.done});
    s = r.done ? env.reset(env_rng) : std::move(r.state);

    if (step > opt.warmup_steps && buffer.size() >= cfg.batch) {
      BatchView batch;
      for (std::size_t k = 0; k < cfg.batch; ++k) {
        const Transition& t = buffer[train_rng.next_below(buffer.size())];
        batch.s.push_back(t.s);
        batch.a.push_back(t.a);
        batch.s_next.push_back(t.s_next);
        batch.r.push_back(t.r);
        batch.done.push_back(t.done ? 1 : 0);
      }
      (void)agent.train_step_on(batch, train_rng);
    }
    if (step % snap_every == 0 &&
        out.snapshots.size() < opt.snapshot_count)
      out.snapshots.push_back(agent.core().policy);
    if (step % opt.eval_every == 0) {
      const double score = eval_score(step);
      if (score > best_score) {
        best_score = score;
        best_policy = agent.core().policy;
      }
      if (score >= opt.target_normalized) {
        // First evaluation at or above the target is the medium policy.
        out.medium_normalized = score;
        out.medium = agent.core().policy;
        reached = true;
      }
    }
  }
  if (!reached) {
    // Budget ran out below target; the best checkpoint is the closest
    // thing to a half-trained policy this run produced.
    out.medium = best_policy;
    out.medium_normalized = best_score;
  }
  return out;
}

}  // namespace s4rl
