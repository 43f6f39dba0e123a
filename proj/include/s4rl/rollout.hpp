#pragma once

#include <functional>
#include <memory>
#include <string>

#include "s4rl/env.hpp"
#include "s4rl/pendulum.hpp"
#include "s4rl/point_mass.hpp"

namespace s4rl {

inline const bool kBuiltinEnvsRegistered = [] {
  env_registry()["pointmass2d"] = [] { return std::make_unique<PointMass2D>(); };
  env_registry()["pendulum"] = [] { return std::make_unique<Pendulum>(); };
  return true;
}();

// A policy maps a state to an in-bounds action; stochastic policies draw
// from the rng they are given.
using PolicyFn = std::function<Vec(const EnvState&, SeededRng&)>;

inline PolicyFn uniform_random_policy(const EnvSpec& spec) {
  return [&spec](const EnvState&, SeededRng& rng) {
    Vec a(spec.action_dim);
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] = rng.uniform(spec.action_lo[i], spec.action_hi[i]);
    return a;
  };
}

inline PolicyFn scripted_expert_policy(const EnvBase& env) {
  return [&env](const EnvState& s, SeededRng&) { return env.expert_action(s); };
}

// Undiscounted episode return.
inline double episode_return(const EnvBase& env, const PolicyFn& policy,
                             SeededRng& rng) {
  EnvState s = env.reset(rng);
  double total = 0.0;
  for (;;) {
    StepResult r = env.step(s, policy(s, rng));
    total += r.reward;
    if (r.done) break;
    s = std::move(r.state);
  }
  return total;
}

inline double mean_return(const EnvBase& env, const PolicyFn& policy,
                          std::size_t episodes, SeededRng& rng) {
  double sum = 0.0;
  for (std::size_t e = 0; e < episodes; ++e)
    sum += episode_return(env, policy, rng);
  return sum / static_cast<double>(episodes);
}

// Mean episode returns of the uniform-random policy and the scripted
// expert; the anchors of normalized scoring.
struct ReferenceScores {
  double random_score = 0.0;
  double expert_score = 0.0;
};

inline constexpr std::uint64_t kReferenceSeed = 20240601;
inline constexpr std::size_t kReferenceEpisodes = 100;

inline ReferenceScores reference_scores(const EnvBase& env,
                                        std::size_t episodes = kReferenceEpisodes,
                                        std::uint64_t seed = kReferenceSeed) {
  require(episodes >= 100, "reference_scores: need at least 100 episodes");
  SeededRng rng(seed);
  SeededRng rng_random = rng.split("reference/random");
  SeededRng rng_expert = rng.split("reference/expert");
  ReferenceScores refs;
  refs.random_score =
      mean_return(env, uniform_random_policy(env.spec()), episodes, rng_random);
  refs.expert_score =
      mean_return(env, scripted_expert_policy(env), episodes, rng_expert);
  if (!(refs.expert_score > refs.random_score))
    throw NumericError(env.name() +
                       ": expert reference does not beat the random reference; "
                       "normalization undefined");
  return refs;
}

inline double normalized_score(double raw_return, const ReferenceScores& refs) {
  return 100.0 * (raw_return - refs.random_score) /
         (refs.expert_score - refs.random_score);
}

}  // namespace s4rl
