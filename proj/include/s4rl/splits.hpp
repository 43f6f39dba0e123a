#pragma once

#include <string>

#include "s4rl/dataset.hpp"
#include "s4rl/online_sac.hpp"

namespace s4rl {

// Appends `extra`'s transitions and boundaries to `base`.
inline void append_dataset(OfflineDataset& base, const OfflineDataset& extra) {
  const std::size_t offset = base.transitions.size();
  for (std::size_t start : extra.episode_starts)
    base.episode_starts.push_back(start + offset);
  base.transitions.insert(base.transitions.end(), extra.transitions.begin(),
                          extra.transitions.end());
}

struct SplitOptions {
  std::size_t episodes = 100;  // 20k transitions at the default cap
  OnlineSacOptions sac;        // behavior-policy training for medium grades
};

inline OnlineSacOptions default_sac_options(const std::string& env_name) {
  OnlineSacOptions opt;
  if (env_name == "pendulum") opt.budget_steps = 16000;
  return opt;
}

// D4RL-style provenance splits:
//   random        episodes from an untrained (uniform) policy
//   medium        episodes from a half-trained stochastic policy
//   medium-replay episodes spread over the training progression snapshots
//   medium-expert half medium, half scripted expert
inline OfflineDataset make_split(const EnvBase& env, SplitKind kind,
                                 SeededRng& rng, SplitOptions opt = {}) {
  const std::size_t episodes = opt.episodes;
  require(episodes > 0, "make_split: need at least one episode");

  if (kind == SplitKind::Random) {
    SeededRng collect_rng = rng.split("split/random");
    OfflineDataset ds = collect(env, uniform_random_policy(env.spec()),
                                episodes, collect_rng, kind, "uniform-random");
    ds.seed = rng.seed();
    return ds;
  }

  if (kind == SplitKind::Custom)
    throw ConfigError("make_split: 'custom' is not a generatable split");

  const ReferenceScores refs = reference_scores(env);
  SeededRng sac_rng = rng.split("split/sac");
  const OnlineSacResult sac = train_online_sac(env, refs, opt.sac, sac_rng);
  const std::string medium_desc =
      "sac-medium(norm=" + std::to_string(sac.medium_normalized) + ")";

  OfflineDataset ds;
  if (kind == SplitKind::Medium) {
    SeededRng collect_rng = rng.split("split/medium");
    ds = collect(env, stochastic_policy(sac.medium), episodes, collect_rng,
                 kind, medium_desc);
  } else if (kind == SplitKind::MediumReplay) {
    SeededRng collect_rng = rng.split("split/medium-replay");
    const std::size_t snaps = sac.snapshots.size();
    ds.env_name = env.name();
    ds.spec = env.spec();
    ds.split = kind;
    ds.behavior = "sac-replay(" + std::to_string(snaps) + " snapshots)";
    for (std::size_t i = 0; i < snaps; ++i) {
      // Distribute episodes across snapshots, earliest snapshots first.
      const std::size_t quota =
          episodes * (i + 1) / snaps - episodes * i / snaps;
      if (quota == 0) continue;
      OfflineDataset part =
          collect(env, stochastic_policy(sac.snapshots[i]), quota, collect_rng,
                  kind, ds.behavior);
      append_dataset(ds, part);
    }
  } else {  // MediumExpert
    SeededRng collect_rng = rng.split("split/medium-expert");
    const std::size_t half = episodes / 2;
    ds = collect(env, stochastic_policy(sac.medium), episodes - half,
                 collect_rng, kind, "medium+scripted-expert");
    OfflineDataset expert_part = collect(env, scripted_expert_policy(env), half,
                                         collect_rng, kind, ds.behavior);
    append_dataset(ds, expert_part);
  }
  ds.seed = rng.seed();
  ds.check_consistency();
  return ds;
}

}  // namespace s4rl
