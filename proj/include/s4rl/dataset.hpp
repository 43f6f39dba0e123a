#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "s4rl/env.hpp"
#include "s4rl/rng.hpp"
#include "s4rl/rollout.hpp"

namespace s4rl {

// One (s, a, r, s', done) tuple; the atom of an offline dataset.
struct Transition {
  Vec s;
  Vec a;
  double r = 0.0;
  Vec s_next;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

enum class SplitKind { Random, Medium, MediumReplay, MediumExpert, Custom };

inline std::string split_name(SplitKind k) {
  switch (k) {
    case SplitKind::Random: return "random";
    case SplitKind::Medium: return "medium";
    case SplitKind::MediumReplay: return "medium-replay";
    case SplitKind::MediumExpert: return "medium-expert";
    case SplitKind::Custom: return "custom";
  }
  return "custom";
}

inline SplitKind split_from_name(const std::string& s) {
  if (s == "random") return SplitKind::Random;
  if (s == "medium") return SplitKind::Medium;
  if (s == "medium-replay") return SplitKind::MediumReplay;
  if (s == "medium-expert") return SplitKind::MediumExpert;
  if (s == "custom") return SplitKind::Custom;
  throw ConfigError("unknown split kind '" + s + "'");
}

// Immutable-after-construction collection of transitions plus provenance.
// Episodes are recorded as start indices into the transition list; within
// an episode consecutive transitions chain exactly.
struct OfflineDataset {
  std::string env_name;
  EnvSpec spec;
  SplitKind split = SplitKind::Custom;
  std::string behavior;       // description of the collecting policy
  std::uint64_t seed = 0;     // collection seed
  double parent_fraction = 1.0;   // subsample provenance; 1.0 = not a subsample
  std::uint64_t parent_seed = 0;  // subsample seed when parent_fraction < 1.0
  std::vector<Transition> transitions;
  std::vector<std::size_t> episode_starts;

  std::size_t size() const { return transitions.size(); }
  std::size_t episode_count() const { return episode_starts.size(); }

  std::pair<std::size_t, std::size_t> episode_range(std::size_t e) const {
    require(e < episode_starts.size(), "episode index out of range");
    const std::size_t begin = episode_starts[e];
    const std::size_t end =
        e + 1 < episode_starts.size() ? episode_starts[e + 1] : transitions.size();
    return {begin, end};
  }

  double mean_reward() const {
    double sum = 0.0;
    for (const auto& t : transitions) sum += t.r;
    return transitions.empty() ? 0.0 : sum / static_cast<double>(size());
  }

  double mean_episode_return() const {
    if (episode_starts.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& t : transitions) sum += t.r;
    return sum / static_cast<double>(episode_count());
  }

  // Structural invariants: boundaries partition the list, chains link, all
  // states in bounds, rewards finite.
  void check_consistency() const {
    if (transitions.empty()) {
      require(episode_starts.empty(), "empty dataset with episode boundaries");
      return;
    }
    require(!episode_starts.empty() && episode_starts[0] == 0,
            "first episode must start at index 0");
    for (std::size_t e = 0; e < episode_starts.size(); ++e) {
      auto [begin, end] = episode_range(e);
      require(begin < end, "empty episode in boundary list");
      for (std::size_t k = begin; k < end; ++k) {
        const Transition& t = transitions[k];
        require(spec.state_in_bounds(t.s) && spec.state_in_bounds(t.s_next),
                "transition state outside the recorded bounds");
        require(std::isfinite(t.r), "non-finite reward in dataset");
        if (k + 1 < end)
          require(t.s_next == transitions[k + 1].s,
                  "broken chain: next state does not match the following state");
      }
    }
  }
};

// Roll out `episodes` full episodes of `policy` and record every transition.
inline OfflineDataset collect(const EnvBase& env, const PolicyFn& policy,
                              std::size_t episodes, SeededRng& rng,
                              SplitKind split = SplitKind::Custom,
                              std::string behavior = "scripted") {
  OfflineDataset ds;
  ds.env_name = env.name();
  ds.spec = env.spec();
  ds.split = split;
  ds.behavior = std::move(behavior);
  ds.seed = rng.seed();
  for (std::size_t e = 0; e < episodes; ++e) {
    ds.episode_starts.push_back(ds.transitions.size());
    EnvState s = env.reset(rng);
    for (;;) {
      Vec a = policy(s, rng);
      StepResult r = env.step(s, a);
      ds.transitions.push_back(
          {s.x, std::move(a), r.reward, r.state.x, r.done});
      if (r.done) break;
      s = std::move(r.state);
    }
  }
  return ds;
}

// Uniform subsample without replacement of ceil(fraction * N) transitions
// (or, with by_episode, of whole episodes). Order and chaining within kept
// episodes are preserved; the result records its provenance.
inline OfflineDataset subsample(const OfflineDataset& ds, double fraction,
                                SeededRng& rng, bool by_episode = false) {
  require(fraction > 0.0 && fraction <= 1.0,
          "subsample fraction must lie in (0, 1], got " +
              format_double(fraction));
  OfflineDataset out;
  out.env_name = ds.env_name;
  out.spec = ds.spec;
  out.split = ds.split;
  out.behavior = ds.behavior;
  out.seed = ds.seed;
  out.parent_fraction = fraction;
  out.parent_seed = rng.seed();
  if (fraction == 1.0) {
    out.transitions = ds.transitions;
    out.episode_starts = ds.episode_starts;
    return out;
  }

  auto pick = [&](std::size_t n, std::size_t k) {
    // Partial Fisher-Yates, then sort to preserve original order.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.next_below(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  };

  if (by_episode) {
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(ds.episode_count())));
    for (std::size_t e : pick(ds.episode_count(), keep)) {
      auto [begin, end] = ds.episode_range(e);
      out.episode_starts.push_back(out.transitions.size());
      out.transitions.insert(out.transitions.end(),
                             ds.transitions.begin() + begin,
                             ds.transitions.begin() + end);
    }
  } else {
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(ds.size())));
    // Transition-level sampling breaks chains, so each kept transition
    // becomes its own single-step episode.
    for (std::size_t i : pick(ds.size(), keep)) {
      out.episode_starts.push_back(out.transitions.size());
      out.transitions.push_back(ds.transitions[i]);
    }
  }
  return out;
}

// I.i.d. uniform draws with replacement.
inline std::vector<std::size_t> sample_indices(const OfflineDataset& ds,
                                               std::size_t batch_size,
                                               SeededRng& rng) {
  require(!ds.transitions.empty(), "sample_batch: dataset is empty");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.next_below(ds.size());
  return idx;
}

inline std::vector<Transition> sample_batch(const OfflineDataset& ds,
                                            std::size_t batch_size,
                                            SeededRng& rng) {
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t i : sample_indices(ds, batch_size, rng))
    batch.push_back(ds.transitions[i]);
  return batch;
}

}  // namespace s4rl
