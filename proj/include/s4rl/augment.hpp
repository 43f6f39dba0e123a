#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "s4rl/common.hpp"
#include "s4rl/env.hpp"
#include "s4rl/rng.hpp"

namespace s4rl {

// Index pairs eligible for state-switch; both members of a pair must share a
// semantic unit (position with position, velocity with velocity).
using SwitchGroups = std::vector<std::pair<std::size_t, std::size_t>>;

inline SwitchGroups default_switch_groups(const std::string& env_name) {
  if (env_name == "pointmass2d") return {{0, 1}, {2, 3}};
  if (env_name == "pendulum") return {{0, 1}};
  throw ConfigError("no switch groups declared for environment '" + env_name + "'");
}

struct GaussianNoise {
  double sigma = 3e-3;
};
struct UniformNoise {
  double alpha = 1e-3;
};
struct AmplitudeScale {
  double lo = 0.98;
  double hi = 1.02;
  bool per_dim = false;  // default: one shared scale factor per state
};
struct DimDropout {};
struct StateSwitch {
  SwitchGroups groups;
};
struct MixUp {
  double beta_alpha = 0.4;
};
struct Identity {};

using AugmentKind = std::variant<GaussianNoise, UniformNoise, AmplitudeScale,
                                 DimDropout, StateSwitch, MixUp, Identity>;

inline void validate_kind(const AugmentKind& kind) {
  if (const auto* g = std::get_if<GaussianNoise>(&kind))
    require(g->sigma > 0.0, "gaussian noise needs sigma > 0");
  else if (const auto* u = std::get_if<UniformNoise>(&kind))
    require(u->alpha > 0.0, "uniform noise needs alpha > 0");
  else if (const auto* a = std::get_if<AmplitudeScale>(&kind))
    require(a->lo > 0.0 && a->lo <= a->hi,
            "amplitude scale needs 0 < lo <= hi");
  else if (const auto* s = std::get_if<StateSwitch>(&kind)) {
    require(!s->groups.empty(), "state-switch needs at least one dimension pair");
    for (std::size_t i = 0; i < s->groups.size(); ++i) {
      require(s->groups[i].first != s->groups[i].second,
              "state-switch pair must name two distinct dimensions");
      for (std::size_t j = i + 1; j < s->groups.size(); ++j) {
        const auto& p = s->groups[i];
        const auto& q = s->groups[j];
        require(p.first != q.first && p.first != q.second &&
                    p.second != q.first && p.second != q.second,
                "state-switch pairs must be disjoint");
      }
    }
  } else if (const auto* m = std::get_if<MixUp>(&kind))
    require(m->beta_alpha > 0.0, "mix-up needs a positive beta parameter");
}

inline std::string kind_to_string(const AugmentKind& kind) {
  std::ostringstream os;
  if (const auto* g = std::get_if<GaussianNoise>(&kind))
    os << "gauss:" << g->sigma;
  else if (const auto* u = std::get_if<UniformNoise>(&kind))
    os << "uniform:" << u->alpha;
  else if (const auto* a = std::get_if<AmplitudeScale>(&kind))
    os << "ampscale:" << a->lo << ":" << a->hi << (a->per_dim ? ":perdim" : "");
  else if (std::holds_alternative<DimDropout>(kind))
    os << "dimdrop";
  else if (std::holds_alternative<StateSwitch>(kind))
    os << "switch";
  else if (const auto* m = std::get_if<MixUp>(&kind))
    os << "mixup:" << m->beta_alpha;
  else
    os << "identity";
  return os.str();
}

// Parses config strings such as "gauss:3e-3", "ampscale:0.98:1.02",
// "switch", "mixup:0.4", "identity". State-switch groups are filled from
// the environment the kind is used with.
inline AugmentKind parse_kind(const std::string& text,
                              const std::string& env_name = "") {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ':')) parts.push_back(tok);
  require(!parts.empty(), "empty augmentation spec");
  auto num = [&](std::size_t i, double fallback) {
    if (parts.size() <= i) return fallback;
    try {
      std::size_t used = 0;
      double v = std::stod(parts[i], &used);
      require(used == parts[i].size(), "trailing junk in '" + parts[i] + "'");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + parts[i] + "' in augmentation '" +
                        text + "'");
    }
  };
  AugmentKind kind;
  const std::string& head = parts[0];
  if (head == "gauss")
    kind = GaussianNoise{num(1, 3e-3)};
  else if (head == "uniform")
    kind = UniformNoise{num(1, 1e-3)};
  else if (head == "ampscale") {
    AmplitudeScale a;
    a.lo = num(1, 0.98);
    a.hi = num(2, 1.02);
    a.per_dim = parts.size() > 3 && parts[3] == "perdim";
    kind = a;
  } else if (head == "dimdrop")
    kind = DimDropout{};
  else if (head == "switch") {
    StateSwitch s;
    if (!env_name.empty()) s.groups = default_switch_groups(env_name);
    kind = s;
  } else if (head == "mixup")
    kind = MixUp{num(1, 0.4)};
  else if (head == "identity")
    kind = Identity{};
  else
    throw ConfigError("unknown augmentation kind '" + head + "'");
  validate_kind(kind);
  return kind;
}

// True iff every dimension lies within the state-space bounds (inclusive).
inline bool validate(std::span<const double> state, const EnvSpec& spec) {
  return spec.state_in_bounds(state);
}

// Convex combination used by mix-up; exposed so the endpoints are testable.
inline Vec mixup_apply(std::span<const double> s, std::span<const double> s_next,
                       double lambda) {
  Vec out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    out[i] = lambda * s[i] + (1.0 - lambda) * s_next[i];
  return out;
}

// Draws one stochastic transformation of s_t. s_next is consulted only by
// mix-up (the next state itself is never modified). The result is clamped
// into the state-space bounds so it is always a valid state.
inline Vec augment(std::span<const double> s, std::optional<std::span<const double>> s_next,
                   const AugmentKind& kind, const EnvSpec& spec, SeededRng& rng) {
  validate_kind(kind);
  require(s.size() == spec.state_dim, "augment: state width mismatch");
  Vec out(s.begin(), s.end());
  if (const auto* g = std::get_if<GaussianNoise>(&kind)) {
    for (double& v : out) v += rng.normal(0.0, g->sigma);
  } else if (const auto* u = std::get_if<UniformNoise>(&kind)) {
    for (double& v : out) v += rng.uniform(-u->alpha, u->alpha);
  } else if (const auto* a = std::get_if<AmplitudeScale>(&kind)) {
    if (a->per_dim) {
      for (double& v : out) v *= rng.uniform(a->lo, a->hi);
    } else {
      const double eps = rng.uniform(a->lo, a->hi);
      for (double& v : out) v *= eps;
    }
  } else if (std::holds_alternative<DimDropout>(kind)) {
    out[rng.next_below(out.size())] = 0.0;
  } else if (const auto* sw = std::get_if<StateSwitch>(&kind)) {
    const auto& [i, j] = sw->groups[rng.next_below(sw->groups.size())];
    require(i < out.size() && j < out.size(),
            "state-switch pair indexes outside the state");
    std::swap(out[i], out[j]);
  } else if (const auto* m = std::get_if<MixUp>(&kind)) {
    if (!s_next)
      throw ConfigError("mix-up augmentation needs the next state");
    require(s_next->size() == s.size(), "augment: next-state width mismatch");
    const double lambda = rng.beta(m->beta_alpha, m->beta_alpha);
    out = mixup_apply(s, *s_next, lambda);
  }
  return spec.clamp_state(std::move(out));
}

// count independent draws per input state; result[k][b] is the k-th
// augmented copy of states[b]. Identity yields count identical copies.
inline std::vector<std::vector<Vec>> augment_batch(
    const std::vector<Vec>& states, const std::vector<Vec>& next_states,
    const AugmentKind& kind, const EnvSpec& spec, SeededRng& rng,
    std::size_t count) {
  require(count >= 1, "augment_batch: count must be at least 1");
  require(next_states.empty() || next_states.size() == states.size(),
          "augment_batch: next_states size mismatch");
  std::vector<std::vector<Vec>> out(count);
  for (auto& copy : out) copy.resize(states.size());
  for (std::size_t b = 0; b < states.size(); ++b) {
    std::optional<std::span<const double>> nxt;
    if (!next_states.empty()) nxt = std::span<const double>(next_states[b]);
    for (std::size_t k = 0; k < count; ++k)
      out[k][b] = augment(states[b], nxt, kind, spec, rng);
  }
  return out;
}

}  // namespace s4rl
