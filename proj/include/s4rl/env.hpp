#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "s4rl/common.hpp"
#include "s4rl/rng.hpp"

namespace s4rl {

// Static description of a control task: box state space, symmetric box
// action space, discount, and episode length.
struct EnvSpec {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  Vec state_lo, state_hi;
  Vec action_lo, action_hi;
  double gamma = 0.99;
  std::size_t max_episode_steps = 200;

  void validate() const {
    require(state_lo.size() == state_dim && state_hi.size() == state_dim,
            "EnvSpec: state bound sizes do not match state_dim");
    require(action_lo.size() == action_dim && action_hi.size() == action_dim,
            "EnvSpec: action bound sizes do not match action_dim");
    for (std::size_t i = 0; i < state_dim; ++i)
      require(state_lo[i] < state_hi[i], "EnvSpec: state lower bound must be below upper");
    for (std::size_t i = 0; i < action_dim; ++i)
      require(action_lo[i] < action_hi[i], "EnvSpec: action lower bound must be below upper");
    require(gamma >= 0.0 && gamma < 1.0, "EnvSpec: gamma must lie in [0,1)");
    require(max_episode_steps > 0, "EnvSpec: max_episode_steps must be positive");
  }

  bool state_in_bounds(std::span<const double> s) const {
    if (s.size() != state_dim) return false;
    for (std::size_t i = 0; i < state_dim; ++i)
      if (!(s[i] >= state_lo[i] && s[i] <= state_hi[i])) return false;
    return true;
  }

  Vec clamp_state(Vec s) const {
    for (std::size_t i = 0; i < state_dim; ++i)
      s[i] = std::min(std::max(s[i], state_lo[i]), state_hi[i]);
    return s;
  }

  bool operator==(const EnvSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const EnvSpec& s) {
  j = {{"state_dim", s.state_dim},   {"action_dim", s.action_dim},
       {"state_lo", s.state_lo},     {"state_hi", s.state_hi},
       {"action_lo", s.action_lo},   {"action_hi", s.action_hi},
       {"gamma", s.gamma},           {"max_episode_steps", s.max_episode_steps}};
}

inline void from_json(const nlohmann::json& j, EnvSpec& s) {
  j.at("state_dim").get_to(s.state_dim);
  j.at("action_dim").get_to(s.action_dim);
  j.at("state_lo").get_to(s.state_lo);
  j.at("state_hi").get_to(s.state_hi);
  j.at("action_lo").get_to(s.action_lo);
  j.at("action_hi").get_to(s.action_hi);
  j.at("gamma").get_to(s.gamma);
  j.at("max_episode_steps").get_to(s.max_episode_steps);
}

struct EnvState {
  Vec x;
  std::size_t steps = 0;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
};

// Deterministic-dynamics environment. step() is a pure function of
// (state, action); instances hold only static parameters plus a clamp
// warning counter, so clones can roll out concurrently.
class EnvBase {
public:
  virtual ~EnvBase() = default;

  virtual const std::string& name() const = 0;
  virtual const EnvSpec& spec() const = 0;

  virtual EnvState reset(SeededRng& rng) const = 0;
  virtual StepResult step(const EnvState& state, std::span<const double> action) const = 0;

  // Reward model as a function of state alone.
  virtual double reward(std::span<const double> state) const = 0;

  // Scripted reference controller used for expert datasets and score
  // normalization.
  virtual Vec expert_action(const EnvState& state) const = 0;

  virtual std::unique_ptr<EnvBase> clone() const = 0;

  std::uint64_t clamp_warning_count() const { return clamp_warnings_; }

protected:
  // Shared by implementations: clamp an action into bounds, counting
  // violations; NaN actions are an error.
  Vec sanitize_action(std::span<const double> action) const {
    const EnvSpec& sp = spec();
    if (action.size() != sp.action_dim)
      throw ConfigError(name() + ": action has dimension " +
                        std::to_string(action.size()) + ", expected " +
                        std::to_string(sp.action_dim));
    if (!all_finite(action))
      throw NumericError(name() + ": non-finite action");
    Vec a(action.begin(), action.end());
    bool clamped = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double c = std::min(std::max(a[i], sp.action_lo[i]), sp.action_hi[i]);
      if (c != a[i]) clamped = true;
      a[i] = c;
    }
    if (clamped) ++clamp_warnings_;
    return a;
  }

  mutable std::uint64_t clamp_warnings_ = 0;
};

// Name-keyed environment registry.
using EnvFactory = std::function<std::unique_ptr<EnvBase>()>;

inline std::map<std::string, EnvFactory>& env_registry() {
  static std::map<std::string, EnvFactory> reg;
  return reg;
}

inline std::unique_ptr<EnvBase> make_env(const std::string& name) {
  auto& reg = env_registry();
  auto it = reg.find(name);
  if (it == reg.end()) {
    std::string known;
    for (const auto& [k, _] : reg) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown environment '" + name + "' (known: " + known + ")");
  }
  return it->second();
}

}  // namespace s4rl
