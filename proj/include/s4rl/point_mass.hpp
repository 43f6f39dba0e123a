#pragma once

#include <cmath>
#include <memory>

#include "s4rl/env.hpp"

namespace s4rl {

// Damped double integrator on the plane. State [px, py, vx, vy], action a
// 2-D force in [-1,1]^2. Reward exp(-|p - goal|^2 / tau) in (0, 1], smooth
// in the state by construction.
class PointMass2D final : public EnvBase {
public:
  static constexpr double kDt = 0.05;
  static constexpr double kDamping = 0.10;
  static constexpr double kTau = 2.0;
  static constexpr double kGoalX = 1.0;
  static constexpr double kGoalY = 1.0;
  static constexpr double kInitBox = 0.2;
  static constexpr double kInitVel = 0.05;

  PointMass2D() {
    spec_.state_dim = 4;
    spec_.action_dim = 2;
    spec_.state_lo = {-2.0, -2.0, -2.0, -2.0};
    spec_.state_hi = {2.0, 2.0, 2.0, 2.0};
    spec_.action_lo = {-1.0, -1.0};
    spec_.action_hi = {1.0, 1.0};
    spec_.gamma = 0.99;
    spec_.max_episode_steps = 200;
  }

  const std::string& name() const override {
    static const std::string n = "pointmass2d";
    return n;
  }
  const EnvSpec& spec() const override { return spec_; }

  EnvState reset(SeededRng& rng) const override {
    EnvState s;
    s.x = {rng.uniform(-kInitBox, kInitBox), rng.uniform(-kInitBox, kInitBox),
           rng.uniform(-kInitVel, kInitVel), rng.uniform(-kInitVel, kInitVel)};
    s.steps = 0;
    return s;
  }

  // Initial-state box of reset(), in observation coordinates.
  static Vec init_lo() { return {-kInitBox, -kInitBox, -kInitVel, -kInitVel}; }
  static Vec init_hi() { return {kInitBox, kInitBox, kInitVel, kInitVel}; }

  double reward(std::span<const double> s) const override {
    const double dx = s[0] - kGoalX;
    const double dy = s[1] - kGoalY;
    return std::exp(-(dx * dx + dy * dy) / kTau);
  }

  StepResult step(const EnvState& state, std::span<const double> action) const override {
    const Vec a = sanitize_action(action);
    const double r = reward(state.x);
    // Semi-implicit Euler with velocity damping.
    Vec next(4);
    next[2] = (1.0 - kDamping * kDt) * state.x[2] + kDt * a[0];
    next[3] = (1.0 - kDamping * kDt) * state.x[3] + kDt * a[1];
    next[0] = state.x[0] + kDt * next[2];
    next[1] = state.x[1] + kDt * next[3];
    StepResult out;
    out.state.x = spec_.clamp_state(std::move(next));
    out.state.steps = state.steps + 1;
    out.reward = r;
    out.done = out.state.steps >= spec_.max_episode_steps;
    return out;
  }

  Vec expert_action(const EnvState& state) const override {
    // PD controller toward the goal.
    const double kp = 2.0, kd = 1.6;
    Vec a = {kp * (kGoalX - state.x[0]) - kd * state.x[2],
             kp * (kGoalY - state.x[1]) - kd * state.x[3]};
    for (double& v : a) v = std::min(std::max(v, -1.0), 1.0);
    return a;
  }

  std::unique_ptr<EnvBase> clone() const override {
    return std::make_unique<PointMass2D>(*this);
  }

private:
  EnvSpec spec_;
};

}  // namespace s4rl
