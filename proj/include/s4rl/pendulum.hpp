#pragma once

#include <cmath>
#include <memory>
#include <numbers>

#include "s4rl/env.hpp"

namespace s4rl {

// Torque-limited pendulum swing-up. State [cos th, sin th, thdot] with
// th = 0 upright; the torque is too weak to lift directly, so the task
// needs energy pumping. Reward exp(-(k1 (1 - cos th) + k2 thdot^2)) is
// smooth in the observation and peaks at 1 when balanced upright.
class Pendulum final : public EnvBase {
public:
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kAngleCost = 0.5;
  static constexpr double kSpeedCost = 0.02;
  static constexpr double kInitSpeedSpread = 1.0;

  Pendulum() {
    spec_.state_dim = 3;
    spec_.action_dim = 1;
    spec_.state_lo = {-1.0, -1.0, -kMaxSpeed};
    spec_.state_hi = {1.0, 1.0, kMaxSpeed};
    spec_.action_lo = {-1.0};
    spec_.action_hi = {1.0};
    spec_.gamma = 0.99;
    spec_.max_episode_steps = 200;
  }

  const std::string& name() const override {
    static const std::string n = "pendulum";
    return n;
  }
  const EnvSpec& spec() const override { return spec_; }

  // Episodes start anywhere on the circle with a small spin, so both the
  // balance and the pump-up regimes appear in rollouts.
  EnvState reset(SeededRng& rng) const override {
    const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double thdot = rng.uniform(-kInitSpeedSpread, kInitSpeedSpread);
    EnvState s;
    s.x = {std::cos(th), std::sin(th), thdot};
    s.steps = 0;
    return s;
  }

  double reward(std::span<const double> s) const override {
    return std::exp(-(kAngleCost * (1.0 - s[0]) + kSpeedCost * s[2] * s[2]));
  }

  StepResult step(const EnvState& state, std::span<const double> action) const override {
    const Vec a = sanitize_action(action);
    const double r = reward(state.x);
    const double th = std::atan2(state.x[1], state.x[0]);
    const double thdot = state.x[2];
    const double torque = kMaxTorque * a[0];
    const double acc = 3.0 * kGravity / (2.0 * kLength) * std::sin(th) +
                       3.0 / (kMass * kLength * kLength) * torque;
    double thdot_next = thdot + acc * kDt;
    thdot_next = std::min(std::max(thdot_next, -kMaxSpeed), kMaxSpeed);
    const double th_next = th + thdot_next * kDt;
    StepResult out;
    out.state.x = {std::cos(th_next), std::sin(th_next), thdot_next};
    out.state.steps = state.steps + 1;
    out.reward = r;
    out.done = out.state.steps >= spec_.max_episode_steps;
    return out;
  }

  Vec expert_action(const EnvState& state) const override {
    // Energy-shaping swing-up, PD balance near the top.
    const double th = std::atan2(state.x[1], state.x[0]);
    const double thdot = state.x[2];
    const double inertia = kMass * kLength * kLength / 3.0;
    const double energy = 0.5 * inertia * thdot * thdot +
                          kMass * kGravity * (kLength / 2.0) * std::cos(th);
    const double energy_up = kMass * kGravity * kLength / 2.0;
    double torque;
    if (std::abs(th) < 0.35 && std::abs(thdot) < 2.5) {
      torque = -14.0 * th - 4.0 * thdot;
    } else {
      const double deficit = energy_up - energy;
      torque = 1.6 * deficit * (thdot >= 0.0 ? 1.0 : -1.0);
      if (std::abs(thdot) < 1e-3 && std::abs(std::sin(th)) < 1e-3)
        torque = kMaxTorque;  // kick out of the hanging equilibrium
    }
    double a = torque / kMaxTorque;
    a = std::min(std::max(a, -1.0), 1.0);
    return {a};
  }

  std::unique_ptr<EnvBase> clone() const override {
    return std::make_unique<Pendulum>(*this);
  }

private:
  EnvSpec spec_;
};

}  // namespace s4rl
