#pragma once

#include <algorithm>

#include "s4rl/env.hpp"
#include "s4rl/net.hpp"
#include "s4rl/rng.hpp"

namespace s4rl {

// Evaluates a state-action critic; the concat buffer is caller-provided so
// hot loops stay allocation-free.
inline double q_eval(const DenseNet& q, std::span<const double> s,
                     std::span<const double> a, Vec& concat_buf,
                     Tape* tape = nullptr) {
  concat_buf.resize(s.size() + a.size());
  std::copy(s.begin(), s.end(), concat_buf.begin());
  std::copy(a.begin(), a.end(), concat_buf.begin() + s.size());
  double out;
  q.forward(concat_buf, std::span<double>(&out, 1), tape);
  return out;
}

// Two independent critics plus Polyak-averaged target copies.
struct TwinQ {
  DenseNet q1, q2;
  DenseNet target1, target2;
  double tau_polyak = 0.005;

  TwinQ() = default;

  TwinQ(const EnvSpec& spec, const std::vector<std::size_t>& hidden,
        double tau, SeededRng& rng)
      : tau_polyak(tau) {
    std::vector<std::size_t> widths;
    widths.push_back(spec.state_dim + spec.action_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    std::vector<Act> acts(hidden.size(), Act::Relu);
    q1 = DenseNet(widths, acts, rng);
    q2 = DenseNet(widths, acts, rng);
    target1 = q1;
    target2 = q2;
  }

  // target <- tau * online + (1 - tau) * target, exactly.
  void polyak_update() {
    auto blend = [this](const DenseNet& online, DenseNet& target) {
      const auto& p = online.params();
      auto& t = target.params();
      for (std::size_t i = 0; i < p.size(); ++i)
        t[i] = tau_polyak * p[i] + (1.0 - tau_polyak) * t[i];
    };
    blend(q1, target1);
    blend(q2, target2);
  }
};

}  // namespace s4rl
