#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "s4rl/common.hpp"
#include "s4rl/net.hpp"

namespace s4rl {

// Adam accumulators for one parameter vector.
struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;

  static AdamState for_params(std::size_t n, double lr = 3e-4) {
    AdamState s;
    s.lr = lr;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
  }
};

// Standard Adam update with bias correction. Throws NumericError on a
// non-finite gradient; `who` names the parameter block in the diagnostic.
inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& state, const std::string& who = "params") {
  require(params.size() == grads.size() && params.size() == state.m.size() &&
              params.size() == state.v.size(),
          "adam_step: shape mismatch for " + who);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i]))
      throw NumericError("adam_step: non-finite gradient in " + who +
                         " at parameter " + std::to_string(i));
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

// Net-aware variant: on a bad gradient the diagnostic names the layer.
inline void adam_step(DenseNet& net, std::span<const double> grads,
                      AdamState& state, const std::string& who = "net") {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i]))
      throw NumericError("adam_step: non-finite gradient in " + who +
                         " layer " + std::to_string(net.layer_of_param(i)));
  }
  adam_step(std::span<double>(net.params()), grads, state, who);
}

}  // namespace s4rl
