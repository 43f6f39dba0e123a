#pragma once

#include <cmath>
#include <numbers>

#include "s4rl/env.hpp"
#include "s4rl/net.hpp"
#include "s4rl/rng.hpp"

namespace s4rl {

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Numerically stable log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)).
inline double log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

// Everything the reparameterized draw needs to replay its own gradient.
struct PolicySample {
  Vec action;
  double log_prob = 0.0;
  Vec mean;         // network mean head
  Vec log_std_raw;  // pre-clamp log-std head
  Vec log_std;      // clamped
  Vec eps;          // the standard normal draw
  Vec pre_tanh;     // mean + std * eps
};

// Tanh-squashed Gaussian policy over a symmetric action box. The network
// emits per-action mean and log-std; log-std is clamped to [-20, 2] and the
// log-probability carries the tanh Jacobian correction.
class GaussianPolicy {
public:
  static constexpr double kLogStdMin = -20.0;
  static constexpr double kLogStdMax = 2.0;

  GaussianPolicy() = default;

  GaussianPolicy(const EnvSpec& spec, const std::vector<std::size_t>& hidden,
                 SeededRng& rng) {
    action_scale_.resize(spec.action_dim);
    for (std::size_t d = 0; d < spec.action_dim; ++d) {
      require(spec.action_lo[d] == -spec.action_hi[d] && spec.action_hi[d] > 0,
              "GaussianPolicy needs a symmetric action box");
      action_scale_[d] = spec.action_hi[d];
    }
    std::vector<std::size_t> widths;
    widths.push_back(spec.state_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(2 * spec.action_dim);
    std::vector<Act> acts(hidden.size(), Act::Tanh);
    net_ = DenseNet(widths, acts, rng);
  }

  const DenseNet& net() const { return net_; }
  DenseNet& net() { return net_; }
  std::size_t action_dim() const { return action_scale_.size(); }
  const Vec& action_scale() const { return action_scale_; }

  // Reparameterized draw; record a tape when the caller needs gradients.
  PolicySample sample(std::span<const double> state, SeededRng& rng,
                      Tape* tape = nullptr) const {
    PolicySample ps;
    split_heads(net_.forward(Vec(state.begin(), state.end()), tape), ps);
    const std::size_t n = action_dim();
    ps.eps.resize(n);
    ps.pre_tanh.resize(n);
    ps.action.resize(n);
    for (std::size_t d = 0; d < n; ++d) ps.eps[d] = rng.normal();
    finish_sample(ps);
    return ps;
  }

  // Re-applies a fixed noise vector; used by gradient checks.
  PolicySample sample_with_eps(std::span<const double> state, const Vec& eps,
                               Tape* tape = nullptr) const {
    PolicySample ps;
    split_heads(net_.forward(Vec(state.begin(), state.end()), tape), ps);
    ps.eps = eps;
    ps.pre_tanh.resize(action_dim());
    ps.action.resize(action_dim());
    finish_sample(ps);
    return ps;
  }

  // Deterministic evaluation action: scale * tanh(mean).
  Vec mean_action(std::span<const double> state) const {
    Vec out = net_.forward(Vec(state.begin(), state.end()));
    Vec a(action_dim());
    for (std::size_t d = 0; d < action_dim(); ++d)
      a[d] = action_scale_[d] * std::tanh(out[d]);
    return a;
  }

  // Accumulates d(loss)/d(params) given upstream gradients with respect to
  // the sampled action and the log-probability.
  void backward(const Tape& tape, const PolicySample& ps,
                std::span<const double> dL_daction, double dL_dlogp,
                std::span<double> grad_accum) const {
    const std::size_t n = action_dim();
    Vec head_grad(2 * n, 0.0);
    for (std::size_t d = 0; d < n; ++d) {
      const double t = std::tanh(ps.pre_tanh[d]);
      const double da_du = action_scale_[d] * (1.0 - t * t);
      // d log_prob / d pre_tanh from the Jacobian correction.
      const double dlogp_du = 2.0 * t;
      double dL_du = dL_dlogp * dlogp_du;
      if (!dL_daction.empty()) dL_du += dL_daction[d] * da_du;
      const double sigma = std::exp(ps.log_std[d]);
      double dL_dlogstd = dL_du * sigma * ps.eps[d] - dL_dlogp;
      // Clamp is a hard gate: no gradient outside the active range.
      if (ps.log_std_raw[d] <= kLogStdMin || ps.log_std_raw[d] >= kLogStdMax)
        dL_dlogstd = 0.0;
      head_grad[d] = dL_du;
      head_grad[n + d] = dL_dlogstd;
    }
    net_.backward(tape, head_grad, grad_accum);
  }

private:
  void split_heads(const Vec& out, PolicySample& ps) const {
    const std::size_t n = action_dim();
    ps.mean.assign(out.begin(), out.begin() + n);
    ps.log_std_raw.assign(out.begin() + n, out.end());
    ps.log_std.resize(n);
    for (std::size_t d = 0; d < n; ++d)
      ps.log_std[d] = std::min(std::max(ps.log_std_raw[d], kLogStdMin), kLogStdMax);
  }

  void finish_sample(PolicySample& ps) const {
    const std::size_t n = action_dim();
    double logp = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      const double sigma = std::exp(ps.log_std[d]);
      const double u = ps.mean[d] + sigma * ps.eps[d];
      ps.pre_tanh[d] = u;
      ps.action[d] = action_scale_[d] * std::tanh(u);
      logp += -0.5 * ps.eps[d] * ps.eps[d] - ps.log_std[d] -
              0.5 * std::log(2.0 * std::numbers::pi) -
              std::log(action_scale_[d]) - log_one_minus_tanh_sq(u);
    }
    ps.log_prob = logp;
    if (!std::isfinite(ps.log_prob) || !all_finite(ps.action))
      throw NumericError("policy sample produced non-finite output");
  }

  DenseNet net_;
  Vec action_scale_;
};

}  // namespace s4rl
