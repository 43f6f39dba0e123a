#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "s4rl/common.hpp"
#include "s4rl/rng.hpp"

namespace s4rl {

enum class Act { Tanh, Relu };

inline std::string act_name(Act a) { return a == Act::Tanh ? "tanh" : "relu"; }
inline Act act_from_name(const std::string& s) {
  if (s == "tanh") return Act::Tanh;
  if (s == "relu") return Act::Relu;
  throw ConfigError("unknown activation '" + s + "'");
}

// Per-sample forward record: post-activation of every layer, x[0] = input.
struct Tape {
  std::vector<Vec> x;
};

// Fully-connected network, final layer linear, parameters stored contiguously
// as [W0|b0|W1|b1|...] with W row-major (out x in). All arithmetic in double.
class DenseNet {
public:
  DenseNet() = default;

  DenseNet(std::vector<std::size_t> widths, std::vector<Act> hidden_acts,
           SeededRng& rng)
      : widths_(std::move(widths)), acts_(std::move(hidden_acts)) {
    require(widths_.size() >= 2, "DenseNet needs at least input and output widths");
    require(acts_.size() == widths_.size() - 2,
            "DenseNet needs one activation per hidden layer");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      offsets_.push_back(total);
      total += widths_[l] * widths_[l + 1] + widths_[l + 1];
    }
    params_.resize(total);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
      double* w = params_.data() + offsets_[l];
      const std::size_t n = widths_[l] * widths_[l + 1] + widths_[l + 1];
      for (std::size_t i = 0; i < n; ++i) w[i] = rng.uniform(-bound, bound);
    }
  }

  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  std::size_t layer_count() const { return widths_.size() - 1; }
  const std::vector<std::size_t>& widths() const { return widths_; }
  const std::vector<Act>& hidden_acts() const { return acts_; }

  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::span<double> layer_weights(std::size_t l) {
    return {params_.data() + offsets_[l], widths_[l] * widths_[l + 1]};
  }
  std::span<double> layer_bias(std::size_t l) {
    return {params_.data() + offsets_[l] + widths_[l] * widths_[l + 1],
            widths_[l + 1]};
  }
  std::span<const double> layer_weights(std::size_t l) const {
    return {params_.data() + offsets_[l], widths_[l] * widths_[l + 1]};
  }
  std::span<const double> layer_bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + widths_[l] * widths_[l + 1],
            widths_[l + 1]};
  }

  // Index of the layer owning flat parameter index i, for diagnostics.
  std::size_t layer_of_param(std::size_t i) const {
    std::size_t l = 0;
    while (l + 1 < offsets_.size() && i >= offsets_[l + 1]) ++l;
    return l;
  }

  void forward(std::span<const double> in, std::span<double> out,
               Tape* tape = nullptr) const {
    if (in.size() != input_dim())
      throw ConfigError("forward: input width " + std::to_string(in.size()) +
                        " does not match first layer width " +
                        std::to_string(input_dim()));
    if (tape) {
      tape->x.resize(widths_.size());
      tape->x[0].assign(in.begin(), in.end());
    }
    thread_local Vec buf_a, buf_b;
    Vec& a = buf_a;
    Vec& b = buf_b;
    a.assign(in.begin(), in.end());
    const std::size_t layers = layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t nin = widths_[l], nout = widths_[l + 1];
      b.resize(nout);
      const double* w = params_.data() + offsets_[l];
      const double* bias = w + nin * nout;
      for (std::size_t o = 0; o < nout; ++o) {
        const double* row = w + o * nin;
        double acc = bias[o];
        for (std::size_t i = 0; i < nin; ++i) acc += row[i] * a[i];
        b[o] = acc;
      }
      if (l + 1 < layers) {
        if (acts_[l] == Act::Tanh) {
          for (double& v : b) v = std::tanh(v);
        } else {
          for (double& v : b) v = v > 0.0 ? v : 0.0;
        }
      }
      a.swap(b);
      if (tape) tape->x[l + 1] = a;
    }
    if (out.size() != output_dim())
      throw ConfigError("forward: output buffer width mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i];
    if (!all_finite(out))
      throw NumericError("forward produced a non-finite output");
  }

  Vec forward(const Vec& in, Tape* tape = nullptr) const {
    Vec out(output_dim());
    forward(in, std::span<double>(out), tape);
    return out;
  }

  // Exact reverse-mode pass over a recorded tape. Accumulates parameter
  // gradients into grad_accum (size param_count); optionally returns the
  // gradient with respect to the input.
  void backward(const Tape& tape, std::span<const double> out_grad,
                std::span<double> grad_accum,
                std::span<double> input_grad = {}) const {
    if (tape.x.size() != widths_.size() || tape.x[0].size() != input_dim())
      throw ConfigError("backward: tape does not match a recorded forward");
    if (out_grad.size() != output_dim())
      throw ConfigError("backward: output gradient width mismatch");
    if (grad_accum.size() != params_.size())
      throw ConfigError("backward: gradient buffer size mismatch");

    thread_local Vec gz_buf, ga_buf;
    Vec& gz = gz_buf;
    Vec& ga = ga_buf;
    gz.assign(out_grad.begin(), out_grad.end());
    for (std::size_t li = layer_count(); li-- > 0;) {
      const std::size_t nin = widths_[li], nout = widths_[li + 1];
      if (li + 1 < layer_count()) {
        // gz currently holds the gradient wrt this layer's post-activation.
        const Vec& post = tape.x[li + 1];
        if (acts_[li] == Act::Tanh) {
          for (std::size_t o = 0; o < nout; ++o)
            gz[o] *= (1.0 - post[o] * post[o]);
        } else {
          for (std::size_t o = 0; o < nout; ++o)
            if (post[o] <= 0.0) gz[o] = 0.0;
        }
      }
      const Vec& x = tape.x[li];
      double* dw = grad_accum.data() + offsets_[li];
      double* db = dw + nin * nout;
      for (std::size_t o = 0; o < nout; ++o) {
        const double g = gz[o];
        db[o] += g;
        double* drow = dw + o * nin;
        for (std::size_t i = 0; i < nin; ++i) drow[i] += g * x[i];
      }
      if (li > 0 || !input_grad.empty()) {
        ga.assign(nin, 0.0);
        const double* w = params_.data() + offsets_[li];
        for (std::size_t o = 0; o < nout; ++o) {
          const double g = gz[o];
          const double* row = w + o * nin;
          for (std::size_t i = 0; i < nin; ++i) ga[i] += g * row[i];
        }
        if (li == 0) {
          for (std::size_t i = 0; i < nin; ++i) input_grad[i] += ga[i];
          return;
        }
        gz.swap(ga);
      }
    }
  }

private:
  std::vector<std::size_t> widths_;
  std::vector<Act> acts_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

}  // namespace s4rl
