#pragma once

// Minimal dense scalar network shared by the risk predictor and the critic
// members: input -> optional tanh hidden layer -> linear output. Parameters
// live in a single flat vector, which keeps checkpointing and
// finite-difference gradient checks trivial. hidden_dim == 0 selects a plain
// linear map, used for tabular instantiations.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "riskgate/rng.hpp"

namespace riskgate {

class ScalarNet {
 public:
  ScalarNet() = default;

  // Zero-initialized by default; call init_random for trained models.
  // use_bias = false is only valid for the linear mode and yields a pure
  // weight table over the input coordinates.
  ScalarNet(int in_dim, int hidden_dim, bool use_bias = true)
      : in_(in_dim), hidden_(hidden_dim), bias_(use_bias),
        params_(param_count(in_dim, hidden_dim, use_bias), 0.0) {
    if (in_dim < 1 || hidden_dim < 0) throw std::invalid_argument("ScalarNet: bad dimensions");
    if (!use_bias && hidden_dim > 0) throw std::invalid_argument("ScalarNet: bias-free mode is linear only");
  }

  static std::size_t param_count(int in, int hidden, bool use_bias = true) {
    return hidden > 0 ? static_cast<std::size_t>(hidden) * in + hidden + hidden + 1
                      : static_cast<std::size_t>(in) + (use_bias ? 1 : 0);
  }

  void init_random(Rng& rng) {
    if (hidden_ > 0) {
      const double r1 = 1.0 / std::sqrt(static_cast<double>(in_));
      const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
      std::size_t k = 0;
      for (int j = 0; j < hidden_ * in_; ++j) params_[k++] = rng.uniform(-r1, r1);
      for (int j = 0; j < hidden_; ++j) params_[k++] = 0.0;  // b1
      for (int j = 0; j < hidden_; ++j) params_[k++] = rng.uniform(-r2, r2);
      params_[k] = 0.0;  // b2
    } else {
      const double r = 1.0 / std::sqrt(static_cast<double>(in_));
      for (int j = 0; j < in_; ++j) params_[static_cast<std::size_t>(j)] = rng.uniform(-r, r);
      if (bias_) params_.back() = 0.0;
    }
  }

  double forward(std::span<const double> x) const {
    check_input(x);
    if (hidden_ == 0) {
      double y = bias_ ? params_[static_cast<std::size_t>(in_)] : 0.0;
      for (int i = 0; i < in_; ++i) y += params_[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      return y;
    }
    const double* w1 = params_.data();
    const double* b1 = w1 + static_cast<std::size_t>(hidden_) * in_;
    const double* w2 = b1 + hidden_;
    const double b2 = w2[hidden_];
    double y = b2;
    for (int j = 0; j < hidden_; ++j) {
      double z = b1[j];
      const double* row = w1 + static_cast<std::size_t>(j) * in_;
      for (int i = 0; i < in_; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
      y += w2[j] * std::tanh(z);
    }
    return y;
  }

  // Forward pass that also accumulates dLoss/dParam into `grad` given the
  // upstream dLoss/dOutput. Returns the output.
  double forward_backward(std::span<const double> x, double d_out, std::vector<double>& grad) const {
    check_input(x);
    if (grad.size() != params_.size()) throw std::invalid_argument("ScalarNet: grad buffer size mismatch");
    if (hidden_ == 0) {
      double y = bias_ ? params_[static_cast<std::size_t>(in_)] : 0.0;
      for (int i = 0; i < in_; ++i) {
        y += params_[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        grad[static_cast<std::size_t>(i)] += d_out * x[static_cast<std::size_t>(i)];
      }
      if (bias_) grad[static_cast<std::size_t>(in_)] += d_out;
      return y;
    }
    const double* w1 = params_.data();
    const double* b1 = w1 + static_cast<std::size_t>(hidden_) * in_;
    const double* w2 = b1 + hidden_;
    const double b2 = w2[hidden_];
    const std::size_t off_b1 = static_cast<std::size_t>(hidden_) * in_;
    const std::size_t off_w2 = off_b1 + hidden_;
    const std::size_t off_b2 = off_w2 + hidden_;

    double y = b2;
    for (int j = 0; j < hidden_; ++j) {
      double z = b1[j];
      const double* row = w1 + static_cast<std::size_t>(j) * in_;
      for (int i = 0; i < in_; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
      const double h = std::tanh(z);
      y += w2[j] * h;

      grad[off_w2 + static_cast<std::size_t>(j)] += d_out * h;
      const double dz = d_out * w2[j] * (1.0 - h * h);
      grad[off_b1 + static_cast<std::size_t>(j)] += dz;
      double* grow = grad.data() + static_cast<std::size_t>(j) * in_;
      for (int i = 0; i < in_; ++i) grow[i] += dz * x[static_cast<std::size_t>(i)];
    }
    grad[off_b2] += d_out;
    return y;
  }

  // Shared-prefix evaluation: many inputs agree on a leading block and
  // differ only in a few sparse coordinates (e.g. an action one-hot and a
  // trailing risk scalar). forward_partial folds the shared block once;
  // forward_completed applies the per-candidate deltas.
  struct Partial {
    std::vector<double> z;  // hidden pre-activations (hidden mode)
    double acc = 0.0;       // accumulated output (linear mode)
  };

  Partial forward_partial(std::span<const double> prefix) const {
    if (static_cast<int>(prefix.size()) > in_) throw std::invalid_argument("ScalarNet: prefix too long");
    Partial p;
    if (hidden_ == 0) {
      p.acc = bias_ ? params_[static_cast<std::size_t>(in_)] : 0.0;
      for (std::size_t i = 0; i < prefix.size(); ++i) p.acc += params_[i] * prefix[i];
      return p;
    }
    const double* w1 = params_.data();
    const double* b1 = w1 + static_cast<std::size_t>(hidden_) * in_;
    p.z.resize(static_cast<std::size_t>(hidden_));
    for (int j = 0; j < hidden_; ++j) {
      double z = b1[j];
      const double* row = w1 + static_cast<std::size_t>(j) * in_;
      for (std::size_t i = 0; i < prefix.size(); ++i) z += row[i] * prefix[i];
      p.z[static_cast<std::size_t>(j)] = z;
    }
    return p;
  }

  double forward_completed(const Partial& p, std::span<const std::pair<int, double>> deltas) const {
    if (hidden_ == 0) {
      double y = p.acc;
      for (const auto& [idx, val] : deltas) y += params_[static_cast<std::size_t>(idx)] * val;
      return y;
    }
    const double* w1 = params_.data();
    const double* w2 = params_.data() + static_cast<std::size_t>(hidden_) * in_ + hidden_;
    const double b2 = w2[hidden_];
    double y = b2;
    for (int j = 0; j < hidden_; ++j) {
      double z = p.z[static_cast<std::size_t>(j)];
      const double* row = w1 + static_cast<std::size_t>(j) * in_;
      for (const auto& [idx, val] : deltas) z += row[idx] * val;
      y += w2[j] * std::tanh(z);
    }
    return y;
  }

  void apply_step(const std::vector<double>& grad, double lr, double scale) {
    if (grad.size() != params_.size()) throw std::invalid_argument("ScalarNet: grad buffer size mismatch");
    const double f = lr * scale;
    for (std::size_t k = 0; k < params_.size(); ++k) params_[k] -= f * grad[k];
  }

  bool params_finite() const {
    for (double p : params_)
      if (!std::isfinite(p)) return false;
    return true;
  }

  int in_dim() const { return in_; }
  int hidden_dim() const { return hidden_; }
  bool has_bias() const { return bias_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  void check_input(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != in_) throw std::invalid_argument("ScalarNet: input dimension mismatch");
  }

  int in_ = 0;
  int hidden_ = 0;
  bool bias_ = true;
  // layout: hidden > 0: [w1 (hidden*in, row-major) | b1 (hidden) | w2 (hidden) | b2]
  //         hidden == 0: [w (in) | b]
  std::vector<double> params_;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace riskgate
