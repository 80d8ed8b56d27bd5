#pragma once

// Action-conditioned near-term hazard predictor: a one-hidden-layer sigmoid
// regressor over (proxy features, action one-hot), trained online with
// binary cross-entropy on violation labels.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "riskgate/core.hpp"
#include "riskgate/net.hpp"
#include "riskgate/rng.hpp"

namespace riskgate {

struct HazardLabel {
  std::vector<double> window_features;
  int action = 0;
  bool violated = false;
  // True when the episode ended before the full horizon could be observed;
  // the label then reflects the available lookahead only.
  bool partial = false;
};

class RiskModel {
 public:
  RiskModel() = default;
  RiskModel(int feature_dim, int action_count, int hidden_dim = 32, double learning_rate = 0.01)
      : feat_dim_(feature_dim),
        n_actions_(action_count),
        lr_(learning_rate),
        net_(feature_dim + action_count, hidden_dim) {
    if (feature_dim < 1 || action_count < 1) throw std::invalid_argument("RiskModel: bad dimensions");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("RiskModel: learning_rate must be > 0");
  }

  void init_random(Rng& rng) { net_.init_random(rng); }

  double predict(std::span<const double> features, int action) const {
    std::vector<double> x;
    assemble(features, action, x);
    return sigmoid(net_.forward(x));
  }

  double predict(const ProxyState& state, int action) const {
    return predict(std::span<const double>(state.features), action);
  }

  RiskVector predict_all(const ProxyState& state) const {
    return predict_all(std::span<const double>(state.features));
  }

  RiskVector predict_all(std::span<const double> features) const {
    if (static_cast<int>(features.size()) != feat_dim_)
      throw std::invalid_argument("RiskModel: feature dimension mismatch");
    RiskVector out;
    out.values.resize(static_cast<std::size_t>(n_actions_));
    const auto partial = net_.forward_partial(features);  // actions share the feature prefix
    for (int a = 0; a < n_actions_; ++a) {
      const std::pair<int, double> delta[1] = {{feat_dim_ + a, 1.0}};
      out.values[static_cast<std::size_t>(a)] = sigmoid(net_.forward_completed(partial, delta));
    }
    return out;
  }

  // One SGD step on mean binary cross-entropy over the batch. Returns the
  // pre-step loss, or nullopt for an empty batch (distinct no-op signal).
  std::optional<double> update(std::span<const HazardLabel> batch) {
    if (batch.empty()) return std::nullopt;
    grad_.assign(net_.params().size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<double> x;
    for (const auto& lbl : batch) {
      assemble(lbl.window_features, lbl.action, x);
      const double y = lbl.violated ? 1.0 : 0.0;
      // dL/dz for sigmoid + BCE is (p - y); run the forward pass first to get p.
      const double p = sigmoid(net_.forward(x));
      net_.forward_backward(x, (p - y) * inv_n, grad_);
      const double pc = std::min(1.0 - 1e-12, std::max(1e-12, p));
      loss -= (y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc)) * inv_n;
    }
    net_.apply_step(grad_, lr_, 1.0);
    if (!net_.params_finite()) throw std::runtime_error("RiskModel: parameters became non-finite");
    updates_seen_ += 1;
    return loss;
  }

  int feature_dim() const { return feat_dim_; }
  int action_count() const { return n_actions_; }
  double learning_rate() const { return lr_; }
  std::uint64_t updates_seen() const { return updates_seen_; }
  void set_updates_seen(std::uint64_t n) { updates_seen_ = n; }
  ScalarNet& net() { return net_; }
  const ScalarNet& net() const { return net_; }

 private:
  void assemble(std::span<const double> features, int action, std::vector<double>& x) const {
    if (static_cast<int>(features.size()) != feat_dim_)
      throw std::invalid_argument("RiskModel: feature dimension mismatch");
    if (action < 0 || action >= n_actions_) throw std::invalid_argument("RiskModel: action index out of range");
    x.assign(static_cast<std::size_t>(feat_dim_ + n_actions_), 0.0);
    for (int i = 0; i < feat_dim_; ++i) x[static_cast<std::size_t>(i)] = features[static_cast<std::size_t>(i)];
    x[static_cast<std::size_t>(feat_dim_ + action)] = 1.0;
  }

  int feat_dim_ = 0;
  int n_actions_ = 0;
  double lr_ = 0.01;
  std::uint64_t updates_seen_ = 0;
  ScalarNet net_;
  std::vector<double> grad_;
};

// ---------------------------------------------------------------------------
// Hazard labeling.
//
// Sample-time convention: `violation[k]` is the violation flag of sample k of
// a trace of length N. The label for step t covers (t, t+h]: it is true iff a
// violation occurs at any sample in t+1 .. t+h. Steps t <= N-2 are labeled;
// the final step has no lookahead and is dropped. A label whose horizon runs
// past the end of the trace uses the available lookahead and carries the
// partial flag.

struct LabeledStep {
  int step = 0;
  bool violated = false;
  bool partial = false;
};

inline std::vector<LabeledStep> label_steps(std::span<const char> violation, int horizon) {
  if (horizon < 1) throw std::invalid_argument("label_steps: horizon must be >= 1");
  std::vector<LabeledStep> out;
  const int n = static_cast<int>(violation.size());
  for (int t = 0; t + 1 < n; ++t) {
    LabeledStep ls;
    ls.step = t;
    const int last = std::min(t + horizon, n - 1);
    for (int k = t + 1; k <= last; ++k) {
      if (violation[static_cast<std::size_t>(k)]) {
        ls.violated = true;
        break;
      }
    }
    ls.partial = (t + horizon > n - 1);
    out.push_back(ls);
  }
  return out;
}

// Convenience for scalar traces with a violation predicate, e.g. a glucose
// trace with pred = G < g_low.
template <class Pred>
std::vector<LabeledStep> label_trace(std::span<const double> trace, int horizon, Pred&& pred) {
  std::vector<char> flags(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) flags[i] = pred(trace[i]) ? 1 : 0;
  return label_steps(flags, horizon);
}

// Full labeling of per-step (features, action) records against a violation
// trace of the same length.
inline std::vector<HazardLabel> label_transitions(const std::vector<std::vector<double>>& step_features,
                                                  std::span<const int> step_actions,
                                                  std::span<const char> violation, int horizon) {
  if (step_features.size() != step_actions.size() || step_features.size() != violation.size())
    throw std::invalid_argument("label_transitions: series length mismatch");
  std::vector<HazardLabel> out;
  for (const auto& ls : label_steps(violation, horizon)) {
    HazardLabel lbl;
    lbl.window_features = step_features[static_cast<std::size_t>(ls.step)];
    lbl.action = step_actions[static_cast<std::size_t>(ls.step)];
    lbl.violated = ls.violated;
    lbl.partial = ls.partial;
    out.push_back(std::move(lbl));
  }
  return out;
}

}  // namespace riskgate
