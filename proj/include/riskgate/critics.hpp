#pragma once

// Ensemble of M action-value approximators trained by temporal-difference
// learning on shaped rewards. Each member maps (proxy features, action
// one-hot, predicted risk) to a scalar Q and keeps a periodically synced
// target copy for bootstrapping. Diversity comes from per-member random
// initialization plus bootstrap masking of training batches.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "riskgate/core.hpp"
#include "riskgate/net.hpp"
#include "riskgate/rng.hpp"
#include "riskgate/transition.hpp"

namespace riskgate {

struct CriticConfig {
  int members = 5;
  int hidden_dim = 64;  // 0 selects a plain linear member (tabular use)
  double learning_rate = 5e-3;
  int sync_interval = 500;           // td_update calls between target syncs; 0 = manual only
  double bootstrap_mask_prob = 0.5;  // per-(member, transition) inclusion probability
  bool gate_bootstrap = false;       // bootstrap through the gated value instead of the safe max
  double reward_clip = 1.0;          // shaped rewards clipped to [-clip, clip] in targets
  // Tabular instantiation: members become bias-free linear maps over the
  // joint (feature x action) one-hot product, i.e. an exact Q table when the
  // features are one-hot. The risk input is not appended in this mode.
  bool tabular_joint_encoding = false;
};

class CriticEnsemble {
 public:
  CriticEnsemble() = default;

  CriticEnsemble(int feature_dim, int action_count, const CriticConfig& cfg, std::uint64_t seed,
                 bool random_init = true)
      : feat_dim_(feature_dim), n_actions_(action_count), cfg_(cfg), mask_rng_(Rng::derive(seed, 900)) {
    if (feature_dim < 1 || action_count < 1) throw std::invalid_argument("CriticEnsemble: bad dimensions");
    if (cfg.members < 1) throw std::invalid_argument("CriticEnsemble: need at least one member");
    if (cfg_.tabular_joint_encoding && cfg_.hidden_dim != 0)
      throw std::invalid_argument("CriticEnsemble: tabular_joint_encoding requires hidden_dim == 0");
    const int in_dim = cfg_.tabular_joint_encoding ? feature_dim * action_count
                                                   : feature_dim + action_count + 1;
    members_.reserve(static_cast<std::size_t>(cfg.members));
    for (int m = 0; m < cfg.members; ++m) {
      ScalarNet net(in_dim, cfg.hidden_dim, !cfg_.tabular_joint_encoding);
      if (random_init) {
        Rng r(Rng::derive(seed, static_cast<std::uint64_t>(m)));
        net.init_random(r);
      }
      members_.push_back(net);
    }
    targets_ = members_;
  }

  // M x |A| matrix of member Q values; the action's predicted risk is
  // appended to each member input.
  std::vector<std::vector<double>> q_values(std::span<const double> features, const RiskVector& risks) const {
    check_dims(features, risks);
    std::vector<std::vector<double>> out(members_.size(), std::vector<double>(static_cast<std::size_t>(n_actions_)));
    if (!cfg_.tabular_joint_encoding) {
      // actions share the feature prefix; fold it once per member
      for (std::size_t m = 0; m < members_.size(); ++m) {
        const auto partial = members_[m].forward_partial(features);
        for (int a = 0; a < n_actions_; ++a) {
          const std::pair<int, double> deltas[2] = {
              {feat_dim_ + a, 1.0}, {feat_dim_ + n_actions_, risks[static_cast<std::size_t>(a)]}};
          out[m][static_cast<std::size_t>(a)] = members_[m].forward_completed(partial, deltas);
        }
      }
      return out;
    }
    std::vector<double> x;
    for (std::size_t m = 0; m < members_.size(); ++m) {
      for (int a = 0; a < n_actions_; ++a) {
        assemble(features, a, risks[static_cast<std::size_t>(a)], x);
        out[m][static_cast<std::size_t>(a)] = members_[m].forward(x);
      }
    }
    return out;
  }

  double member_value(std::size_t m, std::span<const double> features, int action, double rho) const {
    std::vector<double> x;
    assemble(features, action, rho, x);
    return members_.at(m).forward(x);
  }

  // One TD step per member on its bootstrap subsample of the batch. The
  // bootstrap target restricts the greedy step to the next safe action set
  // and falls back to the minimum-risk action when that set is empty,
  // mirroring decision-time selection. Returns the mean squared TD error
  // before the step, or nullopt for an empty batch.
  std::optional<double> td_update(std::span<const Transition> batch, const GateConfig& gate) {
    if (batch.empty()) return std::nullopt;
    const double beta = gate.discount;

    // Masks drawn up front so the draw count is independent of batch content.
    mask_.assign(members_.size() * batch.size(), 1);
    if (members_.size() > 1 && cfg_.bootstrap_mask_prob < 1.0) {
      for (auto& b : mask_) b = mask_rng_.bernoulli(cfg_.bootstrap_mask_prob) ? 1 : 0;
    }

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::vector<double> x;
    for (std::size_t m = 0; m < members_.size(); ++m) {
      grad_.assign(members_[m].params().size(), 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < batch.size(); ++i)
        if (mask_[m * batch.size() + i]) ++count;
      if (count == 0) continue;

      double member_loss = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!mask_[m * batch.size() + i]) continue;
        const Transition& t = batch[i];
        const double r = std::clamp(t.shaped_reward, -cfg_.reward_clip, cfg_.reward_clip);
        const double y = r + (t.terminal ? 0.0 : beta * bootstrap_value(m, t, gate.r_max));
        assemble(t.proxy_features, t.action, t.predicted_risk_at_selection, x);
        const double pred = members_[m].forward(x);
        members_[m].forward_backward(x, (pred - y) / static_cast<double>(count), grad_);
        member_loss += (pred - y) * (pred - y);
      }
      members_[m].apply_step(grad_, cfg_.learning_rate, 1.0);
      if (!members_[m].params_finite()) throw std::runtime_error("CriticEnsemble: parameters became non-finite");
      loss_sum += member_loss / static_cast<double>(count);
      ++loss_count;
    }

    ++updates_;
    if (cfg_.sync_interval > 0 && updates_ % static_cast<std::uint64_t>(cfg_.sync_interval) == 0) sync_targets();
    return loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
  }

  // Target members become exact copies of the online members. Idempotent.
  void sync_targets() { targets_ = members_; }

  int member_count() const { return static_cast<int>(members_.size()); }
  int action_count() const { return n_actions_; }
  int feature_dim() const { return feat_dim_; }
  const CriticConfig& config() const { return cfg_; }
  std::uint64_t update_count() const { return updates_; }
  void set_update_count(std::uint64_t n) { updates_ = n; }

  ScalarNet& member(std::size_t m) { return members_.at(m); }
  const ScalarNet& member(std::size_t m) const { return members_.at(m); }
  ScalarNet& target(std::size_t m) { return targets_.at(m); }
  const ScalarNet& target(std::size_t m) const { return targets_.at(m); }

 private:
  void check_dims(std::span<const double> features, const RiskVector& risks) const {
    if (static_cast<int>(features.size()) != feat_dim_)
      throw std::invalid_argument("CriticEnsemble: feature dimension mismatch");
    if (static_cast<int>(risks.size()) != n_actions_)
      throw std::invalid_argument("CriticEnsemble: risk vector size mismatch");
  }

  void assemble(std::span<const double> features, int action, double rho, std::vector<double>& x) const {
    if (static_cast<int>(features.size()) != feat_dim_)
      throw std::invalid_argument("CriticEnsemble: feature dimension mismatch");
    if (action < 0 || action >= n_actions_) throw std::invalid_argument("CriticEnsemble: action out of range");
    if (cfg_.tabular_joint_encoding) {
      x.assign(static_cast<std::size_t>(feat_dim_) * n_actions_, 0.0);
      for (int i = 0; i < feat_dim_; ++i)
        x[static_cast<std::size_t>(i) * n_actions_ + static_cast<std::size_t>(action)] =
            features[static_cast<std::size_t>(i)];
      return;
    }
    x.assign(static_cast<std::size_t>(feat_dim_ + n_actions_ + 1), 0.0);
    for (int i = 0; i < feat_dim_; ++i) x[static_cast<std::size_t>(i)] = features[static_cast<std::size_t>(i)];
    x[static_cast<std::size_t>(feat_dim_ + action)] = 1.0;
    x.back() = rho;
  }

  double bootstrap_value(std::size_t m, const Transition& t, double r_max) const {
    if (static_cast<int>(t.next_risk_vector.size()) != n_actions_)
      throw std::invalid_argument("CriticEnsemble: transition next risk size mismatch");

    if (cfg_.gate_bootstrap) {
      // Gated variant: mix target-ensemble envelopes by next-step risk, then
      // take the safe-restricted max of the gated values.
      std::vector<std::vector<double>> q(targets_.size(),
                                         std::vector<double>(static_cast<std::size_t>(n_actions_)));
      std::vector<double> x;
      for (std::size_t k = 0; k < targets_.size(); ++k) {
        for (int a = 0; a < n_actions_; ++a) {
          assemble(t.next_proxy_features, a, t.next_risk_vector[static_cast<std::size_t>(a)], x);
          q[k][static_cast<std::size_t>(a)] = targets_[k].forward(x);
        }
      }
      const GateValues gv = gate_values(q, t.next_risk_vector);
      const Selection sel = select_action(gv.q_gate, t.next_risk_vector, r_max);
      return gv.q_gate[static_cast<std::size_t>(sel.action)];
    }

    const auto q_at = [&](int a) {
      if (!cfg_.tabular_joint_encoding) {
        const std::pair<int, double> deltas[2] = {
            {feat_dim_ + a, 1.0}, {feat_dim_ + n_actions_, t.next_risk_vector[static_cast<std::size_t>(a)]}};
        return targets_[m].forward_completed(boot_partial_, deltas);
      }
      std::vector<double> x;
      assemble(t.next_proxy_features, a, t.next_risk_vector[static_cast<std::size_t>(a)], x);
      return targets_[m].forward(x);
    };
    if (!cfg_.tabular_joint_encoding) boot_partial_ = targets_[m].forward_partial(t.next_proxy_features);

    int best = -1;
    double best_q = 0.0;
    for (int a = 0; a < n_actions_; ++a) {
      if (detail::clamp01(t.next_risk_vector[static_cast<std::size_t>(a)]) > r_max) continue;
      const double q = q_at(a);
      if (best < 0 || q > best_q) {
        best = a;
        best_q = q;
      }
    }
    if (best >= 0) return best_q;

    int arg = 0;
    for (int a = 1; a < n_actions_; ++a) {
      if (t.next_risk_vector[static_cast<std::size_t>(a)] <
          t.next_risk_vector[static_cast<std::size_t>(arg)])
        arg = a;
    }
    return q_at(arg);
  }

  int feat_dim_ = 0;
  int n_actions_ = 0;
  CriticConfig cfg_;
  std::vector<ScalarNet> members_;
  std::vector<ScalarNet> targets_;
  mutable Rng mask_rng_{0};
  std::uint64_t updates_ = 0;
  std::vector<double> grad_;
  std::vector<char> mask_;
  mutable ScalarNet::Partial boot_partial_;
};

}  // namespace riskgate
