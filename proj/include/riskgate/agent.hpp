#pragma once

// The interaction loop binding proxy construction, risk prediction, value
// gating, admissibility filtering, reward shaping, storage and model
// updates, in that order on every environment step. Also hosts the
// glucose-domain rule-based teacher and the hard safety shield.

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgate/core.hpp"
#include "riskgate/critics.hpp"
#include "riskgate/envs/env.hpp"
#include "riskgate/replay.hpp"
#include "riskgate/risk.hpp"
#include "riskgate/rng.hpp"

namespace riskgate {

struct TeacherParams {
  double k_p = 0.02;             // units per mg/dL above target
  double k_meal = 0.3;           // units per (mg/dL/min) of detected rise
  double target = 140.0;         // proportional-term threshold
  double cgm_floor = 100.0;      // no dosing below this reading
  double trend_threshold = 1.0;  // mg/dL/min counted as a meal rise
};

struct ShieldParams {
  double cgm_floor = 90.0;           // always suppress below this
  double trend_cgm_ceiling = 120.0;  // suppress below this when falling fast
  double trend_floor = -1.0;         // mg/dL/min
};

struct AgentConfig {
  GateConfig gate;
  int warmup_steps = 500;
  bool shield_enabled = true;
  int update_every = 1;
  int batch_size = 64;
  int risk_updates_per_step = 1;
  int critic_updates_per_step = 1;
  std::uint64_t seed = 42;
  int risk_horizon = 1;
  double epsilon = 0.0;   // optional exploration, uniform over the safe set
  double pin_risk = -1.0; // >= 0 pins all predicted risks to this constant
  bool random_policy = false;  // uniform-random baseline; shield still applies
  bool include_partial_labels = true;
  TeacherParams teacher;
  ShieldParams shield;
};

struct StepLog {
  int t = 0;
  std::vector<double> observation;
  std::vector<double> risks;  // per-action predicted risk used for this step's gate
  std::vector<double> q_gate;
  int policy_action = 0;  // gated choice (after optional exploration)
  int action = 0;         // executed action (after teacher / shield)
  bool fallback_used = false;
  bool shield_fired = false;
  bool teacher_used = false;
  bool explored = false;
  double reward = 0.0;
  double shaped_reward = 0.0;
  double cost = 0.0;
  bool violation = false;
  std::vector<double> latent;
  double latency_ms = 0.0;  // proxy build through action selection
};

struct EpisodeLog {
  std::vector<StepLog> steps;
  bool aborted = false;      // a model error ended the episode early
  std::string abort_reason;

  std::vector<double> latent_series(std::size_t idx) const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.latent.at(idx));
    return out;
  }

  std::vector<double> executed_risk_series() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.risks.at(static_cast<std::size_t>(s.action)));
    return out;
  }

  std::vector<char> violation_series() const {
    std::vector<char> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.violation ? 1 : 0);
    return out;
  }

  double total_reward() const {
    double r = 0.0;
    for (const auto& s : steps) r += s.reward;
    return r;
  }

  double total_cost() const {
    double c = 0.0;
    for (const auto& s : steps) c += s.cost;
    return c;
  }

  double mean_latency_ms() const {
    if (steps.empty()) return 0.0;
    double t = 0.0;
    for (const auto& s : steps) t += s.latency_ms;
    return t / static_cast<double>(steps.size());
  }

  void write_csv(std::ostream& os, const std::vector<std::string>& latent_names) const;
};

// Proportional rule with a meal-rise term; doses are projected to the
// nearest grid value (ties toward the smaller dose).
inline int teacher_action(const std::vector<WindowEntry>& window, const std::vector<double>& grid,
                          const TeacherParams& p, double step_minutes) {
  if (window.empty()) return 0;
  const double cgm = window.back().obs.at(0);
  if (cgm < p.cgm_floor) return 0;
  const double first = window.front().obs.at(0);
  const int span = static_cast<int>(window.size()) - 1;
  const double trend = span > 0 ? (cgm - first) / (span * step_minutes) : 0.0;
  const double meal_rise = trend > p.trend_threshold ? trend : 0.0;
  const double raw = p.k_p * std::max(0.0, cgm - p.target) + p.k_meal * meal_rise;
  int best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (std::fabs(grid[i] - raw) < std::fabs(grid[static_cast<std::size_t>(best)] - raw))
      best = static_cast<int>(i);
  return best;
}

// Hard shield: zero insulin in clearly unsafe low or falling regimes.
// Applied after gated selection; supreme over every other policy source.
inline int apply_shield(const std::vector<WindowEntry>& window, int proposed, const ShieldParams& p,
                        double step_minutes, bool* fired = nullptr) {
  if (fired) *fired = false;
  if (window.empty()) return proposed;
  const double cgm = window.back().obs.at(0);
  const double first = window.front().obs.at(0);
  const int span = static_cast<int>(window.size()) - 1;
  const double trend = span > 0 ? (cgm - first) / (span * step_minutes) : 0.0;
  if (cgm < p.cgm_floor || (cgm < p.trend_cgm_ceiling && trend < p.trend_floor)) {
    if (fired) *fired = true;
    return 0;  // grid index 0 is the zero dose
  }
  return proposed;
}

class Agent {
 public:
  Agent(const Environment& env, const AgentConfig& cfg, int risk_hidden, double risk_lr,
        const CriticConfig& critic_cfg, std::size_t replay_capacity)
      : cfg_(cfg),
        recipe_(env.feature_recipe(cfg.gate.window_len)),
        n_actions_(env.action_count()),
        feat_dim_(feature_dim(recipe_, cfg.gate.window_len)),
        risk_(feat_dim_, n_actions_, risk_hidden, risk_lr),
        critics_(feat_dim_, n_actions_, with_members(critic_cfg, cfg.gate.ensemble_size), cfg.seed),
        replay_(replay_capacity, cfg.seed),
        label_rng_(Rng::derive(cfg.seed, 501)),
        explore_rng_(Rng::derive(cfg.seed, 502)) {
    cfg_.gate.validated();
    if (cfg_.risk_horizon < 1) throw std::invalid_argument("Agent: risk_horizon must be >= 1");
    if (cfg_.batch_size < 1) throw std::invalid_argument("Agent: batch_size must be >= 1");
    if (cfg_.warmup_steps < 0) throw std::invalid_argument("Agent: warmup_steps must be >= 0");
    Rng init(Rng::derive(cfg.seed, 500));
    risk_.init_random(init);
    is_glucose_ = std::holds_alternative<GlucoseFeatureRecipe>(recipe_);
    if (is_glucose_) glucose_grid_ = std::get<GlucoseFeatureRecipe>(recipe_).action_units;
  }

  // Runs up to max_steps environment steps (or to terminal). The agent keeps
  // its window and pending transition across calls so a training phase can
  // flow into an evaluation phase without a reset.
  EpisodeLog run_episode(Environment& env, int max_steps, bool learn, bool explore) {
    EpisodeLog log;
    if (window_.empty()) start_episode(env);

    for (int step = 0; step < max_steps; ++step) {
      StepLog rec;
      rec.t = global_step_;
      rec.observation = window_.back().obs;

      ProxyState proxy;
      RiskVector risks;
      GateValues gv;
      Selection sel;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<WindowEntry> win(window_.begin(), window_.end());
        proxy = build_proxy_state(win, cfg_.gate.window_len, recipe_);
        risks = predict_risks(proxy);
        const auto q = critics_.q_values(proxy.features, risks);
        gv = gate_values(q, risks);
        sel = select_action(gv.q_gate, risks, cfg_.gate.r_max);
        const auto t1 = std::chrono::steady_clock::now();
        rec.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      } catch (const std::exception& e) {
        log.aborted = true;
        log.abort_reason = e.what();
        break;
      }
      const std::vector<WindowEntry> win(window_.begin(), window_.end());

      // A completed decision at step t supplies the bootstrap context for
      // the transition stored at t-1: the stored next-step risks are exactly
      // the ones this step acts on.
      if (pending_) {
        pending_->next_proxy_features = proxy.features;
        pending_->next_risk_vector = risks;
        replay_.push(std::move(*pending_));
        pending_.reset();
      }

      const bool in_warmup = global_step_ < cfg_.warmup_steps;
      int policy_action = sel.action;
      rec.fallback_used = sel.fallback_used;
      if (!in_warmup && explore && cfg_.epsilon > 0.0 && explore_rng_.bernoulli(cfg_.epsilon)) {
        // Uniform over the safe set; when nothing is admissible the draw
        // covers all actions so training can still gather escape evidence
        // from saturated-risk regions.
        std::vector<int> safe;
        for (int a = 0; a < n_actions_; ++a)
          if (detail::clamp01(risks[static_cast<std::size_t>(a)]) <= cfg_.gate.r_max) safe.push_back(a);
        policy_action = safe.empty()
                            ? explore_rng_.uniform_int(n_actions_)
                            : safe[static_cast<std::size_t>(explore_rng_.uniform_int(static_cast<int>(safe.size())))];
        rec.explored = true;
      }
      int action = policy_action;
      if (cfg_.random_policy) {
        action = explore_rng_.uniform_int(n_actions_);
      } else if (in_warmup) {
        action = is_glucose_ ? teacher_action(win, glucose_grid_, cfg_.teacher,
                                              std::get<GlucoseFeatureRecipe>(recipe_).step_minutes)
                             : explore_rng_.uniform_int(n_actions_);
        rec.teacher_used = true;
      }
      if (cfg_.shield_enabled && is_glucose_) {
        bool fired = false;
        action = apply_shield(win, action, cfg_.shield,
                              std::get<GlucoseFeatureRecipe>(recipe_).step_minutes, &fired);
        rec.shield_fired = fired;
      }

      EnvStep es = env.step(action);
      const double rho_exec = detail::clamp01(risks[static_cast<std::size_t>(action)]);
      const double shaped = shaped_reward(es.raw_reward, rho_exec, cfg_.gate.lambda_risk);

      rec.risks = risks.values;
      rec.q_gate = gv.q_gate;
      rec.policy_action = policy_action;
      rec.action = action;
      rec.reward = es.raw_reward;
      rec.shaped_reward = shaped;
      rec.cost = es.cost;
      rec.violation = es.violation;
      for (const auto& name : env.latent_names()) rec.latent.push_back(es.info.at(name));
      log.steps.push_back(rec);

      Transition tr;
      tr.proxy_features = proxy.features;
      tr.action = action;
      tr.shaped_reward = shaped;
      tr.raw_reward = es.raw_reward;
      tr.cost = es.cost;
      tr.violation = es.violation;
      tr.predicted_risk_at_selection = rho_exec;
      tr.terminal = es.terminal;
      pending_ = std::move(tr);

      push_window(es.observation, action);
      absorb_label_evidence(es.violation, proxy.features, action);

      ++global_step_;
      if (learn && cfg_.update_every > 0 && global_step_ % cfg_.update_every == 0) {
        try {
          train_step();
        } catch (const std::exception& e) {
          log.aborted = true;
          log.abort_reason = e.what();
          break;
        }
      }

      if (es.terminal) {
        finish_episode();
        break;
      }
    }
    return log;
  }

  RiskModel& risk_model() { return risk_; }
  const RiskModel& risk_model() const { return risk_; }
  CriticEnsemble& critics() { return critics_; }
  const CriticEnsemble& critics() const { return critics_; }
  ReplayBuffer& replay() { return replay_; }
  const AgentConfig& config() const { return cfg_; }
  int feature_dim_used() const { return feat_dim_; }
  int steps_taken() const { return global_step_; }
  std::size_t label_pool_size() const { return labels_.size(); }

 private:
  struct PendingLabel {
    HazardLabel label;
    int lookahead_seen = 0;
  };

  static CriticConfig with_members(CriticConfig c, int members) {
    c.members = members;
    return c;
  }

  void start_episode(Environment& env) {
    window_.clear();
    window_.push_back({env.reset(), kNullAction});
  }

  void push_window(const std::vector<double>& obs, int action) {
    window_.push_back({obs, action});
    while (static_cast<int>(window_.size()) > cfg_.gate.window_len) window_.pop_front();
  }

  RiskVector predict_risks(const ProxyState& proxy) const {
    if (cfg_.pin_risk >= 0.0) {
      RiskVector rv;
      rv.values.assign(static_cast<std::size_t>(n_actions_), cfg_.pin_risk);
      return rv;
    }
    return risk_.predict_all(proxy);
  }

  // Each step contributes one new pending label and one unit of lookahead to
  // every label still inside its horizon. A label whose action was executed
  // at step t is true iff a violation lands within (t, t + horizon].
  void absorb_label_evidence(bool violated_now, const std::vector<double>& features, int action) {
    pending_labels_.push_back({{features, action, false, false}, 0});
    for (auto& p : pending_labels_) {
      if (p.lookahead_seen < cfg_.risk_horizon) {
        if (violated_now) p.label.violated = true;
        ++p.lookahead_seen;
      }
    }
    while (!pending_labels_.empty() && pending_labels_.front().lookahead_seen >= cfg_.risk_horizon) {
      commit_label(pending_labels_.front().label);
      pending_labels_.pop_front();
    }
  }

  void finish_episode() {
    // Remaining pendings saw less than the full horizon.
    while (!pending_labels_.empty()) {
      auto p = pending_labels_.front();
      pending_labels_.pop_front();
      p.label.partial = true;
      if (cfg_.include_partial_labels) commit_label(p.label);
    }
    if (pending_) {
      const std::vector<WindowEntry> win(window_.begin(), window_.end());
      ProxyState proxy = build_proxy_state(win, cfg_.gate.window_len, recipe_);
      pending_->next_proxy_features = proxy.features;
      pending_->next_risk_vector = predict_risks(proxy);
      pending_->terminal = true;
      replay_.push(std::move(*pending_));
      pending_.reset();
    }
    window_.clear();
  }

  void commit_label(const HazardLabel& lbl) {
    if (labels_.size() < label_capacity_) {
      labels_.push_back(lbl);
    } else {
      labels_[label_head_] = lbl;
      label_head_ = (label_head_ + 1) % label_capacity_;
    }
  }

  void train_step() {
    if (cfg_.pin_risk < 0.0 && static_cast<int>(labels_.size()) >= cfg_.batch_size) {
      for (int i = 0; i < cfg_.risk_updates_per_step; ++i) {
        batch_labels_.clear();
        for (int k = 0; k < cfg_.batch_size; ++k)
          batch_labels_.push_back(
              labels_[static_cast<std::size_t>(label_rng_.uniform_int(static_cast<int>(labels_.size())))]);
        risk_.update(batch_labels_);
      }
    }
    if (replay_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
      for (int i = 0; i < cfg_.critic_updates_per_step; ++i) {
        const auto batch = replay_.sample(static_cast<std::size_t>(cfg_.batch_size));
        critics_.td_update(batch, cfg_.gate);
      }
    }
  }

  AgentConfig cfg_;
  FeatureRecipe recipe_;
  int n_actions_;
  int feat_dim_;
  bool is_glucose_ = false;
  std::vector<double> glucose_grid_;
  RiskModel risk_;
  CriticEnsemble critics_;
  ReplayBuffer replay_;
  Rng label_rng_;
  Rng explore_rng_;

  std::deque<WindowEntry> window_;
  std::optional<Transition> pending_;
  std::deque<PendingLabel> pending_labels_;
  std::vector<HazardLabel> labels_;
  std::size_t label_capacity_ = 100000;
  std::size_t label_head_ = 0;
  std::vector<HazardLabel> batch_labels_;
  int global_step_ = 0;
};

inline void EpisodeLog::write_csv(std::ostream& os, const std::vector<std::string>& latent_names) const {
  if (steps.empty()) return;
  os << "t";
  for (std::size_t i = 0; i < steps.front().observation.size(); ++i) os << ",obs" << i;
  os << ",policy_action,action";
  for (std::size_t i = 0; i < steps.front().risks.size(); ++i) os << ",risk" << i;
  for (std::size_t i = 0; i < steps.front().q_gate.size(); ++i) os << ",qgate" << i;
  os << ",fallback,shield,teacher,explored,reward,shaped_reward,cost,violation";
  for (const auto& n : latent_names) os << "," << n;
  os << ",latency_ms\n";
  for (const auto& s : steps) {
    os << s.t;
    for (double v : s.observation) os << ',' << v;
    os << ',' << s.policy_action << ',' << s.action;
    for (double v : s.risks) os << ',' << v;
    for (double v : s.q_gate) os << ',' << v;
    os << ',' << (s.fallback_used ? 1 : 0) << ',' << (s.shield_fired ? 1 : 0) << ','
       << (s.teacher_used ? 1 : 0) << ',' << (s.explored ? 1 : 0) << ',' << s.reward << ','
       << s.shaped_reward << ',' << s.cost << ',' << (s.violation ? 1 : 0);
    for (double v : s.latent) os << ',' << v;
    os << ',' << s.latency_ms << "\n";
  }
}

}  // namespace riskgate
