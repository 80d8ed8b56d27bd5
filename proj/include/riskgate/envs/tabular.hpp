#pragma once

// Tiny tabular POMDP with fully known matrices, used as the theory oracle.
//
// Six latent states grouped into three two-state blocks (calm, elevated,
// danger). Observations reveal the block deterministically for calm and
// elevated; the danger block emits either a hazard reading (o2) or an alarm
// (o3), and the alarm observation is the safety violation event. Transition
// rows depend on the latent state only through its block, so the belief
// after one (obs, action, obs) update is exactly determined by that triple.
// That makes the full-history oracle a finite belief MDP, which the theory
// checks exploit.

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgate/envs/env.hpp"
#include "riskgate/rng.hpp"

namespace riskgate {

struct TabularPomdpSpec {
  static constexpr int n_states = 6;
  static constexpr int n_actions = 3;
  static constexpr int n_obs = 4;

  // T[s][a][s']; rows depend only on block(s).
  std::array<std::array<std::array<double, n_states>, n_actions>, n_states> T{};
  // omega[s][o]
  std::array<std::array<double, n_obs>, n_states> omega{};
  // reward[s][a]
  std::array<std::array<double, n_actions>, n_states> reward{};
  std::array<bool, n_obs> unsafe_obs{};
  std::array<int, n_states> state_block{};
  std::array<int, n_obs> obs_block{};
  std::array<double, n_states> init_dist{};

  // Probability the arrival state s' emits an unsafe observation.
  double unsafe_emission(int s) const {
    double u = 0.0;
    for (int o = 0; o < n_obs; ++o)
      if (unsafe_obs[static_cast<std::size_t>(o)]) u += omega[static_cast<std::size_t>(s)][static_cast<std::size_t>(o)];
    return u;
  }

  // P(violation at next step | current latent s, action a).
  double next_step_risk(int s, int a) const {
    double r = 0.0;
    for (int sp = 0; sp < n_states; ++sp)
      r += T[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)][static_cast<std::size_t>(sp)] *
           unsafe_emission(sp);
    return r;
  }

  double reward_spread() const {
    double lo = reward[0][0], hi = reward[0][0];
    for (const auto& row : reward)
      for (double r : row) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    return hi - lo;
  }
};

// Default instance. All probabilities are multiples of 1/20 (transitions) and
// 1/10 (emissions) so exact expected backups have small rational weights.
inline TabularPomdpSpec default_tabular_pomdp() {
  TabularPomdpSpec s;
  s.state_block = {0, 0, 1, 1, 2, 2};
  s.obs_block = {0, 1, 2, 2};
  s.unsafe_obs = {false, false, false, true};

  // Emissions: o0 <- calm, o1 <- elevated, o2/o3 <- danger.
  s.omega = {{{1.0, 0.0, 0.0, 0.0},
              {1.0, 0.0, 0.0, 0.0},
              {0.0, 1.0, 0.0, 0.0},
              {0.0, 1.0, 0.0, 0.0},
              {0.0, 0.0, 0.7, 0.3},
              {0.0, 0.0, 0.1, 0.9}}};

  // Per-(block, action) next-state rows; a0 retreats, a1 holds, a2 pushes
  // toward the rewarding-but-dangerous regime.
  const std::array<std::array<std::array<double, 6>, 3>, 3> rows = {{
      // block 0 (calm)
      {{{0.55, 0.35, 0.10, 0.00, 0.00, 0.00},
        {0.40, 0.20, 0.20, 0.10, 0.05, 0.05},
        {0.25, 0.15, 0.20, 0.15, 0.15, 0.10}}},
      // block 1 (elevated)
      {{{0.50, 0.20, 0.25, 0.05, 0.00, 0.00},
        {0.15, 0.10, 0.35, 0.20, 0.15, 0.05},
        {0.05, 0.05, 0.15, 0.15, 0.30, 0.30}}},
      // block 2 (danger)
      {{{0.40, 0.30, 0.20, 0.05, 0.05, 0.00},
        {0.05, 0.05, 0.15, 0.15, 0.35, 0.25},
        {0.00, 0.00, 0.05, 0.05, 0.40, 0.50}}},
  }};
  for (int st = 0; st < 6; ++st)
    for (int a = 0; a < 3; ++a)
      s.T[static_cast<std::size_t>(st)][static_cast<std::size_t>(a)] =
          rows[static_cast<std::size_t>(s.state_block[static_cast<std::size_t>(st)])][static_cast<std::size_t>(a)];

  // Rewards vary within blocks so that belief resolution matters.
  s.reward = {{{0.10, 0.50, 1.00},
               {0.10, 0.40, 0.70},
               {0.00, 0.45, 0.90},
               {0.00, 0.30, 0.60},
               {-0.10, -0.20, -0.40},
               {-0.10, -0.50, -1.00}}};

  s.init_dist = {0.5, 0.5, 0.0, 0.0, 0.0, 0.0};
  return s;
}

class TabularPomdpEnv : public Environment {
 public:
  TabularPomdpEnv(TabularPomdpSpec spec, std::uint64_t seed, int episode_len = 0)
      : spec_(spec), rng_(Rng::derive(seed, 31)), episode_len_(episode_len) {}

  std::vector<double> reset() override {
    state_ = sample(spec_.init_dist.data(), TabularPomdpSpec::n_states);
    obs_ = sample_obs(state_);
    steps_ = 0;
    return one_hot(obs_);
  }

  EnvStep step(int action) override {
    if (action < 0 || action >= TabularPomdpSpec::n_actions)
      throw std::invalid_argument("TabularPomdpEnv: action out of range");
    EnvStep out;
    out.raw_reward = spec_.reward[static_cast<std::size_t>(state_)][static_cast<std::size_t>(action)];
    state_ = sample(spec_.T[static_cast<std::size_t>(state_)][static_cast<std::size_t>(action)].data(),
                    TabularPomdpSpec::n_states);
    obs_ = sample_obs(state_);
    out.observation = one_hot(obs_);
    out.violation = spec_.unsafe_obs[static_cast<std::size_t>(obs_)];
    out.cost = out.violation ? 1.0 : 0.0;
    ++steps_;
    out.terminal = episode_len_ > 0 && steps_ >= episode_len_;
    out.info = {{"latent_state", static_cast<double>(state_)}, {"obs", static_cast<double>(obs_)}};
    return out;
  }

  int action_count() const override { return TabularPomdpSpec::n_actions; }
  int obs_dim() const override { return TabularPomdpSpec::n_obs; }
  std::string name() const override { return "tabular"; }

  FeatureRecipe feature_recipe(int /*window_len*/) const override {
    return TabularWindowRecipe{TabularPomdpSpec::n_obs, TabularPomdpSpec::n_actions};
  }

  std::vector<std::string> latent_names() const override { return {"latent_state", "obs"}; }

  const TabularPomdpSpec& spec() const { return spec_; }
  int latent_state() const { return state_; }
  int current_obs() const { return obs_; }
  void force_latent_state(int s) { state_ = s; }  // test hook

 private:
  int sample(const double* probs, int n) {
    double u = rng_.uniform();
    for (int i = 0; i < n; ++i) {
      u -= probs[i];
      if (u < 0.0) return i;
    }
    return n - 1;
  }

  int sample_obs(int s) { return sample(spec_.omega[static_cast<std::size_t>(s)].data(), TabularPomdpSpec::n_obs); }

  static std::vector<double> one_hot(int o) {
    std::vector<double> v(TabularPomdpSpec::n_obs, 0.0);
    v[static_cast<std::size_t>(o)] = 1.0;
    return v;
  }

  TabularPomdpSpec spec_;
  Rng rng_;
  int state_ = 0;
  int obs_ = 0;
  int steps_ = 0;
  int episode_len_ = 0;
};

}  // namespace riskgate
