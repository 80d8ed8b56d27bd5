#pragma once

// Glucose-regulation surrogate with the decision structure of an artificial
// pancreas study: CGM observations every 3 minutes, discretized bolus
// actions, unobserved meals. Dynamics are a three-compartment minimal model
//   dG/dt = -p1 (G - Gb) - X G + k_carb * D / t_meal      (plasma glucose)
//   dX/dt = -p2 X                                          (remote insulin action)
//   dD/dt = -D / t_meal                                    (gut glucose)
// integrated with fixed-step RK4. A bolus of u units bumps X by kappa * u;
// a meal of c grams bumps D by c. The latent state is never observed: the
// controller sees only noisy CGM readings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgate/envs/env.hpp"
#include "riskgate/rng.hpp"

namespace riskgate {

enum class Cohort { Adult, Adolescent };

struct GlucoseConfig {
  double decision_interval_min = 3.0;
  std::vector<double> meal_times_min = {480.0, 750.0, 960.0, 1140.0};  // 08:00 12:30 16:00 19:00
  std::vector<double> meal_carbs_g = {45.0, 70.0, 15.0, 80.0};
  double meal_jitter_min = 10.0;  // per-day uniform jitter on meal times
  double g_low = 70.0;
  double g_high = 180.0;
  double cgm_noise_sd = 5.0;
  std::vector<double> action_grid = {0.0, 0.5, 1.0, 2.0, 4.0};  // insulin units
  int episode_days = 5;
  Cohort cohort = Cohort::Adult;
  double iob_decay = 0.5;      // feature-recipe constant
  double substep_min = 1.0;    // RK4 step
  double patient_variation = 0.2;  // +-20% multiplicative spread per parameter

  // Minimal-model base constants.
  double p1 = 0.028;        // 1/min glucose self-clearance
  double p2 = 0.025;        // 1/min insulin action decay
  double insulin_gain = 0.0078;  // X bump per bolus unit (p3 * plasma conversion)
  double k_carb = 3.5;      // mg/dL rise per gram absorbed
  double t_meal_min = 40.0; // absorption time constant
  double g_basal = 120.0;   // mg/dL
};

class GlucoseEnv : public Environment {
 public:
  GlucoseEnv(GlucoseConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), rng_(Rng::derive(seed, 11)), patient_rng_(Rng::derive(seed, 12)) {
    if (cfg_.action_grid.empty() || cfg_.action_grid.front() != 0.0)
      throw std::invalid_argument("GlucoseEnv: action grid must start at 0");
    if (!std::is_sorted(cfg_.action_grid.begin(), cfg_.action_grid.end()))
      throw std::invalid_argument("GlucoseEnv: action grid must be ascending");
    if (!(cfg_.g_low < cfg_.g_high)) throw std::invalid_argument("GlucoseEnv: g_low must be < g_high");
    if (cfg_.meal_times_min.size() != cfg_.meal_carbs_g.size())
      throw std::invalid_argument("GlucoseEnv: meal times/carbs length mismatch");
    sample_patient();
  }

  std::vector<double> reset() override {
    g_ = p_.g_basal;
    x_ = 0.0;
    d_ = 0.0;
    minute_ = 0.0;
    build_meal_schedule();
    return {cgm()};
  }

  EnvStep step(int action) override {
    if (action < 0 || action >= static_cast<int>(cfg_.action_grid.size()))
      throw std::invalid_argument("GlucoseEnv: bolus not on the action grid");
    const double bolus = cfg_.action_grid[static_cast<std::size_t>(action)];
    x_ += p_.insulin_gain * bolus;

    const double end_minute = minute_ + cfg_.decision_interval_min;
    while (minute_ < end_minute - 1e-9) {
      deliver_due_meals();
      const double h = std::min(cfg_.substep_min, end_minute - minute_);
      rk4(h);
      minute_ += h;
    }
    deliver_due_meals();

    EnvStep out;
    out.observation = {cgm()};
    const double excursion = std::fabs(g_ - std::clamp(g_, cfg_.g_low, cfg_.g_high));
    out.raw_reward = 1.0 - std::min(1.0, excursion / 50.0);
    out.violation = g_ < cfg_.g_low;
    out.cost = out.violation ? 1.0 : 0.0;
    out.terminal = minute_ >= cfg_.episode_days * 1440.0 - 1e-9;
    out.info = {{"G", g_}, {"X", x_}, {"D", d_}, {"minute", minute_}};
    return out;
  }

  int action_count() const override { return static_cast<int>(cfg_.action_grid.size()); }
  int obs_dim() const override { return 1; }
  std::string name() const override { return "glucose"; }

  FeatureRecipe feature_recipe(int /*window_len*/) const override {
    return GlucoseFeatureRecipe{cfg_.action_grid, cfg_.iob_decay, cfg_.decision_interval_min};
  }

  std::vector<std::string> latent_names() const override { return {"G", "X", "D", "minute"}; }

  const GlucoseConfig& config() const { return cfg_; }
  double latent_glucose() const { return g_; }
  double basal_equilibrium() const { return p_.g_basal; }  // analytic fixed point at X = D = 0

 private:
  struct PatientParams {
    double p1, p2, insulin_gain, k_carb, t_meal, g_basal;
  };

  void sample_patient() {
    const auto vary = [&](double base, double spread) {
      return base * (1.0 + spread * patient_rng_.uniform(-1.0, 1.0));
    };
    const double v = cfg_.patient_variation;
    // Adolescent cohorts show wider insulin-sensitivity spread.
    const double vi = cfg_.cohort == Cohort::Adolescent ? v * 1.3 : v;
    p_.p1 = vary(cfg_.p1, v);
    p_.p2 = vary(cfg_.p2, v);
    p_.insulin_gain = vary(cfg_.insulin_gain, vi);
    p_.k_carb = vary(cfg_.k_carb, v);
    p_.t_meal = vary(cfg_.t_meal_min, v);
    p_.g_basal = cfg_.g_basal;
  }

  void build_meal_schedule() {
    meal_minutes_.clear();
    meal_grams_.clear();
    for (int day = 0; day < cfg_.episode_days; ++day) {
      for (std::size_t i = 0; i < cfg_.meal_times_min.size(); ++i) {
        const double jitter = cfg_.meal_jitter_min > 0.0 ? rng_.uniform(-cfg_.meal_jitter_min, cfg_.meal_jitter_min) : 0.0;
        meal_minutes_.push_back(day * 1440.0 + cfg_.meal_times_min[i] + jitter);
        meal_grams_.push_back(cfg_.meal_carbs_g[i]);
      }
    }
    next_meal_ = 0;
  }

  void deliver_due_meals() {
    while (next_meal_ < meal_minutes_.size() && meal_minutes_[next_meal_] <= minute_ + 1e-9) {
      d_ += meal_grams_[next_meal_];
      ++next_meal_;
    }
  }

  void derivs(double g, double x, double d, double& dg, double& dx, double& dd) const {
    dg = -p_.p1 * (g - p_.g_basal) - x * g + p_.k_carb * d / p_.t_meal;
    dx = -p_.p2 * x;
    dd = -d / p_.t_meal;
  }

  void rk4(double h) {
    double k1g, k1x, k1d, k2g, k2x, k2d, k3g, k3x, k3d, k4g, k4x, k4d;
    derivs(g_, x_, d_, k1g, k1x, k1d);
    derivs(g_ + 0.5 * h * k1g, x_ + 0.5 * h * k1x, d_ + 0.5 * h * k1d, k2g, k2x, k2d);
    derivs(g_ + 0.5 * h * k2g, x_ + 0.5 * h * k2x, d_ + 0.5 * h * k2d, k3g, k3x, k3d);
    derivs(g_ + h * k3g, x_ + h * k3x, d_ + h * k3d, k4g, k4x, k4d);
    g_ += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
    x_ += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    d_ += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    g_ = std::max(10.0, g_);
    x_ = std::max(0.0, x_);
    d_ = std::max(0.0, d_);
  }

  double cgm() {
    const double noise = cfg_.cgm_noise_sd > 0.0 ? rng_.normal(0.0, cfg_.cgm_noise_sd) : 0.0;
    return std::clamp(g_ + noise, 40.0, 400.0);
  }

  GlucoseConfig cfg_;
  Rng rng_;
  Rng patient_rng_;
  PatientParams p_{};
  double g_ = 120.0, x_ = 0.0, d_ = 0.0;
  double minute_ = 0.0;
  std::vector<double> meal_minutes_, meal_grams_;
  std::size_t next_meal_ = 0;
};

}  // namespace riskgate
