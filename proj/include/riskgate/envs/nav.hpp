#pragma once

// Hazard-field navigation surrogate: a kinematic point robot steers through
// an arena with circular hazards toward a relocating goal. Observations are
// egocentric and local (hazard lidar + goal bearing + speed); global
// coordinates are never exposed. Entering a hazard circle costs 1 per step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgate/envs/env.hpp"
#include "riskgate/rng.hpp"

namespace riskgate {

struct Circle {
  double x = 0.0, y = 0.0, r = 0.0;
};

struct NavConfig {
  double arena_half_width = 5.0;
  // A ring of hazards around the center: paths between random goals cross it
  // regularly, so unconstrained reward-seeking keeps paying safety cost.
  std::vector<Circle> hazards = {{3.0, 0.0, 0.35},   {2.12, 2.12, 0.35},  {0.0, 3.0, 0.35},
                                 {-2.12, 2.12, 0.35}, {-3.0, 0.0, 0.35},  {-2.12, -2.12, 0.35},
                                 {0.0, -3.0, 0.35},  {2.12, -2.12, 0.35}};
  double goal_radius = 0.4;
  double goal_min_spawn_dist = 2.0;    // from the agent, when relocating
  double hazard_spawn_margin = 0.5;    // goals and spawns keep clear of hazards
  int lidar_bins = 8;
  double lidar_range = 3.0;
  double goal_sense_range = 10.0;
  double speed = 0.2;  // displacement per step at full thrust
  // Turning circles at full and half thrust (diameters ~1.53 and ~0.77) are
  // wider than the hazard circles, so no constant moving action can orbit
  // inside one, and a single stride covers most of a hazard's depth.
  double turn_step = M_PI / 12.0;
  int episode_len = 1000;
  double hazard_step_cost = 1.0;
};

// Actions are (turn, thrust) pairs on a 3x3 grid, ordered thrust-major with
// full thrust first: index = 3 * thrust_idx + turn_idx, thrust in
// {1, .5, 0}, turn in {0, -1, +1}. Index 0 is straight ahead at full speed,
// so deterministic tie-breaks never freeze the robot in place.
class NavEnv : public Environment {
 public:
  NavEnv(NavConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(Rng::derive(seed, 21)) {
    if (cfg_.lidar_bins < 4) throw std::invalid_argument("NavEnv: lidar_bins must be >= 4");
    for (const auto& h : cfg_.hazards) check_inside(h.x, h.y, "hazard");
  }

  std::vector<double> reset() override {
    step_count_ = 0;
    heading_ = rng_.uniform(0.0, 2.0 * M_PI);
    spawn_agent();
    relocate_goal();
    last_speed_ = 0.0;
    return observe();
  }

  EnvStep step(int action) override {
    if (action < 0 || action >= action_count()) throw std::invalid_argument("NavEnv: action not on grid");
    const int thrust_idx = action / 3;
    const int turn_idx = action % 3;
    const double turn = turn_idx == 0 ? 0.0 : (turn_idx == 1 ? -1.0 : 1.0);
    const double thrust = 1.0 - 0.5 * static_cast<double>(thrust_idx);

    heading_ = wrap_angle(heading_ + turn * cfg_.turn_step);
    const double prev_dist = goal_distance();
    x_ += thrust * cfg_.speed * std::cos(heading_);
    y_ += thrust * cfg_.speed * std::sin(heading_);
    reflect_walls();
    last_speed_ = thrust;

    EnvStep out;
    double reward = prev_dist - goal_distance();  // progress toward the goal
    const bool in_hazard = inside_hazard(x_, y_);
    if (goal_distance() <= cfg_.goal_radius) {
      reward += 1.0;
      relocate_goal();
    }
    ++step_count_;
    out.raw_reward = reward;
    out.violation = in_hazard;
    out.cost = in_hazard ? cfg_.hazard_step_cost : 0.0;
    out.terminal = step_count_ >= cfg_.episode_len;
    out.observation = observe();
    out.info = {{"x", x_}, {"y", y_}, {"heading", heading_}, {"goal_dist", goal_distance()}};
    return out;
  }

  int action_count() const override { return 9; }
  int obs_dim() const override { return 2 * cfg_.lidar_bins + 1; }
  std::string name() const override { return "nav"; }

  FeatureRecipe feature_recipe(int /*window_len*/) const override {
    return NavFeatureRecipe{obs_dim(), action_count()};
  }

  std::vector<std::string> latent_names() const override { return {"x", "y", "heading", "goal_dist"}; }

  const NavConfig& config() const { return cfg_; }

  // Test hooks: pin the pose / goal for geometry checks.
  void set_pose(double x, double y, double heading) {
    x_ = x;
    y_ = y;
    heading_ = heading;
  }
  void set_goal(double x, double y) {
    goal_x_ = x;
    goal_y_ = y;
  }
  std::vector<double> observation_now() const { return observe(); }

 private:
  void check_inside(double x, double y, const char* what) const {
    if (std::fabs(x) > cfg_.arena_half_width || std::fabs(y) > cfg_.arena_half_width)
      throw std::invalid_argument(std::string("NavEnv: ") + what + " outside arena");
  }

  static double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
  }

  bool inside_hazard(double x, double y) const {
    for (const auto& h : cfg_.hazards) {
      const double dx = x - h.x, dy = y - h.y;
      if (dx * dx + dy * dy <= h.r * h.r) return true;
    }
    return false;
  }

  bool near_hazard(double x, double y, double margin) const {
    for (const auto& h : cfg_.hazards) {
      const double dx = x - h.x, dy = y - h.y;
      const double keep = h.r + margin;
      if (dx * dx + dy * dy <= keep * keep) return true;
    }
    return false;
  }

  void spawn_agent() {
    do {
      x_ = rng_.uniform(-cfg_.arena_half_width + 0.5, cfg_.arena_half_width - 0.5);
      y_ = rng_.uniform(-cfg_.arena_half_width + 0.5, cfg_.arena_half_width - 0.5);
    } while (near_hazard(x_, y_, cfg_.hazard_spawn_margin));
  }

  void relocate_goal() {
    do {
      goal_x_ = rng_.uniform(-cfg_.arena_half_width + 0.5, cfg_.arena_half_width - 0.5);
      goal_y_ = rng_.uniform(-cfg_.arena_half_width + 0.5, cfg_.arena_half_width - 0.5);
    } while (near_hazard(goal_x_, goal_y_, cfg_.hazard_spawn_margin) ||
             std::hypot(goal_x_ - x_, goal_y_ - y_) < cfg_.goal_min_spawn_dist);
  }

  void reflect_walls() {
    const double w = cfg_.arena_half_width;
    if (x_ > w) {
      x_ = 2.0 * w - x_;
      heading_ = wrap_angle(M_PI - heading_);
    } else if (x_ < -w) {
      x_ = -2.0 * w - x_;
      heading_ = wrap_angle(M_PI - heading_);
    }
    if (y_ > w) {
      y_ = 2.0 * w - y_;
      heading_ = wrap_angle(-heading_);
    } else if (y_ < -w) {
      y_ = -2.0 * w - y_;
      heading_ = wrap_angle(-heading_);
    }
  }

  double goal_distance() const { return std::hypot(goal_x_ - x_, goal_y_ - y_); }

  // Closest forward intersection of the ray (px,py)+t(dx,dy) with the circle;
  // negative when the ray misses.
  static double ray_circle(double px, double py, double dx, double dy, const Circle& c) {
    const double ox = px - c.x, oy = py - c.y;
    const double b = ox * dx + oy * dy;
    const double q = ox * ox + oy * oy - c.r * c.r;
    const double disc = b * b - q;
    if (disc < 0.0) return -1.0;
    const double root = std::sqrt(disc);
    const double t1 = -b - root;
    if (t1 >= 0.0) return t1;
    const double t2 = -b + root;
    return t2 >= 0.0 ? t2 : -1.0;
  }

  std::vector<double> observe() const {
    std::vector<double> obs;
    obs.reserve(static_cast<std::size_t>(obs_dim()));
    // Hazard lidar: evenly spaced egocentric rays; each bin reports
    // 1 - d/range for the nearest hazard hit within range, else 0.
    for (int k = 0; k < cfg_.lidar_bins; ++k) {
      const double ang = heading_ + 2.0 * M_PI * k / cfg_.lidar_bins;
      const double dx = std::cos(ang), dy = std::sin(ang);
      double best = -1.0;
      for (const auto& h : cfg_.hazards) {
        const double t = ray_circle(x_, y_, dx, dy, h);
        if (t >= 0.0 && (best < 0.0 || t < best)) best = t;
      }
      obs.push_back(best >= 0.0 && best <= cfg_.lidar_range ? 1.0 - best / cfg_.lidar_range : 0.0);
    }
    // Goal bearing: proximity written into the egocentric bearing bin.
    const double bearing = wrap_angle(std::atan2(goal_y_ - y_, goal_x_ - x_) - heading_);
    const double sector = 2.0 * M_PI / cfg_.lidar_bins;
    int bin = static_cast<int>(std::floor((bearing + sector / 2.0) / sector));
    bin = ((bin % cfg_.lidar_bins) + cfg_.lidar_bins) % cfg_.lidar_bins;
    for (int k = 0; k < cfg_.lidar_bins; ++k)
      obs.push_back(k == bin ? 1.0 - std::min(1.0, goal_distance() / cfg_.goal_sense_range) : 0.0);
    obs.push_back(last_speed_);
    return obs;
  }

  NavConfig cfg_;
  Rng rng_;
  double x_ = 0.0, y_ = 0.0, heading_ = 0.0;
  double goal_x_ = 0.0, goal_y_ = 0.0;
  double last_speed_ = 0.0;
  int step_count_ = 0;
};

}  // namespace riskgate
