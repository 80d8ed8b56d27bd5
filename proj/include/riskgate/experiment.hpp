#pragma once

// Experiment orchestration: builds environments and agents from a Config,
// runs the train/eval schedule, and writes the run directory
// (manifest.json, metrics.json, timing.json, episodes/*.csv, checkpoints/*).
// Also hosts the sweep runner, the baseline comparison, the post-hoc risk
// calibration analysis and the formal-check report.
//
// metrics.json contains only deterministic quantities, so a run replayed
// from its manifest reproduces it byte for byte; wallclock measurements live
// in timing.json.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "riskgate/agent.hpp"
#include "riskgate/checkpoint.hpp"
#include "riskgate/config.hpp"
#include "riskgate/envs/glucose.hpp"
#include "riskgate/envs/nav.hpp"
#include "riskgate/envs/tabular.hpp"
#include "riskgate/metrics.hpp"
#include "riskgate/theory.hpp"

namespace riskgate {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config resolution.

inline void apply_algorithm_preset(Config& cfg) {
  const std::string alg = cfg.get_string("run.algorithm");
  if (alg == "riskgated") return;
  if (alg == "unconstrained_q") {
    cfg.set("gate.ensemble_size", "1");
    cfg.set("gate.lambda_risk", "0");
    cfg.set("gate.r_max", "1");
    cfg.set("agent.pin_risk", "0");
    cfg.set("agent.shield_enabled", "false");
    return;
  }
  if (alg == "penalty_only") {
    cfg.set("gate.r_max", "1");
    cfg.set("agent.shield_enabled", "false");
    return;
  }
  if (alg == "shielded_only") {
    cfg.set("gate.r_max", "1");
    cfg.set("gate.lambda_risk", "0");
    cfg.set("gate.ensemble_size", "1");
    cfg.set("agent.pin_risk", "0");
    cfg.set("agent.shield_enabled", "true");
    return;
  }
  if (alg == "teacher" || alg == "pid") {
    cfg.set("agent.warmup_steps", "1073741824");
    cfg.set("agent.update_every", "0");
    cfg.set("agent.pin_risk", "0");
    cfg.set("agent.shield_enabled", "false");
    return;
  }
  if (alg == "random") {
    cfg.set("agent.random_policy", "true");
    cfg.set("agent.update_every", "0");
    cfg.set("agent.pin_risk", "0");
    cfg.set("agent.shield_enabled", "false");
    cfg.set("gate.r_max", "1");
    return;
  }
  throw ConfigError("unknown run.algorithm: " + alg);
}

// Fills the auto (-1) defaults from the environment kind; the manifest
// records the resolved values.
inline void resolve_auto_defaults(Config& cfg) {
  const std::string kind = cfg.get_string("env.kind");
  const auto set_if_auto = [&](const char* key, const char* value) {
    if (cfg.get_double(key) < 0.0) cfg.set(key, value);
  };
  if (kind == "glucose") {
    set_if_auto("gate.discount", "0.98");
    set_if_auto("risk.horizon", "1");
    set_if_auto("critic.reward_clip", "1.0");
    set_if_auto("agent.warmup_steps", "480");
  } else if (kind == "nav") {
    set_if_auto("gate.discount", "0.95");
    set_if_auto("risk.horizon", "5");
    set_if_auto("critic.reward_clip", "2.0");
    set_if_auto("agent.warmup_steps", "2000");
  } else if (kind == "tabular") {
    set_if_auto("gate.discount", "0.9");
    set_if_auto("risk.horizon", "1");
    set_if_auto("critic.reward_clip", "1.0");
    set_if_auto("agent.warmup_steps", "0");
  } else {
    throw ConfigError("env.kind must be glucose | nav | tabular");
  }
}

inline Config resolved_config(Config cfg) {
  apply_algorithm_preset(cfg);
  resolve_auto_defaults(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Construction from config.

inline std::unique_ptr<Environment> make_env(const Config& cfg) {
  const std::string kind = cfg.get_string("env.kind");
  const std::uint64_t seed = cfg.get_u64("run.seed");
  if (kind == "glucose") {
    GlucoseConfig gc;
    gc.decision_interval_min = cfg.get_double("glucose.decision_interval_min");
    gc.meal_times_min = cfg.get_minutes_list("glucose.meal_times");
    gc.meal_carbs_g = cfg.get_double_list("glucose.meal_carbs");
    gc.meal_jitter_min = cfg.get_double("glucose.meal_jitter_min");
    gc.g_low = cfg.get_double("glucose.g_low");
    gc.g_high = cfg.get_double("glucose.g_high");
    gc.cgm_noise_sd = cfg.get_double("glucose.cgm_noise_sd");
    gc.action_grid = cfg.get_double_list("glucose.action_grid");
    gc.iob_decay = cfg.get_double("glucose.iob_decay");
    gc.substep_min = cfg.get_double("glucose.substep_min");
    gc.patient_variation = cfg.get_double("glucose.patient_variation");
    gc.cohort = cfg.get_string("glucose.cohort") == "adolescent" ? Cohort::Adolescent : Cohort::Adult;
    const bool paper = cfg.get_bool("glucose.paper_schedule");
    const int train_days = paper ? 30 : cfg.get_int("glucose.train_days");
    const int eval_days = paper ? 14 : cfg.get_int("glucose.eval_days");
    gc.episode_days = train_days + eval_days;
    return std::make_unique<GlucoseEnv>(gc, seed);
  }
  if (kind == "nav") {
    NavConfig nc;
    nc.arena_half_width = cfg.get_double("nav.arena_half_width");
    nc.goal_radius = cfg.get_double("nav.goal_radius");
    nc.lidar_bins = cfg.get_int("nav.lidar_bins");
    nc.lidar_range = cfg.get_double("nav.lidar_range");
    nc.speed = cfg.get_double("nav.speed");
    nc.episode_len = cfg.get_int("nav.episode_len");
    return std::make_unique<NavEnv>(nc, seed);
  }
  if (kind == "tabular") {
    return std::make_unique<TabularPomdpEnv>(default_tabular_pomdp(), seed);
  }
  throw ConfigError("env.kind must be glucose | nav | tabular");
}

inline AgentConfig make_agent_config(const Config& cfg) {
  AgentConfig ac;
  ac.gate.window_len = cfg.get_int("gate.window_len");
  ac.gate.r_max = cfg.get_double("gate.r_max");
  ac.gate.lambda_risk = cfg.get_double("gate.lambda_risk");
  ac.gate.ensemble_size = cfg.get_int("gate.ensemble_size");
  ac.gate.discount = cfg.get_double("gate.discount");
  ac.warmup_steps = cfg.get_int("agent.warmup_steps");
  ac.shield_enabled = cfg.get_bool("agent.shield_enabled");
  ac.update_every = cfg.get_int("agent.update_every");
  ac.batch_size = cfg.get_int("agent.batch_size");
  ac.risk_updates_per_step = cfg.get_int("agent.risk_updates_per_step");
  ac.critic_updates_per_step = cfg.get_int("agent.critic_updates_per_step");
  ac.seed = cfg.get_u64("run.seed");
  ac.risk_horizon = cfg.get_int("risk.horizon");
  ac.epsilon = cfg.get_double("agent.epsilon");
  ac.pin_risk = cfg.get_double("agent.pin_risk");
  ac.include_partial_labels = cfg.get_bool("agent.include_partial_labels");
  ac.random_policy = cfg.get_bool("agent.random_policy");
  ac.teacher.k_p = cfg.get_double("agent.teacher_kp");
  ac.teacher.k_meal = cfg.get_double("agent.teacher_kmeal");
  ac.teacher.target = cfg.get_double("agent.teacher_target");
  ac.teacher.cgm_floor = cfg.get_double("agent.teacher_cgm_floor");
  ac.teacher.trend_threshold = cfg.get_double("agent.teacher_trend_threshold");
  ac.shield.cgm_floor = cfg.get_double("agent.shield_cgm_floor");
  ac.shield.trend_cgm_ceiling = cfg.get_double("agent.shield_trend_cgm_ceiling");
  ac.shield.trend_floor = cfg.get_double("agent.shield_trend_floor");
  return ac;
}

inline CriticConfig make_critic_config(const Config& cfg) {
  CriticConfig cc;
  cc.members = cfg.get_int("gate.ensemble_size");
  cc.hidden_dim = cfg.get_int("critic.hidden_dim");
  cc.learning_rate = cfg.get_double("critic.learning_rate");
  cc.sync_interval = cfg.get_int("critic.sync_interval");
  cc.bootstrap_mask_prob = cfg.get_double("critic.bootstrap_mask_prob");
  cc.gate_bootstrap = cfg.get_bool("critic.gate_bootstrap");
  cc.reward_clip = cfg.get_double("critic.reward_clip");
  if (cfg.get_string("env.kind") == "tabular") {
    cc.hidden_dim = 0;
    cc.tabular_joint_encoding = true;
  }
  return cc;
}

// ---------------------------------------------------------------------------
// Training runs.

struct RunResult {
  fs::path dir;
  json metrics;
  double runtime_s = 0.0;
  double latency_ms = 0.0;
};

namespace detail_exp {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline void write_episode_csv(const fs::path& path, const EpisodeLog& log, const Environment& env) {
  std::ofstream os(path, std::ios::binary);
  os << std::setprecision(17);
  log.write_csv(os, env.latent_names());
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace detail_exp

// Runs the configured training + evaluation schedule and writes the run
// directory. The config passed in may still contain auto defaults; the
// manifest records the fully resolved snapshot.
inline RunResult run_training(const Config& raw_cfg, const fs::path& out_dir) {
  const Config cfg = resolved_config(raw_cfg);
  const auto t_start = std::chrono::steady_clock::now();

  fs::create_directories(out_dir / "episodes");
  fs::create_directories(out_dir / "checkpoints");

  auto env = make_env(cfg);
  const AgentConfig ac = make_agent_config(cfg);
  const CriticConfig cc = make_critic_config(cfg);
  Agent agent(*env, ac, cfg.get_int("risk.hidden_dim"), cfg.get_double("risk.learning_rate"), cc,
              static_cast<std::size_t>(cfg.get_int("replay.capacity")));

  const std::string kind = cfg.get_string("env.kind");
  const bool learn_in_eval = cfg.get_string("train.eval_learning") == "continue";

  std::vector<EpisodeLog> train_logs, eval_logs;
  if (kind == "glucose") {
    const bool paper = cfg.get_bool("glucose.paper_schedule");
    const int train_days = paper ? 30 : cfg.get_int("glucose.train_days");
    const int eval_days = paper ? 14 : cfg.get_int("glucose.eval_days");
    const int steps_per_day = static_cast<int>(std::lround(1440.0 / cfg.get_double("glucose.decision_interval_min")));
    train_logs.push_back(agent.run_episode(*env, train_days * steps_per_day, true, true));
    eval_logs.push_back(agent.run_episode(*env, eval_days * steps_per_day, learn_in_eval, false));
  } else if (kind == "nav") {
    for (int ep = 0; ep < cfg.get_int("nav.train_episodes"); ++ep)
      train_logs.push_back(agent.run_episode(*env, cfg.get_int("nav.episode_len"), true, true));
    for (int ep = 0; ep < cfg.get_int("nav.eval_episodes"); ++ep)
      eval_logs.push_back(agent.run_episode(*env, cfg.get_int("nav.episode_len"), learn_in_eval, false));
  } else {
    train_logs.push_back(agent.run_episode(*env, cfg.get_int("tabular.train_steps"), true, true));
    eval_logs.push_back(agent.run_episode(*env, cfg.get_int("tabular.eval_steps"), learn_in_eval, false));
  }

  for (const auto& log : train_logs)
    if (log.aborted) throw std::runtime_error("training aborted: " + log.abort_reason);
  for (const auto& log : eval_logs)
    if (log.aborted) throw std::runtime_error("evaluation aborted: " + log.abort_reason);

  // Deterministic metrics over the evaluation phase.
  json metrics;
  metrics["env"] = kind;
  metrics["algorithm"] = cfg.get_string("run.algorithm");
  metrics["seed"] = cfg.get_u64("run.seed");
  double latency_sum = 0.0;
  std::size_t latency_count = 0;
  for (const auto& log : eval_logs) {
    for (const auto& s : log.steps) {
      latency_sum += s.latency_ms;
      ++latency_count;
    }
  }

  if (kind == "glucose") {
    std::vector<double> latent_g;
    double reward_sum = 0.0, cost_sum = 0.0;
    long fallbacks = 0, shields = 0;
    for (const auto& log : eval_logs) {
      const auto g = log.latent_series(0);
      latent_g.insert(latent_g.end(), g.begin(), g.end());
      reward_sum += log.total_reward();
      cost_sum += log.total_cost();
      for (const auto& s : log.steps) {
        fallbacks += s.fallback_used ? 1 : 0;
        shields += s.shield_fired ? 1 : 0;
      }
    }
    const auto gm = glucose_metrics(latent_g);
    metrics["eval_steps"] = latent_g.size();
    metrics["tir_pct"] = gm.tir_pct;
    metrics["time_below_70_pct"] = gm.time_below_70_pct;
    metrics["time_above_180_pct"] = gm.time_above_180_pct;
    metrics["mean_bg"] = gm.mean_bg;
    metrics["mean_reward"] = reward_sum / static_cast<double>(latent_g.size());
    metrics["total_cost"] = cost_sum;
    metrics["fallback_rate"] = static_cast<double>(fallbacks) / static_cast<double>(latent_g.size());
    metrics["shield_rate"] = static_cast<double>(shields) / static_cast<double>(latent_g.size());
  } else if (kind == "nav") {
    std::vector<double> ep_rewards, ep_costs;
    for (const auto& log : eval_logs) {
      ep_rewards.push_back(log.total_reward());
      ep_costs.push_back(log.total_cost());
    }
    double r = 0.0, c = 0.0;
    for (double v : ep_rewards) r += v;
    for (double v : ep_costs) c += v;
    r /= static_cast<double>(ep_rewards.size());
    c /= static_cast<double>(ep_costs.size());
    metrics["episodes"] = ep_rewards.size();
    metrics["avg_reward"] = r;
    metrics["avg_cost"] = c;
    metrics["j_c"] = c / cfg.get_double("nav.cost_limit");
    metrics["reward_per_cost"] = c > 0.0 ? r / c : std::numeric_limits<double>::max();
    metrics["zero_cost"] = c == 0.0;
    metrics["episode_rewards"] = ep_rewards;
    metrics["episode_costs"] = ep_costs;
  } else {
    double reward_sum = 0.0;
    long violations = 0;
    std::size_t steps = 0;
    for (const auto& log : eval_logs) {
      reward_sum += log.total_reward();
      for (const auto& s : log.steps) violations += s.violation ? 1 : 0;
      steps += log.steps.size();
    }
    metrics["eval_steps"] = steps;
    metrics["mean_reward"] = reward_sum / static_cast<double>(steps);
    metrics["violation_rate"] = static_cast<double>(violations) / static_cast<double>(steps);
  }

  const auto t_end = std::chrono::steady_clock::now();
  RunResult result;
  result.dir = out_dir;
  result.metrics = metrics;
  result.runtime_s = std::chrono::duration<double>(t_end - t_start).count();
  result.latency_ms = latency_count ? latency_sum / static_cast<double>(latency_count) : 0.0;

  // Run directory files.
  json manifest;
  manifest["algorithm"] = cfg.get_string("run.algorithm");
  manifest["env"] = kind;
  manifest["seed"] = cfg.get_u64("run.seed");
  manifest["config"] = cfg.to_json();
  manifest["config_hash"] = detail_exp::hash_hex(cfg.content_hash());
  manifest["created_utc"] = detail_exp::timestamp_utc();
  json outputs = json::array();
  for (std::size_t i = 0; i < train_logs.size(); ++i) {
    std::ostringstream name;
    name << "episodes/train_" << std::setw(3) << std::setfill('0') << i << ".csv";
    outputs.push_back(name.str());
    detail_exp::write_episode_csv(out_dir / name.str(), train_logs[i], *env);
  }
  for (std::size_t i = 0; i < eval_logs.size(); ++i) {
    std::ostringstream name;
    name << "episodes/eval_" << std::setw(3) << std::setfill('0') << i << ".csv";
    outputs.push_back(name.str());
    detail_exp::write_episode_csv(out_dir / name.str(), eval_logs[i], *env);
  }
  manifest["outputs"] = outputs;
  detail_exp::write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  detail_exp::write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");

  json timing;
  timing["runtime_s"] = result.runtime_s;
  timing["per_step_latency_ms"] = result.latency_ms;
  detail_exp::write_text(out_dir / "timing.json", timing.dump(2) + "\n");

  write_risk_checkpoint(out_dir / "checkpoints" / "risk.bin", agent.risk_model());
  write_critic_checkpoint(out_dir / "checkpoints" / "critics.bin", agent.critics());
  return result;
}

inline RunResult run_training_from_manifest(const fs::path& manifest_path, const fs::path& out_dir) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("cannot read manifest: " + manifest_path.string());
  json manifest;
  is >> manifest;
  const Config cfg = Config::from_json(manifest.at("config"));
  return run_training(cfg, out_dir);
}

// ---------------------------------------------------------------------------
// Parallel execution helper: runs tasks on a small worker pool; exceptions
// are captured per task.

struct TaskOutcome {
  bool ok = false;
  std::string error;
  RunResult result;
};

inline std::vector<TaskOutcome> run_parallel(const std::vector<Config>& configs,
                                             const std::vector<fs::path>& dirs, int workers) {
  std::vector<TaskOutcome> out(configs.size());
  std::atomic<std::size_t> next{0};
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= configs.size()) return;
        try {
          out[i].result = run_training(configs[i], dirs[i]);
          out[i].ok = true;
        } catch (const std::exception& e) {
          out[i].ok = false;
          out[i].error = e.what();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

// ---------------------------------------------------------------------------
// Baseline comparison.

struct CompareOptions {
  std::vector<std::string> algorithms;
  std::vector<std::uint64_t> seeds = {42, 123, 456};
  int workers = 2;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline json run_compare(const Config& base, const CompareOptions& opts, const fs::path& out_dir) {
  if (opts.algorithms.size() < 1) throw ConfigError("compare needs at least one algorithm");
  const std::string kind = base.get_string("env.kind");
  fs::create_directories(out_dir);

  std::vector<Config> configs;
  std::vector<fs::path> dirs;
  for (const auto& alg : opts.algorithms) {
    for (const auto seed : opts.seeds) {
      Config cfg = base;
      cfg.set("run.algorithm", alg);
      cfg.set("run.seed", std::to_string(seed));
      configs.push_back(cfg);
      dirs.push_back(out_dir / (alg + "_seed" + std::to_string(seed)));
    }
  }
  const auto outcomes = run_parallel(configs, dirs, opts.workers);

  json table = json::array();
  std::map<std::string, std::map<std::string, std::vector<double>>> per_alg;
  std::map<std::string, std::vector<double>> runtimes;
  std::size_t idx = 0;
  for (const auto& alg : opts.algorithms) {
    for (std::size_t s = 0; s < opts.seeds.size(); ++s, ++idx) {
      const auto& o = outcomes[idx];
      if (!o.ok) {
        json row;
        row["algorithm"] = alg;
        row["seed"] = opts.seeds[s];
        row["status"] = "failed";
        row["error"] = o.error;
        table.push_back(row);
        continue;
      }
      runtimes[alg].push_back(o.result.runtime_s);
      for (const auto& [k, v] : o.result.metrics.items())
        if (v.is_number()) per_alg[alg][k].push_back(v.get<double>());
    }
  }

  json aggregate = json::array();
  double reference_reward = -1.0;
  if (kind == "nav") {
    const auto it = per_alg.find("unconstrained_q");
    if (it != per_alg.end() && it->second.count("avg_reward"))
      reference_reward = mean_of(it->second.at("avg_reward"));
  }

  // mean-rank over the three primary glucose metrics
  std::map<std::string, double> ranks;
  if (kind == "glucose" && per_alg.size() >= 2) {
    std::vector<std::vector<double>> rank_table;
    std::vector<std::string> rank_algs;
    for (const auto& alg : opts.algorithms) {
      if (!per_alg.count(alg)) continue;
      rank_algs.push_back(alg);
      rank_table.push_back({mean_of(per_alg[alg]["tir_pct"]), mean_of(per_alg[alg]["time_below_70_pct"]),
                            mean_of(per_alg[alg]["time_above_180_pct"])});
    }
    const auto r = mean_rank(rank_table, {true, false, false});
    for (std::size_t i = 0; i < rank_algs.size(); ++i) ranks[rank_algs[i]] = r[i];
  }

  for (const auto& alg : opts.algorithms) {
    if (!per_alg.count(alg)) continue;
    json row;
    row["algorithm"] = alg;
    for (const auto& [k, vals] : per_alg[alg]) {
      row[k + "_mean"] = mean_of(vals);
      row[k + "_sd"] = sd_of(vals);
    }
    row["runtime_s_mean"] = mean_of(runtimes[alg]);
    if (kind == "nav" && reference_reward > 0.0)
      row["j_r"] = mean_of(per_alg[alg]["avg_reward"]) / reference_reward;
    if (kind == "nav") {
      const double r = mean_of(per_alg[alg]["avg_reward"]);
      const double c = mean_of(per_alg[alg]["avg_cost"]);
      row["reward_per_cost_of_means"] = c > 0.0 ? r / c : std::numeric_limits<double>::max();
    }
    if (ranks.count(alg)) row["mean_rank"] = ranks[alg];
    aggregate.push_back(row);
  }

  json report;
  report["env"] = kind;
  report["seeds"] = opts.seeds;
  report["runs"] = table;
  report["aggregate"] = aggregate;
  if (reference_reward > 0.0) report["reference_reward"] = reference_reward;

  // Table-style CSV.
  std::ostringstream csv;
  csv << std::setprecision(17);
  if (kind == "glucose") {
    csv << "algorithm,tir_mean,tir_sd,below70_mean,below70_sd,above180_mean,above180_sd,"
           "meanbg_mean,meanbg_sd,runtime_s,mean_rank\n";
    for (const auto& row : aggregate) {
      csv << row["algorithm"].get<std::string>() << ',' << row["tir_pct_mean"].get<double>() << ','
          << row["tir_pct_sd"].get<double>() << ',' << row["time_below_70_pct_mean"].get<double>() << ','
          << row["time_below_70_pct_sd"].get<double>() << ',' << row["time_above_180_pct_mean"].get<double>()
          << ',' << row["time_above_180_pct_sd"].get<double>() << ',' << row["mean_bg_mean"].get<double>()
          << ',' << row["mean_bg_sd"].get<double>() << ',' << row["runtime_s_mean"].get<double>() << ','
          << (row.contains("mean_rank") ? std::to_string(row["mean_rank"].get<double>()) : "") << "\n";
    }
  } else if (kind == "nav") {
    csv << "algorithm,avg_reward_mean,avg_reward_sd,avg_cost_mean,avg_cost_sd,j_r,j_c,reward_per_cost,"
           "runtime_s\n";
    for (const auto& row : aggregate) {
      csv << row["algorithm"].get<std::string>() << ',' << row["avg_reward_mean"].get<double>() << ','
          << row["avg_reward_sd"].get<double>() << ',' << row["avg_cost_mean"].get<double>() << ','
          << row["avg_cost_sd"].get<double>() << ','
          << (row.contains("j_r") ? std::to_string(row["j_r"].get<double>()) : "") << ','
          << row["j_c_mean"].get<double>() << ',' << row["reward_per_cost_of_means"].get<double>() << ','
          << row["runtime_s_mean"].get<double>() << "\n";
    }
  } else {
    csv << "algorithm,mean_reward,violation_rate,runtime_s\n";
    for (const auto& row : aggregate)
      csv << row["algorithm"].get<std::string>() << ',' << row["mean_reward_mean"].get<double>() << ','
          << row["violation_rate_mean"].get<double>() << ',' << row["runtime_s_mean"].get<double>() << "\n";
  }
  detail_exp::write_text(out_dir / "compare.csv", csv.str());
  detail_exp::write_text(out_dir / "compare.json", report.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// Ablation sweeps.

struct SweepOptions {
  // (key, candidate values) in CLI order; cells are the cross product.
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  std::vector<std::uint64_t> seeds = {42, 123, 456};
  int workers = 2;
};

inline json run_sweep(const Config& base, const SweepOptions& opts, const fs::path& out_dir) {
  if (opts.grid.empty()) throw ConfigError("sweep needs at least one --param grid");
  fs::create_directories(out_dir);

  std::vector<std::map<std::string, std::string>> cells = {{}};
  for (const auto& [key, values] : opts.grid) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        auto c = cell;
        c[key] = v;
        next.push_back(c);
      }
    }
    cells = std::move(next);
  }

  std::vector<Config> configs;
  std::vector<fs::path> dirs;
  std::vector<std::pair<std::size_t, std::uint64_t>> plan;  // (cell index, seed)
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (const auto seed : opts.seeds) {
      Config cfg = base;
      for (const auto& [k, v] : cells[ci]) cfg.set(k, v);
      cfg.set("run.seed", std::to_string(seed));
      configs.push_back(cfg);
      std::ostringstream dir;
      dir << "cell" << std::setw(3) << std::setfill('0') << ci << "_seed" << seed;
      dirs.push_back(out_dir / dir.str());
      plan.emplace_back(ci, seed);
    }
  }
  const auto outcomes = run_parallel(configs, dirs, opts.workers);

  json cells_json = json::array();
  std::ostringstream csv;
  csv << std::setprecision(17);
  bool header_written = false;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    json cell;
    cell["params"] = cells[ci];
    std::map<std::string, std::vector<double>> agg;
    json runs = json::array();
    int failures = 0;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      if (plan[i].first != ci) continue;
      const auto& o = outcomes[i];
      json run;
      run["seed"] = plan[i].second;
      run["status"] = o.ok ? "ok" : "failed";
      if (o.ok) {
        run["metrics"] = o.result.metrics;
        for (const auto& [k, v] : o.result.metrics.items())
          if (v.is_number()) agg[k].push_back(v.get<double>());
      } else {
        run["error"] = o.error;
        ++failures;
      }
      runs.push_back(run);
    }
    cell["runs"] = runs;
    cell["failures"] = failures;
    json stats;
    for (const auto& [k, vals] : agg) {
      stats[k + "_mean"] = mean_of(vals);
      stats[k + "_sd"] = sd_of(vals);
    }
    cell["aggregate"] = stats;
    cells_json.push_back(cell);

    if (!header_written) {
      csv << "cell";
      for (const auto& [k, v] : cells[ci]) {
        (void)v;
        csv << ',' << k;
      }
      for (const auto& [k, vals] : agg) {
        (void)vals;
        csv << ',' << k << "_mean," << k << "_sd";
      }
      csv << ",failures\n";
      header_written = true;
    }
    csv << ci;
    for (const auto& [k, v] : cells[ci]) {
      (void)k;
      csv << ',' << v;
    }
    for (const auto& [k, vals] : agg) {
      (void)k;
      csv << ',' << mean_of(vals) << ',' << sd_of(vals);
    }
    csv << ',' << failures << "\n";
  }

  json report;
  report["seeds"] = opts.seeds;
  report["cells"] = cells_json;
  detail_exp::write_text(out_dir / "sweep.csv", csv.str());
  detail_exp::write_text(out_dir / "sweep.json", report.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// Post-hoc risk calibration analysis.

namespace detail_exp {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read csv: " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) return t;
  std::istringstream hs(line);
  std::string tok;
  while (std::getline(hs, tok, ',')) t.header.push_back(tok);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream rs(line);
    while (std::getline(rs, tok, ',')) row.push_back(std::stod(tok));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace detail_exp

// Compares logged online predicted risk of the executed action with the
// post-hoc realized violation indicator at the configured horizon.
inline json analyze_risk(const fs::path& run_dir) {
  std::ifstream is(run_dir / "manifest.json");
  if (!is) throw std::runtime_error("missing manifest in " + run_dir.string());
  json manifest;
  is >> manifest;
  const Config cfg = resolved_config(Config::from_json(manifest.at("config")));
  const double r_max = cfg.get_double("gate.r_max");
  const int horizon = cfg.get_int("risk.horizon");

  std::vector<double> predicted;
  std::vector<double> posthoc;
  for (const auto& out : manifest.at("outputs")) {
    const std::string name = out.get<std::string>();
    if (name.find("eval_") == std::string::npos) continue;
    const auto table = detail_exp::read_csv(run_dir / name);
    const int action_col = table.column("action");
    const int viol_col = table.column("violation");
    const int risk0 = table.column("risk0");
    if (action_col < 0 || viol_col < 0 || risk0 < 0)
      throw std::runtime_error("episode csv lacks risk columns: " + name);
    std::vector<char> flags;
    std::vector<double> exec_risk;
    for (const auto& row : table.rows) {
      const int action = static_cast<int>(std::lround(row[static_cast<std::size_t>(action_col)]));
      exec_risk.push_back(row[static_cast<std::size_t>(risk0 + action)]);
      flags.push_back(row[static_cast<std::size_t>(viol_col)] > 0.5 ? 1 : 0);
    }
    // realized violation within (t, t + horizon]: each step's own flag is one
    // step of lookahead
    for (std::size_t t = 0; t < flags.size(); ++t) {
      bool hit = false;
      for (std::size_t k = t; k < std::min(flags.size(), t + static_cast<std::size_t>(horizon)); ++k)
        hit |= flags[k] != 0;
      predicted.push_back(exec_risk[t]);
      posthoc.push_back(hit ? 1.0 : 0.0);
    }
  }
  if (predicted.size() < 2) throw std::runtime_error("run has no logged evaluation risks");

  const auto cal = risk_calibration(predicted, posthoc, r_max);
  json out;
  out["samples"] = predicted.size();
  out["r_max"] = r_max;
  out["horizon"] = horizon;
  out["mean_signed_error"] = cal.mean_signed_error;
  out["mae"] = cal.mae;
  out["rmse"] = cal.rmse;
  out["pearson_r"] = cal.pearson_r;
  out["pearson_defined"] = cal.pearson_defined;
  out["hellinger"] = cal.hellinger;
  out["pred_exceed_pct"] = cal.pred_exceed_pct;
  out["posthoc_exceed_pct"] = cal.posthoc_exceed_pct;
  out["threshold_agreement_pct"] = cal.threshold_agreement_pct;

  // Trace for the final stretch of evaluation (a 48 h analogue at 3-minute
  // steps is 960 samples).
  std::ostringstream trace;
  trace << std::setprecision(17) << "t,predicted,posthoc\n";
  const std::size_t start = predicted.size() > 960 ? predicted.size() - 960 : 0;
  for (std::size_t t = start; t < predicted.size(); ++t)
    trace << t << ',' << predicted[t] << ',' << posthoc[t] << "\n";
  detail_exp::write_text(run_dir / "risk_trace.csv", trace.str());
  detail_exp::write_text(run_dir / "calibration.json", out.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// Formal checks report (the executable analogue of the analysis appendix).

inline json run_theory_checks(const fs::path& out_dir = {}) {
  using namespace theory;
  const auto spec = default_tabular_pomdp();
  const double beta = 0.9, tau = 0.25, eps = 0.05;
  json report;

  const auto om = build_oracle_model(spec, beta);
  const auto oq = oracle_fixed_point(om, tau);
  const auto wm2 = build_window_model(spec, 2, beta);
  const double lambda_star = lambda_star_grid(wm2, tau);
  report["lambda_star"] = lambda_star;
  const double solver_eps = 2e-13 / (1.0 - beta);
  const double r_spread = spec.reward_spread();

  // window-length trend and error bound
  json w_checks = json::array();
  bool w_trend_ok = true, bound_ok = true;
  double prev_err = std::numeric_limits<double>::infinity();
  for (int w = 1; w <= 3; ++w) {
    const auto wm = build_window_model(spec, w, beta);
    const auto pq = proxy_fixed_point(wm, wm.true_risk, tau, 0.0);
    const double err = value_gap(om, oq, wm, pq);
    const double tv = max_tv_gap(om, wm);
    const double term_hist = r_spread * tv / ((1.0 - beta) * (1.0 - beta));
    const double term_dual = lambda_star / (1.0 - beta);  // lambda used here is 0
    const double bound = term_hist + term_dual + solver_eps;
    json row;
    row["window_len"] = w;
    row["value_error"] = err;
    row["tv_gap"] = tv;
    row["bound"] = bound;
    row["holds"] = err <= bound;
    bound_ok = bound_ok && err <= bound;
    if (err > prev_err + 1e-9) w_trend_ok = false;
    prev_err = err;
    w_checks.push_back(row);
  }
  report["w_checks"] = w_checks;
  report["w_trend_non_increasing"] = w_trend_ok;

  // sample-size trend at fixed lambda
  const double lambda_n = 0.3;
  const auto exact_q = proxy_fixed_point(wm2, wm2.true_risk, tau, lambda_n);
  json n_points = json::array();
  bool n_trend_ok = true;
  double prev_n_err = std::numeric_limits<double>::infinity();
  for (const int n : {100, 1000, 10000}) {
    double err_sum = 0.0, sup_sum = 0.0;
    for (int seed = 0; seed < 3; ++seed) {
      const auto emp = estimate_risk_from_samples(wm2, n, 1000 + static_cast<std::uint64_t>(seed));
      err_sum += proxy_fixed_point(wm2, emp.table, tau, lambda_n).sup_diff(exact_q);
      sup_sum += emp.sup_error;
    }
    const double err = err_sum / 3.0;
    const double sup_err = sup_sum / 3.0;
    const double bound = std::fabs(lambda_n - lambda_star) / (1.0 - beta) +
                         lambda_star * sup_err / (1.0 - beta) + solver_eps;
    json row;
    row["n"] = n;
    row["value_error"] = err;
    row["risk_sup_error"] = sup_err;
    row["bound"] = bound;
    row["holds"] = err <= bound;
    bound_ok = bound_ok && err <= bound;
    if (err >= prev_n_err) n_trend_ok = false;
    prev_n_err = err;
    n_points.push_back(row);
  }
  report["n_points"] = n_points;
  report["n_trend_decreasing"] = n_trend_ok;
  report["bounds_hold"] = bound_ok;

  // contraction
  Rng rng(909);
  double worst_oracle = 0.0, worst_proxy = 0.0;
  const auto wm1 = build_window_model(spec, 1, beta);
  for (int trial = 0; trial < 100; ++trial) {
    TabularQ a1, a2;
    a1.q.resize(om.nodes.size());
    a2.q.resize(om.nodes.size());
    for (std::size_t i = 0; i < om.nodes.size(); ++i)
      for (int a = 0; a < kA; ++a) {
        a1.q[i][static_cast<std::size_t>(a)] = rng.uniform(-5, 5);
        a2.q[i][static_cast<std::size_t>(a)] = rng.uniform(-5, 5);
      }
    worst_oracle = std::max(worst_oracle, apply_oracle_operator(om, a1, tau)
                                              .sup_diff(apply_oracle_operator(om, a2, tau)) /
                                              a1.sup_diff(a2));
    TabularQ b1, b2;
    b1.q.resize(static_cast<std::size_t>(wm1.size()));
    b2.q.resize(static_cast<std::size_t>(wm1.size()));
    for (std::size_t i = 0; i < b1.q.size(); ++i)
      for (int a = 0; a < kA; ++a) {
        b1.q[i][static_cast<std::size_t>(a)] = rng.uniform(-5, 5);
        b2.q[i][static_cast<std::size_t>(a)] = rng.uniform(-5, 5);
      }
    worst_proxy = std::max(worst_proxy, apply_proxy_operator(wm1, b1, wm1.true_risk, tau, 0.2)
                                            .sup_diff(apply_proxy_operator(wm1, b2, wm1.true_risk, tau, 0.2)) /
                                            b1.sup_diff(b2));
  }
  report["contraction"] = {{"beta", beta},
                           {"worst_oracle_ratio", worst_oracle},
                           {"worst_proxy_ratio", worst_proxy},
                           {"holds", worst_oracle <= beta + 1e-12 && worst_proxy <= beta + 1e-12}};

  // envelope
  const std::array<int, 5> ms = {1, 2, 3, 5, 8};
  json envelope = json::array();
  bool env_ok = true;
  for (const auto& r : check_envelope(-1.0, 2.0, ms, 10000, 4242)) {
    json row;
    row["ensemble_size"] = r.ensemble_size;
    row["bound"] = r.bound;
    row["empirical_rate"] = r.empirical_rate;
    row["mc_sigma"] = r.mc_sigma;
    row["holds"] = r.empirical_rate <= r.bound + 3.0 * r.mc_sigma;
    env_ok = env_ok && row["holds"].get<bool>();
    envelope.push_back(row);
  }
  report["envelope"] = envelope;
  report["envelope_holds"] = env_ok;

  // agreement / intervention
  const auto rho = perturb_risk(wm2.true_risk, RiskErrorKind::Uniform, eps, 7);
  const auto rep = check_agreement(wm2, rho, tau, eps);
  report["agreement"] = {{"epsilon", eps},
                         {"states", rep.states},
                         {"agreement_cases", rep.agreement_cases},
                         {"agreement_holds", rep.agreement_holds},
                         {"intervention_cases", rep.intervention_cases},
                         {"intervention_holds", rep.intervention_holds},
                         {"unclassified", rep.unclassified},
                         {"min_argmax_gap", rep.min_argmax_gap},
                         {"holds", rep.all_hold()}};

  report["all_hold"] = bound_ok && w_trend_ok && n_trend_ok && env_ok && rep.all_hold() &&
                       report["contraction"]["holds"].get<bool>();

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    detail_exp::write_text(out_dir / "theory_report.json", report.dump(2) + "\n");
    std::ostringstream csv;
    csv << std::setprecision(17) << "window_len,value_error,tv_gap,bound\n";
    for (const auto& row : w_checks)
      csv << row["window_len"].get<int>() << ',' << row["value_error"].get<double>() << ','
          << row["tv_gap"].get<double>() << ',' << row["bound"].get<double>() << "\n";
    detail_exp::write_text(out_dir / "w_trend.csv", csv.str());
    std::ostringstream ncsv;
    ncsv << std::setprecision(17) << "n,value_error,risk_sup_error,bound\n";
    for (const auto& row : n_points)
      ncsv << row["n"].get<int>() << ',' << row["value_error"].get<double>() << ','
           << row["risk_sup_error"].get<double>() << ',' << row["bound"].get<double>() << "\n";
    detail_exp::write_text(out_dir / "n_trend.csv", ncsv.str());
    std::ostringstream ecsv;
    ecsv << std::setprecision(17) << "ensemble_size,bound,empirical_rate,mc_sigma\n";
    for (const auto& row : envelope)
      ecsv << row["ensemble_size"].get<int>() << ',' << row["bound"].get<double>() << ','
           << row["empirical_rate"].get<double>() << ',' << row["mc_sigma"].get<double>() << "\n";
    detail_exp::write_text(out_dir / "envelope.csv", ecsv.str());
  }
  return report;
}

}  // namespace riskgate
