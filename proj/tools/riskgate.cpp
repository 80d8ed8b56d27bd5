// Experiment runner CLI: train, eval, sweep, compare, analyze-risk and
// theory-check subcommands over the riskgate library. Every command exits 0
// on success; failures print a machine-readable error JSON to stderr and
// exit nonzero (2 for config errors, 1 otherwise).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskgate/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riskgate;

namespace {

Config load_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  Config cfg = config_path.empty() ? Config() : Config::from_file(config_path);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::istringstream is(csv);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoull(tok));
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

int fail(const std::exception& e, int code) {
  json err;
  err["error"] = e.what();
  std::cerr << err.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-gated control experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, manifest_path, run_dir, env_kind, algorithms_csv, seeds_csv;
  std::vector<std::string> overrides, grid_specs;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 2;

  auto* train = app.add_subcommand("train", "run the training + evaluation schedule");
  train->add_option("--config", config_path, "config file (key = value)");
  train->add_option("--env", env_kind, "environment kind: glucose | nav | tabular");
  train->add_option("--seed", seed, "master seed")->each([&](const std::string&) { seed_set = true; });
  train->add_option("--out", out_dir, "run directory")->required();
  train->add_option("--override,-o", overrides, "config override key=value (repeatable)");
  train->add_option("--from-manifest", manifest_path, "replay the exact config of an earlier run");

  auto* eval = app.add_subcommand("eval", "re-evaluate a finished run from its checkpoints");
  eval->add_option("--run", run_dir, "run directory with manifest and checkpoints")->required();
  eval->add_option("--out", out_dir, "output directory (default: <run>/eval_again)");

  auto* sweep = app.add_subcommand("sweep", "ablation grid over config keys");
  sweep->add_option("--config", config_path, "base config file");
  sweep->add_option("--env", env_kind, "environment kind");
  sweep->add_option("--param", grid_specs, "grid spec key=v1,v2,... (repeatable)")->required();
  sweep->add_option("--seeds", seeds_csv, "comma-separated seed list (default 42,123,456)");
  sweep->add_option("--workers", workers, "parallel runs");
  sweep->add_option("--out", out_dir, "sweep directory")->required();
  sweep->add_option("--override,-o", overrides, "config override key=value (repeatable)");

  auto* compare = app.add_subcommand("compare", "baseline comparison table");
  compare->add_option("--config", config_path, "base config file");
  compare->add_option("--env", env_kind, "environment kind");
  compare
      ->add_option("--algorithms", algorithms_csv,
                   "comma-separated list: riskgated,unconstrained_q,penalty_only,shielded_only,teacher,random")
      ->required();
  compare->add_option("--seeds", seeds_csv, "comma-separated seed list (default 42,123,456)");
  compare->add_option("--workers", workers, "parallel runs");
  compare->add_option("--out", out_dir, "comparison directory")->required();
  compare->add_option("--override,-o", overrides, "config override key=value (repeatable)");

  auto* analyze = app.add_subcommand("analyze-risk", "post-hoc risk calibration of a finished run");
  analyze->add_option("--run", run_dir, "run directory")->required();

  auto* theory_cmd = app.add_subcommand("theory-check", "formal property checks on the tabular oracle");
  theory_cmd->add_option("--out", out_dir, "report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      RunResult result;
      if (!manifest_path.empty()) {
        result = run_training_from_manifest(manifest_path, out_dir);
      } else {
        Config cfg = load_config(config_path, overrides);
        if (!env_kind.empty()) cfg.set("env.kind", env_kind);
        if (seed_set) cfg.set("run.seed", std::to_string(seed));
        result = run_training(cfg, out_dir);
      }
      std::cout << result.metrics.dump(2) << std::endl;
      return 0;
    }
    if (eval->parsed()) {
      std::ifstream is(fs::path(run_dir) / "manifest.json");
      if (!is) throw std::runtime_error("missing manifest in " + run_dir);
      json manifest;
      is >> manifest;
      Config cfg = Config::from_json(manifest.at("config"));
      cfg.set("train.eval_learning", "freeze");
      const Config resolved = resolved_config(cfg);
      const std::string kind = resolved.get_string("env.kind");
      const fs::path dst = out_dir.empty() ? fs::path(run_dir) / "eval_again" : fs::path(out_dir);
      auto env = make_env(resolved);
      Agent agent(*env, make_agent_config(resolved), resolved.get_int("risk.hidden_dim"),
                  resolved.get_double("risk.learning_rate"), make_critic_config(resolved),
                  static_cast<std::size_t>(resolved.get_int("replay.capacity")));
      agent.risk_model() = read_risk_checkpoint(fs::path(run_dir) / "checkpoints" / "risk.bin");
      agent.critics() = read_critic_checkpoint(fs::path(run_dir) / "checkpoints" / "critics.bin",
                                               resolved.get_u64("run.seed"));
      fs::create_directories(dst);
      int steps = 0;
      if (kind == "glucose")
        steps = resolved.get_int("glucose.eval_days") *
                static_cast<int>(std::lround(1440.0 / resolved.get_double("glucose.decision_interval_min")));
      else if (kind == "nav")
        steps = resolved.get_int("nav.episode_len") * resolved.get_int("nav.eval_episodes");
      else
        steps = resolved.get_int("tabular.eval_steps");
      const auto log = agent.run_episode(*env, steps, false, false);
      json metrics;
      metrics["eval_steps"] = log.steps.size();
      metrics["mean_reward"] =
          log.steps.empty() ? 0.0 : log.total_reward() / static_cast<double>(log.steps.size());
      metrics["total_cost"] = log.total_cost();
      std::ofstream os(dst / "eval_metrics.json");
      os << metrics.dump(2) << "\n";
      std::ofstream cs(dst / "eval_episode.csv");
      cs << std::setprecision(17);
      log.write_csv(cs, env->latent_names());
      std::cout << metrics.dump(2) << std::endl;
      return 0;
    }
    if (sweep->parsed()) {
      Config cfg = load_config(config_path, overrides);
      if (!env_kind.empty()) cfg.set("env.kind", env_kind);
      SweepOptions opts;
      for (const auto& spec : grid_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("grid spec is not key=v1,v2,...: " + spec);
        std::vector<std::string> values;
        std::istringstream vs(spec.substr(eq + 1));
        std::string tok;
        while (std::getline(vs, tok, ',')) values.push_back(tok);
        opts.grid.emplace_back(spec.substr(0, eq), values);
      }
      if (!seeds_csv.empty()) opts.seeds = parse_seeds(seeds_csv);
      opts.workers = workers;
      const json report = run_sweep(cfg, opts, out_dir);
      std::cout << "sweep cells: " << report.at("cells").size() << std::endl;
      return 0;
    }
    if (compare->parsed()) {
      Config cfg = load_config(config_path, overrides);
      if (!env_kind.empty()) cfg.set("env.kind", env_kind);
      CompareOptions opts;
      std::istringstream as(algorithms_csv);
      std::string tok;
      while (std::getline(as, tok, ',')) opts.algorithms.push_back(tok);
      if (!seeds_csv.empty()) opts.seeds = parse_seeds(seeds_csv);
      opts.workers = workers;
      const json report = run_compare(cfg, opts, out_dir);
      std::cout << report.at("aggregate").dump(2) << std::endl;
      return 0;
    }
    if (analyze->parsed()) {
      const json report = analyze_risk(run_dir);
      std::cout << report.dump(2) << std::endl;
      return 0;
    }
    if (theory_cmd->parsed()) {
      const json report = run_theory_checks(out_dir);
      std::cout << report.dump(2) << std::endl;
      return report.at("all_hold").get<bool>() ? 0 : 3;
    }
  } catch (const ConfigError& e) {
    return fail(e, 2);
  } catch (const std::exception& e) {
    return fail(e, 1);
  }
  return 0;
}
