#pragma once

// Flat key = value configuration with dotted sections. The registry below is
// the single source of truth for known keys, types and defaults; unknown
// keys are hard errors so a typo in a sweep grid cannot silently run the
// wrong experiment.
//
// File format: one `key = value` per line, `#` starts a comment, blank lines
// ignored. List values are comma-separated. Clock values like 08:00 are
// accepted wherever a minutes-list is expected.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace riskgate {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class Config {
 public:
  enum class Type { Double, Int, Bool, String, DoubleList, StringList };

  struct KeySpec {
    const char* key;
    Type type;
    const char* default_value;
    const char* help;
  };

  // The documented key list. -1 defaults mean "auto per environment".
  static const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> specs = {
        {"run.seed", Type::Int, "42", "master seed"},
        {"run.algorithm", Type::String, "riskgated",
         "riskgated | unconstrained_q | penalty_only | shielded_only | teacher | random"},
        {"env.kind", Type::String, "glucose", "glucose | nav | tabular"},

        {"gate.window_len", Type::Int, "8", "proxy history window W"},
        {"gate.r_max", Type::Double, "0.25", "risk admissibility threshold"},
        {"gate.lambda_risk", Type::Double, "0.1", "reward shaping penalty"},
        {"gate.ensemble_size", Type::Int, "5", "critic ensemble size M"},
        {"gate.discount", Type::Double, "-1", "discount; auto per env when < 0"},

        {"risk.hidden_dim", Type::Int, "32", "risk predictor hidden width"},
        {"risk.learning_rate", Type::Double, "0.01", ""},
        {"risk.horizon", Type::Int, "-1", "violation lookahead; auto per env when < 0"},

        {"critic.hidden_dim", Type::Int, "64", "critic hidden width"},
        {"critic.learning_rate", Type::Double, "0.005", ""},
        {"critic.sync_interval", Type::Int, "500", "updates between target syncs"},
        {"critic.bootstrap_mask_prob", Type::Double, "0.5", "bootstrap subsample probability"},
        {"critic.gate_bootstrap", Type::Bool, "false", "bootstrap through the gated value"},
        {"critic.reward_clip", Type::Double, "-1", "reward clip; auto per env when < 0"},

        {"agent.warmup_steps", Type::Int, "-1", "teacher/random warmup; auto per env when < 0"},
        {"agent.update_every", Type::Int, "1", ""},
        {"agent.batch_size", Type::Int, "64", ""},
        {"agent.risk_updates_per_step", Type::Int, "1", ""},
        {"agent.critic_updates_per_step", Type::Int, "1", ""},
        {"agent.shield_enabled", Type::Bool, "true", "glucose hard shield"},
        {"agent.epsilon", Type::Double, "0", "training exploration over the safe set"},
        {"agent.pin_risk", Type::Double, "-1", "pin all predicted risks to a constant when >= 0"},
        {"agent.random_policy", Type::Bool, "false", "uniform-random baseline policy"},
        {"agent.include_partial_labels", Type::Bool, "true", ""},
        {"agent.teacher_kp", Type::Double, "0.02", "units per mg/dL above target"},
        {"agent.teacher_kmeal", Type::Double, "0.3", "units per mg/dL/min of meal rise"},
        {"agent.teacher_target", Type::Double, "140", ""},
        {"agent.teacher_cgm_floor", Type::Double, "100", ""},
        {"agent.teacher_trend_threshold", Type::Double, "1.0", ""},
        {"agent.shield_cgm_floor", Type::Double, "90", ""},
        {"agent.shield_trend_cgm_ceiling", Type::Double, "120", ""},
        {"agent.shield_trend_floor", Type::Double, "-1.0", ""},

        {"replay.capacity", Type::Int, "100000", ""},
        {"train.eval_learning", Type::String, "continue", "continue | freeze during evaluation"},

        {"glucose.train_days", Type::Int, "3", ""},
        {"glucose.eval_days", Type::Int, "2", ""},
        {"glucose.paper_schedule", Type::Bool, "false", "30 train days / 14 eval days"},
        {"glucose.cohort", Type::String, "adult", "adult | adolescent"},
        {"glucose.decision_interval_min", Type::Double, "3", ""},
        {"glucose.meal_times", Type::StringList, "08:00,12:30,16:00,19:00", ""},
        {"glucose.meal_carbs", Type::DoubleList, "45,70,15,80", "grams per meal"},
        {"glucose.meal_jitter_min", Type::Double, "10", ""},
        {"glucose.g_low", Type::Double, "70", ""},
        {"glucose.g_high", Type::Double, "180", ""},
        {"glucose.cgm_noise_sd", Type::Double, "5", ""},
        {"glucose.action_grid", Type::DoubleList, "0,0.5,1,2,4", "bolus doses in units"},
        {"glucose.iob_decay", Type::Double, "0.5", "per-step insulin-on-board decay"},
        {"glucose.substep_min", Type::Double, "1.0", "RK4 substep"},
        {"glucose.patient_variation", Type::Double, "0.2", ""},

        {"nav.train_episodes", Type::Int, "20", ""},
        {"nav.eval_episodes", Type::Int, "5", ""},
        {"nav.episode_len", Type::Int, "1000", ""},
        {"nav.arena_half_width", Type::Double, "5", ""},
        {"nav.goal_radius", Type::Double, "0.4", ""},
        {"nav.lidar_bins", Type::Int, "8", ""},
        {"nav.lidar_range", Type::Double, "3", ""},
        {"nav.speed", Type::Double, "0.15", ""},
        {"nav.cost_limit", Type::Double, "25", "J^C normalization"},

        {"tabular.train_steps", Type::Int, "20000", ""},
        {"tabular.eval_steps", Type::Int, "5000", ""},
    };
    return specs;
  }

  Config() {
    for (const auto& s : registry()) values_[s.key] = s.default_value;
  }

  static Config from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    Config cfg;
    std::vector<std::string> unknown;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + " is not key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (!cfg.known(key)) {
        unknown.push_back(key);
        continue;
      }
      cfg.values_[key] = value;
    }
    if (!unknown.empty()) {
      std::string msg = "unknown config keys:";
      for (const auto& k : unknown) msg += " " + k;
      throw ConfigError(msg);
    }
    cfg.validate_types();
    return cfg;
  }

  void apply_override(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("override is not key=value: " + spec);
    const std::string key = trim(spec.substr(0, eq));
    const std::string value = trim(spec.substr(eq + 1));
    if (!known(key)) throw ConfigError("unknown config keys: " + key);
    values_[key] = value;
    validate_types();
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config keys: " + key);
    values_[key] = value;
  }

  bool known(const std::string& key) const { return values_.count(key) > 0; }

  double get_double(const std::string& key) const { return std::stod(raw(key)); }
  int get_int(const std::string& key) const { return static_cast<int>(std::stol(raw(key))); }
  std::uint64_t get_u64(const std::string& key) const { return std::stoull(raw(key)); }

  bool get_bool(const std::string& key) const {
    const std::string v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("not a boolean: " + key + " = " + v);
  }

  std::string get_string(const std::string& key) const { return raw(key); }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : split(raw(key))) out.push_back(std::stod(tok));
    return out;
  }

  std::vector<std::string> get_string_list(const std::string& key) const { return split(raw(key)); }

  // Minutes since midnight from HH:MM (or a plain minutes number).
  std::vector<double> get_minutes_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : split(raw(key))) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) {
        out.push_back(std::stod(tok));
      } else {
        out.push_back(60.0 * std::stod(tok.substr(0, colon)) + std::stod(tok.substr(colon + 1)));
      }
    }
    return out;
  }

  // Canonical sorted serialization; the manifest snapshot and the content
  // hash both derive from it.
  std::string canonical() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
    return os.str();
  }

  std::uint64_t content_hash() const {
    // FNV-1a 64
    std::uint64_t h = 1469598103934665603ull;
    for (char c : canonical()) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return h;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

  static Config from_json(const nlohmann::json& j) {
    Config cfg;
    std::vector<std::string> unknown;
    for (const auto& [k, v] : j.items()) {
      if (!cfg.known(k)) {
        unknown.push_back(k);
        continue;
      }
      cfg.values_[k] = v.get<std::string>();
    }
    if (!unknown.empty()) {
      std::string msg = "unknown config keys:";
      for (const auto& k : unknown) msg += " " + k;
      throw ConfigError(msg);
    }
    cfg.validate_types();
    return cfg;
  }

 private:
  const std::string& raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config keys: " + key);
    return it->second;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream is(s);
    while (std::getline(is, tok, ',')) {
      const std::string t = trim(tok);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  void validate_types() const {
    for (const auto& s : registry()) {
      const std::string& v = values_.at(s.key);
      try {
        switch (s.type) {
          case Type::Double:
            (void)std::stod(v);
            break;
          case Type::Int:
            (void)std::stol(v);
            break;
          case Type::Bool:
            (void)get_bool(s.key);
            break;
          case Type::DoubleList:
            (void)get_double_list(s.key);
            break;
          case Type::String:
          case Type::StringList:
            break;
        }
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError(std::string("bad value for ") + s.key + ": " + v);
      }
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace riskgate
