#pragma once

// Common stepping interface for the partially observable environments. Each
// instance is single-threaded; parallel sweeps own independent instances.

#include <map>
#include <string>
#include <vector>

#include "riskgate/core.hpp"

namespace riskgate {

struct EnvStep {
  std::vector<double> observation;
  double raw_reward = 0.0;
  double cost = 0.0;
  bool violation = false;
  bool terminal = false;
  std::map<std::string, double> info;  // diagnostics, e.g. true latent glucose
};

class Environment {
 public:
  virtual ~Environment() = default;

  // Returns the initial observation.
  virtual std::vector<double> reset() = 0;
  virtual EnvStep step(int action) = 0;

  virtual int action_count() const = 0;
  virtual int obs_dim() const = 0;
  virtual FeatureRecipe feature_recipe(int window_len) const = 0;
  virtual std::string name() const = 0;

  // Names of the latent diagnostics exposed through EnvStep::info, in the
  // order they should appear in trace files.
  virtual std::vector<std::string> latent_names() const { return {}; }
};

}  // namespace riskgate
