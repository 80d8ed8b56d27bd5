#pragma once

#include <vector>

#include "riskgate/core.hpp"

namespace riskgate {

// Replay record. shaped_reward is always recomputable as
// raw_reward - lambda_risk * predicted_risk_at_selection.
struct Transition {
  std::vector<double> proxy_features;
  int action = 0;
  double shaped_reward = 0.0;
  double raw_reward = 0.0;
  double cost = 0.0;
  bool violation = false;
  double predicted_risk_at_selection = 0.0;
  std::vector<double> next_proxy_features;
  RiskVector next_risk_vector;
  bool terminal = false;
};

}  // namespace riskgate
