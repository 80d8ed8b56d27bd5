#pragma once

// Evaluation quantities: glycemic metrics, navigation reward/cost metrics
// with normalization, risk-prediction calibration, and ordinal rank
// aggregation. All functions are pure.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace riskgate {

struct GlucoseMetrics {
  double tir_pct = 0.0;            // 70 <= G <= 180, boundaries in range
  double time_below_70_pct = 0.0;  // strict
  double time_above_180_pct = 0.0; // strict
  double mean_bg = 0.0;
  double runtime_s = 0.0;
  double per_step_latency_ms = 0.0;
};

struct NavMetrics {
  double avg_reward = 0.0;
  double avg_cost = 0.0;
  double j_r = 0.0;              // avg_reward / reference_reward
  double j_c = 0.0;              // avg_cost / cost_limit
  double reward_per_cost = 0.0;  // +inf sentinel when avg_cost == 0
  bool infinite_ratio = false;
};

struct RiskCalibration {
  double mean_signed_error = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double pearson_r = 0.0;
  bool pearson_defined = true;  // false when either sequence is constant
  double hellinger = 0.0;
  double pred_exceed_pct = 0.0;
  double posthoc_exceed_pct = 0.0;
  double threshold_agreement_pct = 0.0;
};

// Metrics are computed on the true latent glucose trace, not the noisy CGM.
inline GlucoseMetrics glucose_metrics(std::span<const double> latent_glucose, double runtime_s = 0.0,
                                      double per_step_latency_ms = 0.0) {
  if (latent_glucose.empty()) throw std::invalid_argument("glucose_metrics: empty trace");
  GlucoseMetrics m;
  m.runtime_s = runtime_s;
  m.per_step_latency_ms = per_step_latency_ms;
  std::size_t in = 0, below = 0, above = 0;
  double sum = 0.0;
  for (double g : latent_glucose) {
    if (g < 70.0)
      ++below;
    else if (g > 180.0)
      ++above;
    else
      ++in;
    sum += g;
  }
  const double n = static_cast<double>(latent_glucose.size());
  m.tir_pct = 100.0 * static_cast<double>(in) / n;
  m.time_below_70_pct = 100.0 * static_cast<double>(below) / n;
  m.time_above_180_pct = 100.0 * static_cast<double>(above) / n;
  m.mean_bg = sum / n;
  return m;
}

inline NavMetrics nav_metrics(std::span<const double> episode_rewards, std::span<const double> episode_costs,
                              double reference_reward, double cost_limit = 25.0) {
  if (episode_rewards.empty() || episode_rewards.size() != episode_costs.size())
    throw std::invalid_argument("nav_metrics: need matched, nonempty episode series");
  if (!(reference_reward > 0.0)) throw std::invalid_argument("nav_metrics: reference_reward must be > 0");
  NavMetrics m;
  for (double r : episode_rewards) m.avg_reward += r;
  for (double c : episode_costs) m.avg_cost += c;
  m.avg_reward /= static_cast<double>(episode_rewards.size());
  m.avg_cost /= static_cast<double>(episode_costs.size());
  m.j_r = m.avg_reward / reference_reward;
  m.j_c = m.avg_cost / cost_limit;
  if (m.avg_cost == 0.0) {
    m.infinite_ratio = true;
    m.reward_per_cost = std::numeric_limits<double>::infinity();
  } else {
    m.reward_per_cost = m.avg_reward / m.avg_cost;
  }
  return m;
}

enum class HellingerMode {
  NormalizedTrace,  // sequences renormalized to discrete distributions over steps
  StepwiseBernoulli // mean Hellinger distance between per-step Bernoullis
};

inline double hellinger_distance(std::span<const double> p, std::span<const double> q,
                                 HellingerMode mode = HellingerMode::NormalizedTrace) {
  if (p.size() != q.size() || p.empty()) throw std::invalid_argument("hellinger_distance: bad sequences");
  if (mode == HellingerMode::StepwiseBernoulli) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double pi = std::clamp(p[i], 0.0, 1.0);
      const double qi = std::clamp(q[i], 0.0, 1.0);
      const double bc = std::sqrt(pi * qi) + std::sqrt((1.0 - pi) * (1.0 - qi));
      acc += std::sqrt(std::max(0.0, 1.0 - bc));
    }
    return acc / static_cast<double>(p.size());
  }
  double sp = 0.0, sq = 0.0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  if (sp == 0.0 && sq == 0.0) return 0.0;
  if (sp == 0.0 || sq == 0.0) return 1.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::sqrt(p[i] / sp) - std::sqrt(q[i] / sq);
    acc += d * d;
  }
  return std::sqrt(acc) / std::sqrt(2.0);
}

inline RiskCalibration risk_calibration(std::span<const double> predicted, std::span<const double> posthoc,
                                        double r_max,
                                        HellingerMode mode = HellingerMode::NormalizedTrace) {
  if (predicted.size() != posthoc.size()) throw std::invalid_argument("risk_calibration: length mismatch");
  if (predicted.size() < 2) throw std::invalid_argument("risk_calibration: need at least 2 samples");
  RiskCalibration c;
  const double n = static_cast<double>(predicted.size());
  double mp = 0.0, mq = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - posthoc[i];
    c.mean_signed_error += d;
    c.mae += std::fabs(d);
    c.rmse += d * d;
    mp += predicted[i];
    mq += posthoc[i];
    if (predicted[i] > r_max) c.pred_exceed_pct += 1.0;
    if (posthoc[i] > r_max) c.posthoc_exceed_pct += 1.0;
    if ((predicted[i] > r_max) == (posthoc[i] > r_max)) c.threshold_agreement_pct += 1.0;
  }
  c.mean_signed_error /= n;
  c.mae /= n;
  c.rmse = std::sqrt(c.rmse / n);
  c.pred_exceed_pct *= 100.0 / n;
  c.posthoc_exceed_pct *= 100.0 / n;
  c.threshold_agreement_pct *= 100.0 / n;
  mp /= n;
  mq /= n;

  double vp = 0.0, vq = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double a = predicted[i] - mp;
    const double b = posthoc[i] - mq;
    vp += a * a;
    vq += b * b;
    cov += a * b;
  }
  if (vp <= 0.0 || vq <= 0.0) {
    c.pearson_defined = false;
    c.pearson_r = 0.0;
  } else {
    c.pearson_r = cov / std::sqrt(vp * vq);
  }
  c.hellinger = hellinger_distance(predicted, posthoc, mode);
  return c;
}

// Ordinal ranks per metric (1 = best), ties averaged, then the mean across
// metrics. directions_higher_better[j] says whether larger is better for
// metric column j.
inline std::vector<double> mean_rank(const std::vector<std::vector<double>>& table,
                                     const std::vector<bool>& directions_higher_better) {
  if (table.size() < 2) throw std::invalid_argument("mean_rank: need at least two algorithms");
  const std::size_t n_metrics = directions_higher_better.size();
  for (const auto& row : table)
    if (row.size() != n_metrics) throw std::invalid_argument("mean_rank: ragged table");

  std::vector<double> acc(table.size(), 0.0);
  for (std::size_t j = 0; j < n_metrics; ++j) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      double better = 0.0, equal = 0.0;
      for (std::size_t k = 0; k < table.size(); ++k) {
        if (k == i) continue;
        const double a = table[i][j], b = table[k][j];
        if (b == a) {
          equal += 1.0;
        } else if (directions_higher_better[j] ? (b > a) : (b < a)) {
          better += 1.0;
        }
      }
      // average-rank convention for ties
      acc[i] += 1.0 + better + equal / 2.0;
    }
  }
  for (auto& v : acc) v /= static_cast<double>(n_metrics);
  return acc;
}

}  // namespace riskgate
