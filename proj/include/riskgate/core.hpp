#pragma once

// Decision-time mathematics: proxy-state construction from a finite history
// window, risk-gated value mixing, safe-set filtering and action selection.
// Everything in this header is pure and reentrant: no learning, no I/O, no
// environment knowledge.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace riskgate {

// Marks window padding slots (before enough history exists). Encodes to zero
// dose magnitude and an all-zero one-hot.
inline constexpr int kNullAction = -1;

// One slot of the history window: an observation together with the action
// executed just before it was seen.
struct WindowEntry {
  std::vector<double> obs;
  int action = kNullAction;
};

struct ProxyState {
  std::vector<double> features;
  int window_len = 0;
  // Raw window retained for diagnostics and rule-based policies.
  std::vector<WindowEntry> raw_window;
};

// Per-candidate-action predicted violation probability.
struct RiskVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

struct GateConfig {
  double r_max = 0.25;       // admissibility threshold
  double lambda_risk = 0.1;  // reward-shaping penalty weight
  int window_len = 8;
  int ensemble_size = 5;
  double discount = 0.95;

  const GateConfig& validated() const {
    if (!(r_max >= 0.0 && r_max <= 1.0)) throw std::invalid_argument("GateConfig: r_max must lie in [0,1]");
    if (!(lambda_risk >= 0.0)) throw std::invalid_argument("GateConfig: lambda_risk must be >= 0");
    if (window_len < 1) throw std::invalid_argument("GateConfig: window_len must be >= 1");
    if (ensemble_size < 1) throw std::invalid_argument("GateConfig: ensemble_size must be >= 1");
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("GateConfig: discount must lie in (0,1)");
    return *this;
  }
};

struct GatedEvaluation {
  std::vector<double> q_plus;
  std::vector<double> q_minus;
  std::vector<double> q_gate;
  std::vector<bool> safe_mask;
  int chosen_action = 0;
  bool fallback_used = false;
};

// ---------------------------------------------------------------------------
// Feature recipes. The proxy is deliberately domain-specific; each
// environment supplies the recipe for turning its window into features.

// Glucose: [latest CGM, CGM trend (mg/dL per minute), previous bolus (units),
// insulin-on-board = geometric decay sum of recent doses, newest weight 1].
struct GlucoseFeatureRecipe {
  std::vector<double> action_units;  // dose per action index
  double iob_decay = 0.5;            // per decision step
  double step_minutes = 3.0;
};

// Navigation: flattened window of observation vectors concatenated with
// one-hot encodings of the recent actions.
struct NavFeatureRecipe {
  int obs_dim = 0;
  int action_count = 0;
};

// Discrete windows over small observation/action alphabets: one-hot of the
// exact window index, i.e. linear-in-table features. Observations must be
// one-hot vectors of width n_obs; the padding action occupies its own slot.
struct TabularWindowRecipe {
  int n_obs = 0;
  int action_count = 0;

  int codes_per_entry() const { return n_obs * (action_count + 1); }
};

using FeatureRecipe = std::variant<GlucoseFeatureRecipe, NavFeatureRecipe, TabularWindowRecipe>;

inline int feature_dim(const FeatureRecipe& recipe, int window_len) {
  if (std::holds_alternative<GlucoseFeatureRecipe>(recipe)) return 4;
  if (const auto* tab = std::get_if<TabularWindowRecipe>(&recipe)) {
    long dim = 1;
    for (int i = 0; i < window_len; ++i) {
      dim *= tab->codes_per_entry();
      if (dim > 1000000) throw std::invalid_argument("TabularWindowRecipe: window index space too large");
    }
    return static_cast<int>(dim);
  }
  const auto& nav = std::get<NavFeatureRecipe>(recipe);
  return window_len * (nav.obs_dim + nav.action_count);
}

namespace detail {

inline double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::domain_error(std::string("non-finite value in ") + what);
}

}  // namespace detail

// Builds the proxy state from the most recent window entries (oldest first).
// Shorter histories are padded by repeating the earliest observation with a
// null action; a window longer than `window_len` is a structural error.
inline ProxyState build_proxy_state(const std::vector<WindowEntry>& window, int window_len,
                                    const FeatureRecipe& recipe) {
  if (window_len < 1) throw std::invalid_argument("build_proxy_state: window_len must be >= 1");
  if (window.empty()) throw std::invalid_argument("build_proxy_state: window is empty");
  if (static_cast<int>(window.size()) > window_len)
    throw std::invalid_argument("build_proxy_state: window longer than window_len");

  ProxyState st;
  st.window_len = window_len;
  st.raw_window.reserve(window_len);
  const int pad = window_len - static_cast<int>(window.size());
  for (int i = 0; i < pad; ++i) st.raw_window.push_back({window.front().obs, kNullAction});
  for (const auto& e : window) st.raw_window.push_back(e);

  for (const auto& e : st.raw_window) {
    if (e.obs.empty()) throw std::invalid_argument("build_proxy_state: empty observation");
    for (double v : e.obs) detail::check_finite(v, "window observation");
  }

  if (const auto* g = std::get_if<GlucoseFeatureRecipe>(&recipe)) {
    const auto units = [&](int a) -> double {
      if (a == kNullAction) return 0.0;
      if (a < 0 || a >= static_cast<int>(g->action_units.size()))
        throw std::invalid_argument("build_proxy_state: action index outside recipe grid");
      return g->action_units[static_cast<std::size_t>(a)];
    };
    const double cgm_now = st.raw_window.back().obs[0];
    const double cgm_old = st.raw_window.front().obs[0];
    const int span = window_len - 1;
    const double trend = span > 0 ? (cgm_now - cgm_old) / (span * g->step_minutes) : 0.0;
    const double last_dose = units(st.raw_window.back().action);
    double iob = 0.0;
    double w = 1.0;
    for (int j = 0; j < window_len; ++j) {  // newest first
      iob += units(st.raw_window[static_cast<std::size_t>(window_len - 1 - j)].action) * w;
      w *= g->iob_decay;
    }
    st.features = {cgm_now, trend, last_dose, iob};
  } else if (const auto* tab = std::get_if<TabularWindowRecipe>(&recipe)) {
    long index = 0;
    for (const auto& e : st.raw_window) {
      if (static_cast<int>(e.obs.size()) != tab->n_obs)
        throw std::invalid_argument("build_proxy_state: observation dimension mismatch");
      int obs_idx = -1;
      for (int i = 0; i < tab->n_obs; ++i)
        if (e.obs[static_cast<std::size_t>(i)] == 1.0) obs_idx = i;
      if (obs_idx < 0) throw std::invalid_argument("build_proxy_state: observation is not one-hot");
      if (e.action < kNullAction || e.action >= tab->action_count)
        throw std::invalid_argument("build_proxy_state: action index outside alphabet");
      index = index * tab->codes_per_entry() + obs_idx * (tab->action_count + 1) + (e.action + 1);
    }
    st.features.assign(static_cast<std::size_t>(feature_dim(recipe, window_len)), 0.0);
    st.features[static_cast<std::size_t>(index)] = 1.0;
  } else {
    const auto& n = std::get<NavFeatureRecipe>(recipe);
    st.features.reserve(static_cast<std::size_t>(window_len) * (n.obs_dim + n.action_count));
    for (const auto& e : st.raw_window) {
      if (static_cast<int>(e.obs.size()) != n.obs_dim)
        throw std::invalid_argument("build_proxy_state: observation dimension mismatch");
      st.features.insert(st.features.end(), e.obs.begin(), e.obs.end());
      for (int a = 0; a < n.action_count; ++a) st.features.push_back(e.action == a ? 1.0 : 0.0);
    }
  }
  return st;
}

struct GateValues {
  std::vector<double> q_plus;
  std::vector<double> q_minus;
  std::vector<double> q_gate;
};

// Mixes the ensemble envelopes by predicted risk:
//   q_gate[a] = (1 - rho[a]) * max_m q[m][a] + rho[a] * min_m q[m][a].
// Risks are clamped to [0,1] before mixing.
inline GateValues gate_values(const std::vector<std::vector<double>>& q_per_member,
                              const RiskVector& risks) {
  if (q_per_member.empty()) throw std::invalid_argument("gate_values: empty ensemble");
  const std::size_t n_actions = risks.size();
  if (n_actions == 0) throw std::invalid_argument("gate_values: empty risk vector");
  for (const auto& row : q_per_member) {
    if (row.size() != n_actions) throw std::invalid_argument("gate_values: member row size mismatch");
    for (double q : row) detail::check_finite(q, "member q value");
  }
  for (double r : risks.values) detail::check_finite(r, "risk vector");

  GateValues out;
  out.q_plus.resize(n_actions);
  out.q_minus.resize(n_actions);
  out.q_gate.resize(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) {
    double qp = q_per_member[0][a];
    double qm = qp;
    for (std::size_t m = 1; m < q_per_member.size(); ++m) {
      qp = std::max(qp, q_per_member[m][a]);
      qm = std::min(qm, q_per_member[m][a]);
    }
    const double rho = detail::clamp01(risks[a]);
    out.q_plus[a] = qp;
    out.q_minus[a] = qm;
    out.q_gate[a] = (1.0 - rho) * qp + rho * qm;
  }
  return out;
}

struct Selection {
  int action = 0;
  bool fallback_used = false;
};

// Argmax of q_gate over the admissible set {a : rho[a] <= r_max}; when the
// set is empty, the minimum-risk action. Ties break to the lowest index, so
// selection is total and deterministic.
inline Selection select_action(std::span<const double> q_gate, const RiskVector& risks, double r_max) {
  const std::size_t n = q_gate.size();
  if (n == 0) throw std::invalid_argument("select_action: empty action set");
  if (risks.size() != n) throw std::invalid_argument("select_action: risk/q size mismatch");
  for (double q : q_gate) detail::check_finite(q, "q_gate");
  for (double r : risks.values) detail::check_finite(r, "risk vector");

  int best = -1;
  for (std::size_t a = 0; a < n; ++a) {
    if (detail::clamp01(risks[a]) > r_max) continue;
    if (best < 0 || q_gate[a] > q_gate[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  }
  if (best >= 0) return {best, false};

  int arg = 0;
  for (std::size_t a = 1; a < n; ++a) {
    if (detail::clamp01(risks[a]) < detail::clamp01(risks[static_cast<std::size_t>(arg)]))
      arg = static_cast<int>(a);
  }
  return {arg, true};
}

// Reward used for critic learning: task reward minus the risk penalty of the
// executed action.
inline double shaped_reward(double raw_reward, double predicted_risk, double lambda_risk) {
  if (!(predicted_risk >= 0.0 && predicted_risk <= 1.0))
    throw std::invalid_argument("shaped_reward: predicted_risk outside [0,1]");
  if (!(lambda_risk >= 0.0)) throw std::invalid_argument("shaped_reward: lambda_risk must be >= 0");
  return raw_reward - lambda_risk * predicted_risk;
}

// Full decision-time evaluation in one call.
inline GatedEvaluation evaluate_gate(const std::vector<std::vector<double>>& q_per_member,
                                     const RiskVector& risks, double r_max) {
  GateValues gv = gate_values(q_per_member, risks);
  const Selection sel = select_action(gv.q_gate, risks, r_max);
  GatedEvaluation ev;
  ev.q_plus = std::move(gv.q_plus);
  ev.q_minus = std::move(gv.q_minus);
  ev.q_gate = std::move(gv.q_gate);
  ev.safe_mask.resize(risks.size());
  for (std::size_t a = 0; a < risks.size(); ++a)
    ev.safe_mask[a] = detail::clamp01(risks[a]) <= r_max;
  ev.chosen_action = sel.action;
  ev.fallback_used = sel.fallback_used;
  return ev;
}

}  // namespace riskgate
