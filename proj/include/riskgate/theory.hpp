#pragma once

// Executable checks of the formal framework on the tabular oracle POMDP:
//
//  * Oracle fixed point: exact value iteration over the finite belief MDP
//    induced by the block-structured model (beliefs are determined by the
//    last (obs, action, obs) triple), with the hard safe-set restriction
//    under the true risk.
//  * Proxy fixed point: value iteration over finite windows of (action, obs)
//    pairs, with stationary-smoothed rewards, a Lagrangian risk penalty and
//    the safe-restricted greedy step under a supplied risk table.
//  * Contraction, ensemble-envelope, policy agreement / intervention and
//    error-bound checks built on those two solvers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "riskgate/envs/tabular.hpp"
#include "riskgate/rng.hpp"

namespace riskgate::theory {

inline constexpr int kS = TabularPomdpSpec::n_states;
inline constexpr int kA = TabularPomdpSpec::n_actions;
inline constexpr int kO = TabularPomdpSpec::n_obs;

// Q table over an enumerated proxy-state (or belief-state) index.
struct TabularQ {
  std::vector<std::array<double, kA>> q;

  double sup_diff(const TabularQ& other) const {
    if (q.size() != other.q.size()) throw std::invalid_argument("TabularQ: size mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      for (int a = 0; a < kA; ++a)
        d = std::max(d, std::fabs(q[i][static_cast<std::size_t>(a)] -
                                  other.q[i][static_cast<std::size_t>(a)]));
    return d;
  }
};

using RiskTable = std::vector<std::array<double, kA>>;

namespace detail {

inline double tv_distance(const std::array<double, kS>& p, const std::array<double, kS>& q) {
  double d = 0.0;
  for (int s = 0; s < kS; ++s) d += std::fabs(p[static_cast<std::size_t>(s)] - q[static_cast<std::size_t>(s)]);
  return 0.5 * d;
}

// Greedy continuation value restricted to {a : risk[a] <= tau}; minimum-risk
// action when the set is empty. Non-expansive in Q, which is what the
// contraction check exercises.
inline double restricted_max(const std::array<double, kA>& qrow, const std::array<double, kA>& risk,
                             double tau) {
  int best = -1;
  for (int a = 0; a < kA; ++a) {
    if (risk[static_cast<std::size_t>(a)] > tau) continue;
    if (best < 0 || qrow[static_cast<std::size_t>(a)] > qrow[static_cast<std::size_t>(best)]) best = a;
  }
  if (best >= 0) return qrow[static_cast<std::size_t>(best)];
  int arg = 0;
  for (int a = 1; a < kA; ++a)
    if (risk[static_cast<std::size_t>(a)] < risk[static_cast<std::size_t>(arg)]) arg = a;
  return qrow[static_cast<std::size_t>(arg)];
}

inline int restricted_argmax(const std::array<double, kA>& qrow, const std::array<double, kA>& risk,
                             double tau, bool* fallback = nullptr) {
  if (fallback) *fallback = false;
  int best = -1;
  for (int a = 0; a < kA; ++a) {
    if (risk[static_cast<std::size_t>(a)] > tau) continue;
    if (best < 0 || qrow[static_cast<std::size_t>(a)] > qrow[static_cast<std::size_t>(best)]) best = a;
  }
  if (best >= 0) return best;
  if (fallback) *fallback = true;
  int arg = 0;
  for (int a = 1; a < kA; ++a)
    if (risk[static_cast<std::size_t>(a)] < risk[static_cast<std::size_t>(arg)]) arg = a;
  return arg;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Oracle belief MDP.
//
// Because transition rows depend on the latent state only through its
// observation-determined block, the belief after any history of length >= 2
// equals  b(s') proportional to T(s' | block(o_prev), a_prev) * omega(o | s'),
// i.e. it is indexed by the last (o_prev, a_prev, o) triple. The oracle over
// full histories therefore reduces to an exact finite MDP over these triples.

struct OracleModel {
  TabularPomdpSpec spec;
  double beta = 0.9;
  std::vector<std::array<int, 3>> nodes;  // (o_prev, a_prev, o)
  std::vector<std::array<double, kS>> belief;
  std::vector<std::array<double, kA>> exp_reward;
  std::vector<std::array<double, kA>> risk;  // true next-step violation probability
  // kernel[n][a][o''] = probability; successor[n][a][o''] = node index or -1
  std::vector<std::array<std::array<double, kO>, kA>> kernel;
  std::vector<std::array<std::array<int, kO>, kA>> successor;

  int node_index(int o_prev, int a_prev, int o) const {
    const auto it = index_.find((o_prev * kA + a_prev) * kO + o);
    return it == index_.end() ? -1 : it->second;
  }

  std::map<int, int> index_;
};

inline OracleModel build_oracle_model(const TabularPomdpSpec& spec, double beta) {
  OracleModel m;
  m.spec = spec;
  m.beta = beta;

  // Enumerate triples with positive flow: block(o_prev) determines the row.
  for (int o_prev = 0; o_prev < kO; ++o_prev) {
    const int blk = spec.obs_block[static_cast<std::size_t>(o_prev)];
    int src = -1;  // any state in that block; rows are identical within it
    for (int s = 0; s < kS; ++s)
      if (spec.state_block[static_cast<std::size_t>(s)] == blk) src = s;
    for (int a = 0; a < kA; ++a) {
      for (int o = 0; o < kO; ++o) {
        std::array<double, kS> b{};
        double norm = 0.0;
        for (int sp = 0; sp < kS; ++sp) {
          const double w = spec.T[static_cast<std::size_t>(src)][static_cast<std::size_t>(a)]
                                 [static_cast<std::size_t>(sp)] *
                           spec.omega[static_cast<std::size_t>(sp)][static_cast<std::size_t>(o)];
          b[static_cast<std::size_t>(sp)] = w;
          norm += w;
        }
        if (norm <= 0.0) continue;
        for (auto& v : b) v /= norm;
        const int id = static_cast<int>(m.nodes.size());
        m.index_[(o_prev * kA + a) * kO + o] = id;
        m.nodes.push_back({o_prev, a, o});
        m.belief.push_back(b);
      }
    }
  }

  const int n = static_cast<int>(m.nodes.size());
  m.exp_reward.resize(static_cast<std::size_t>(n));
  m.risk.resize(static_cast<std::size_t>(n));
  m.kernel.resize(static_cast<std::size_t>(n));
  m.successor.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& b = m.belief[static_cast<std::size_t>(i)];
    const int o_now = m.nodes[static_cast<std::size_t>(i)][2];
    for (int a = 0; a < kA; ++a) {
      double er = 0.0, rk = 0.0;
      for (int s = 0; s < kS; ++s) {
        er += b[static_cast<std::size_t>(s)] *
              spec.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
        rk += b[static_cast<std::size_t>(s)] * spec.next_step_risk(s, a);
      }
      m.exp_reward[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = er;
      m.risk[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = rk;
      for (int o2 = 0; o2 < kO; ++o2) {
        // P(o'' | belief, a): the belief is supported on block(o_now), so the
        // next-state distribution is the block row.
        double p = 0.0;
        int src = -1;
        const int blk = spec.obs_block[static_cast<std::size_t>(o_now)];
        for (int s = 0; s < kS; ++s)
          if (spec.state_block[static_cast<std::size_t>(s)] == blk) src = s;
        for (int sp = 0; sp < kS; ++sp)
          p += spec.T[static_cast<std::size_t>(src)][static_cast<std::size_t>(a)][static_cast<std::size_t>(sp)] *
               spec.omega[static_cast<std::size_t>(sp)][static_cast<std::size_t>(o2)];
        m.kernel[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)][static_cast<std::size_t>(o2)] = p;
        m.successor[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)][static_cast<std::size_t>(o2)] =
            p > 0.0 ? m.node_index(o_now, a, o2) : -1;
      }
    }
  }
  return m;
}

// One application of the oracle operator (restricted greedy step under the
// true risk).
inline TabularQ apply_oracle_operator(const OracleModel& m, const TabularQ& q, double tau) {
  TabularQ out;
  out.q.resize(m.nodes.size());
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    for (int a = 0; a < kA; ++a) {
      double acc = m.exp_reward[i][static_cast<std::size_t>(a)];
      double cont = 0.0;
      for (int o2 = 0; o2 < kO; ++o2) {
        const double p = m.kernel[i][static_cast<std::size_t>(a)][static_cast<std::size_t>(o2)];
        if (p <= 0.0) continue;
        const int j = m.successor[i][static_cast<std::size_t>(a)][static_cast<std::size_t>(o2)];
        cont += p * detail::restricted_max(q.q[static_cast<std::size_t>(j)],
                                           m.risk[static_cast<std::size_t>(j)], tau);
      }
      out.q[i][static_cast<std::size_t>(a)] = acc + m.beta * cont;
    }
  }
  return out;
}

inline TabularQ oracle_fixed_point(const OracleModel& m, double tau, double gap_tol = 1e-13,
                                   int max_iters = 200000) {
  TabularQ q;
  q.q.assign(m.nodes.size(), {});
  for (int it = 0; it < max_iters; ++it) {
    TabularQ next = apply_oracle_operator(m, q, tau);
    const double gap = next.sup_diff(q);
    q = std::move(next);
    if (gap < gap_tol) return q;
  }
  throw std::runtime_error("oracle_fixed_point: no convergence within iteration cap");
}

// ---------------------------------------------------------------------------
// Window proxy model. Proxy states are windows of W (action, obs) pairs,
// oldest first, exactly the content of the controller's history window. The
// latent posterior p(s | w) is computed under the stationary law of the
// uniform-policy chain, which is the measure the replay stream approximates.

struct WindowModel {
  TabularPomdpSpec spec;
  int window_len = 1;
  double beta = 0.9;
  std::vector<std::vector<std::array<int, 2>>> windows;  // (action, obs) pairs
  std::vector<double> weight;                            // stationary window measure
  std::vector<std::array<double, kS>> p_latent;
  std::vector<std::array<double, kA>> exp_reward;
  RiskTable true_risk;
  std::vector<std::array<std::array<double, kO>, kA>> obs_prob;  // P(o' | w, a)
  std::vector<std::array<std::array<int, kO>, kA>> successor;

  int size() const { return static_cast<int>(windows.size()); }

  int find(const std::vector<std::array<int, 2>>& w) const {
    const auto it = index_.find(key(w));
    return it == index_.end() ? -1 : it->second;
  }

  static long key(const std::vector<std::array<int, 2>>& w) {
    long k = 0;
    for (const auto& p : w) k = k * (kA * kO) + p[0] * kO + p[1];
    return k;
  }

  std::map<long, int> index_;
};

inline WindowModel build_window_model(const TabularPomdpSpec& spec, int window_len, double beta) {
  if (window_len < 1) throw std::invalid_argument("build_window_model: window_len must be >= 1");
  WindowModel m;
  m.spec = spec;
  m.window_len = window_len;
  m.beta = beta;

  // Stationary latent distribution under the uniform policy.
  std::array<double, kS> mu{};
  mu.fill(1.0 / kS);
  for (int it = 0; it < 2000; ++it) {
    std::array<double, kS> next{};
    for (int s = 0; s < kS; ++s)
      for (int a = 0; a < kA; ++a)
        for (int sp = 0; sp < kS; ++sp)
          next[static_cast<std::size_t>(sp)] +=
              mu[static_cast<std::size_t>(s)] / kA *
              spec.T[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)][static_cast<std::size_t>(sp)];
    mu = next;
  }

  // Joint (latent, window) law built by exact forward extension from mu.
  std::map<long, std::array<double, kS>> joint;
  joint[0] = mu;  // empty window
  for (int step = 0; step < window_len; ++step) {
    std::map<long, std::array<double, kS>> next;
    for (const auto& [k, dist] : joint) {
      for (int s = 0; s < kS; ++s) {
        const double ws = dist[static_cast<std::size_t>(s)];
        if (ws <= 0.0) continue;
        for (int a = 0; a < kA; ++a) {
          for (int sp = 0; sp < kS; ++sp) {
            const double pt =
                spec.T[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)][static_cast<std::size_t>(sp)];
            if (pt <= 0.0) continue;
            for (int o = 0; o < kO; ++o) {
              const double po = spec.omega[static_cast<std::size_t>(sp)][static_cast<std::size_t>(o)];
              if (po <= 0.0) continue;
              const long nk = k * (kA * kO) + a * kO + o;
              next[nk][static_cast<std::size_t>(sp)] += ws / kA * pt * po;
            }
          }
        }
      }
    }
    joint = std::move(next);
  }

  for (const auto& [k, dist] : joint) {
    double mass = 0.0;
    for (double v : dist) mass += v;
    if (mass <= 1e-14) continue;
    std::vector<std::array<int, 2>> w(static_cast<std::size_t>(window_len));
    long kk = k;
    for (int i = window_len - 1; i >= 0; --i) {
      const int code = static_cast<int>(kk % (kA * kO));
      kk /= (kA * kO);
      w[static_cast<std::size_t>(i)] = {code / kO, code % kO};
    }
    std::array<double, kS> p{};
    for (int s = 0; s < kS; ++s) p[static_cast<std::size_t>(s)] = dist[static_cast<std::size_t>(s)] / mass;
    const int id = m.size();
    m.index_[WindowModel::key(w)] = id;
    m.windows.push_back(std::move(w));
    m.weight.push_back(mass);
    m.p_latent.push_back(p);
  }

  const int n = m.size();
  m.exp_reward.resize(static_cast<std::size_t>(n));
  m.true_risk.resize(static_cast<std::size_t>(n));
  m.obs_prob.resize(static_cast<std::size_t>(n));
  m.successor.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& p = m.p_latent[static_cast<std::size_t>(i)];
    for (int a = 0; a < kA; ++a) {
      double er = 0.0, rk = 0.0;
      std::array<double, kO> po{};
      for (int s = 0; s < kS; ++s) {
        const double ps = p[static_cast<std::size_t>(s)];
        if (ps <= 0.0) continue;
        er += ps * m.spec.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
        rk += ps * m.spec.next_step_risk(s, a);
        for (int sp = 0; sp < kS; ++sp) {
          const double pt =
              m.spec.T[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)][static_cast<std::size_t>(sp)];
          if (pt <= 0.0) continue;
          for (int o = 0; o < kO; ++o)
            po[static_cast<std::size_t>(o)] +=
                ps * pt * m.spec.omega[static_cast<std::size_t>(sp)][static_cast<std::size_t>(o)];
        }
      }
      m.exp_reward[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = er;
      m.true_risk[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = rk;
      for (int o = 0; o < kO; ++o) {
        m.obs_prob[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)][static_cast<std::size_t>(o)] =
            po[static_cast<std::size_t>(o)];
        int succ = -1;
        if (po[static_cast<std::size_t>(o)] > 0.0) {
          auto w = m.windows[static_cast<std::size_t>(i)];
          w.erase(w.begin());
          w.push_back({a, o});
          succ = m.find(w);
          if (succ < 0) throw std::runtime_error("build_window_model: successor window missing");
        }
        m.successor[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)][static_cast<std::size_t>(o)] = succ;
      }
    }
  }
  return m;
}

// One application of the proxy operator: stationary-smoothed reward, the
// Lagrangian penalty lambda * (rho_hat - tau), and the safe-restricted
// greedy continuation under rho_hat.
inline TabularQ apply_proxy_operator(const WindowModel& m, const TabularQ& q, const RiskTable& rho_hat,
                                     double tau, double lambda) {
  if (static_cast<int>(rho_hat.size()) != m.size())
    throw std::invalid_argument("apply_proxy_operator: risk table size mismatch");
  TabularQ out;
  out.q.resize(static_cast<std::size_t>(m.size()));
  for (std::size_t i = 0; i < out.q.size(); ++i) {
    for (int a = 0; a < kA; ++a) {
      double acc = m.exp_reward[i][static_cast<std::size_t>(a)] -
                   lambda * (rho_hat[i][static_cast<std::size_t>(a)] - tau);
      double cont = 0.0;
      for (int o = 0; o < kO; ++o) {
        const double p = m.obs_prob[i][static_cast<std::size_t>(a)][static_cast<std::size_t>(o)];
        if (p <= 0.0) continue;
        const int j = m.successor[i][static_cast<std::size_t>(a)][static_cast<std::size_t>(o)];
        cont += p * detail::restricted_max(q.q[static_cast<std::size_t>(j)],
                                           rho_hat[static_cast<std::size_t>(j)], tau);
      }
      out.q[i][static_cast<std::size_t>(a)] = acc + m.beta * cont;
    }
  }
  return out;
}

inline TabularQ proxy_fixed_point(const WindowModel& m, const RiskTable& rho_hat, double tau,
                                  double lambda, double gap_tol = 1e-13, int max_iters = 200000) {
  TabularQ q;
  q.q.assign(static_cast<std::size_t>(m.size()), {});
  for (int it = 0; it < max_iters; ++it) {
    TabularQ next = apply_proxy_operator(m, q, rho_hat, tau, lambda);
    const double gap = next.sup_diff(q);
    q = std::move(next);
    if (gap < gap_tol) return q;
  }
  throw std::runtime_error("proxy_fixed_point: no convergence within iteration cap");
}

// ---------------------------------------------------------------------------
// Oracle <-> window comparisons.

// Maps a window to its belief node (needs W >= 2).
inline int window_to_node(const OracleModel& om, const std::vector<std::array<int, 2>>& w) {
  const std::size_t n = w.size();
  if (n < 2) throw std::invalid_argument("window_to_node: window too short");
  return om.node_index(w[n - 2][1], w[n - 1][0], w[n - 1][1]);
}

// Sup-norm gap between the oracle and proxy fixed points over matched
// states. For W == 1 each oracle node projects to the window formed by its
// last (action, obs) pair.
inline double value_gap(const OracleModel& om, const TabularQ& oracle_q, const WindowModel& wm,
                        const TabularQ& proxy_q) {
  double gap = 0.0;
  if (wm.window_len >= 2) {
    for (int i = 0; i < wm.size(); ++i) {
      const int node = window_to_node(om, wm.windows[static_cast<std::size_t>(i)]);
      if (node < 0) throw std::runtime_error("value_gap: window without oracle node");
      for (int a = 0; a < kA; ++a)
        gap = std::max(gap, std::fabs(oracle_q.q[static_cast<std::size_t>(node)][static_cast<std::size_t>(a)] -
                                      proxy_q.q[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]));
    }
  } else {
    for (std::size_t n = 0; n < om.nodes.size(); ++n) {
      const std::vector<std::array<int, 2>> w = {{om.nodes[n][1], om.nodes[n][2]}};
      const int i = wm.find(w);
      if (i < 0) continue;  // transient node with no stationary window mass
      for (int a = 0; a < kA; ++a)
        gap = std::max(gap, std::fabs(oracle_q.q[n][static_cast<std::size_t>(a)] -
                                      proxy_q.q[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]));
    }
  }
  return gap;
}

// Maximum total-variation distance between the exact belief and the
// stationary window posterior, over matched states: the measured analogue of
// the exponential-forgetting gap at this window length.
inline double max_tv_gap(const OracleModel& om, const WindowModel& wm) {
  double tv = 0.0;
  if (wm.window_len >= 2) {
    for (int i = 0; i < wm.size(); ++i) {
      const int node = window_to_node(om, wm.windows[static_cast<std::size_t>(i)]);
      if (node < 0) continue;
      tv = std::max(tv, detail::tv_distance(om.belief[static_cast<std::size_t>(node)],
                                            wm.p_latent[static_cast<std::size_t>(i)]));
    }
  } else {
    for (std::size_t n = 0; n < om.nodes.size(); ++n) {
      const std::vector<std::array<int, 2>> w = {{om.nodes[n][1], om.nodes[n][2]}};
      const int i = wm.find(w);
      if (i < 0) continue;
      tv = std::max(tv, detail::tv_distance(om.belief[n], wm.p_latent[static_cast<std::size_t>(i)]));
    }
  }
  return tv;
}

// Dual value g(lambda): unconstrained optimum of the lambda-penalized proxy
// problem, averaged over the stationary window measure. The grid argmin
// approximates the optimal multiplier.
inline double dual_value(const WindowModel& m, double tau, double lambda) {
  TabularQ q;
  q.q.assign(static_cast<std::size_t>(m.size()), {});
  for (int it = 0; it < 100000; ++it) {
    TabularQ next;
    next.q.resize(static_cast<std::size_t>(m.size()));
    for (std::size_t i = 0; i < next.q.size(); ++i) {
      for (int a = 0; a < kA; ++a) {
        double acc = m.exp_reward[i][static_cast<std::size_t>(a)] -
                     lambda * (m.true_risk[i][static_cast<std::size_t>(a)] - tau);
        double cont = 0.0;
        for (int o = 0; o < kO; ++o) {
          const double p = m.obs_prob[i][static_cast<std::size_t>(a)][static_cast<std::size_t>(o)];
          if (p <= 0.0) continue;
          const int j = m.successor[i][static_cast<std::size_t>(a)][static_cast<std::size_t>(o)];
          const auto& row = q.q[static_cast<std::size_t>(j)];
          cont += p * *std::max_element(row.begin(), row.end());
        }
        next.q[i][static_cast<std::size_t>(a)] = acc + m.beta * cont;
      }
    }
    const double gap = next.sup_diff(q);
    q = std::move(next);
    if (gap < 1e-12) break;
  }
  double g = 0.0;
  double wsum = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    const auto& row = q.q[static_cast<std::size_t>(i)];
    g += m.weight[static_cast<std::size_t>(i)] * *std::max_element(row.begin(), row.end());
    wsum += m.weight[static_cast<std::size_t>(i)];
  }
  return g / wsum;
}

inline double lambda_star_grid(const WindowModel& m, double tau, double lo = 0.0, double hi = 3.0,
                               double step = 0.05) {
  double best_l = lo;
  double best_g = std::numeric_limits<double>::infinity();
  for (double l = lo; l <= hi + 1e-12; l += step) {
    const double g = dual_value(m, tau, l);
    if (g < best_g) {
      best_g = g;
      best_l = l;
    }
  }
  return best_l;
}

// Empirical risk table estimated from n uniform-policy environment steps;
// unseen cells fall back to 0.5. Returns the table and the measured sup
// error against the exact window risk.
struct EmpiricalRisk {
  RiskTable table;
  double sup_error = 0.0;
  int seen_cells = 0;
  int total_cells = 0;
};

inline EmpiricalRisk estimate_risk_from_samples(const WindowModel& m, int n_samples, std::uint64_t seed) {
  TabularPomdpEnv env(m.spec, seed);
  Rng policy_rng(Rng::derive(seed, 77));
  std::vector<std::array<int, 2>> window;
  std::vector<std::array<long, kA>> hits(static_cast<std::size_t>(m.size()));
  std::vector<std::array<long, kA>> counts(static_cast<std::size_t>(m.size()));
  for (auto& row : hits) row.fill(0);
  for (auto& row : counts) row.fill(0);

  env.reset();
  int prev_obs = env.current_obs();
  // burn-in so the window is full and near-stationary
  for (int t = 0; t < 100 + m.window_len; ++t) {
    const int a = policy_rng.uniform_int(kA);
    const EnvStep es = env.step(a);
    window.push_back({a, env.current_obs()});
    if (static_cast<int>(window.size()) > m.window_len) window.erase(window.begin());
    (void)es;
    prev_obs = env.current_obs();
  }
  (void)prev_obs;

  int collected = 0;
  while (collected < n_samples) {
    const int idx = m.find(window);
    const int a = policy_rng.uniform_int(kA);
    const EnvStep es = env.step(a);
    if (idx >= 0) {
      counts[static_cast<std::size_t>(idx)][static_cast<std::size_t>(a)] += 1;
      if (es.violation) hits[static_cast<std::size_t>(idx)][static_cast<std::size_t>(a)] += 1;
      ++collected;
    }
    window.push_back({a, env.current_obs()});
    if (static_cast<int>(window.size()) > m.window_len) window.erase(window.begin());
  }

  EmpiricalRisk out;
  out.table.resize(static_cast<std::size_t>(m.size()));
  out.total_cells = m.size() * kA;
  for (int i = 0; i < m.size(); ++i) {
    for (int a = 0; a < kA; ++a) {
      const long c = counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
      const double est =
          c > 0 ? static_cast<double>(hits[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]) /
                      static_cast<double>(c)
                : 0.5;
      if (c > 0) ++out.seen_cells;
      out.table[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = est;
      out.sup_error = std::max(
          out.sup_error,
          std::fabs(est - m.true_risk[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble envelope proposition.

struct EnvelopeResult {
  int ensemble_size = 0;
  double bound = 0.0;           // p_+^M + p_-^M
  double empirical_rate = 0.0;  // fraction of trials with the fixed point outside [min, max]
  double mc_sigma = 0.0;
  double mean_min = 0.0;  // average envelope endpoints, for extremal consistency
  double mean_max = 0.0;
};

// Errors drawn uniformly from [lo, hi] with lo < 0 < hi; a trial fails when
// zero is not bracketed by the M sampled errors.
inline std::vector<EnvelopeResult> check_envelope(double lo, double hi, std::span<const int> ensemble_sizes,
                                                  int trials, std::uint64_t seed) {
  if (!(lo < 0.0 && hi > 0.0)) throw std::invalid_argument("check_envelope: support must straddle zero");
  const double p_plus = hi / (hi - lo);    // P(error > 0)
  const double p_minus = -lo / (hi - lo);  // P(error <= 0)
  std::vector<EnvelopeResult> out;
  Rng rng(Rng::derive(seed, 41));
  for (int m_count : ensemble_sizes) {
    EnvelopeResult r;
    r.ensemble_size = m_count;
    r.bound = std::pow(p_plus, m_count) + std::pow(p_minus, m_count);
    long misses = 0;
    double min_acc = 0.0, max_acc = 0.0;
    for (int t = 0; t < trials; ++t) {
      double emin = std::numeric_limits<double>::infinity();
      double emax = -std::numeric_limits<double>::infinity();
      for (int m = 0; m < m_count; ++m) {
        const double e = rng.uniform(lo, hi);
        emin = std::min(emin, e);
        emax = std::max(emax, e);
      }
      if (emin > 0.0 || emax < 0.0) ++misses;
      min_acc += emin;
      max_acc += emax;
    }
    r.empirical_rate = static_cast<double>(misses) / trials;
    r.mc_sigma = std::sqrt(std::max(r.bound * (1.0 - r.bound), 1e-12) / trials);
    r.mean_min = min_acc / trials;
    r.mean_max = max_acc / trials;
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policy agreement / guaranteed intervention.

struct AgreementReport {
  int states = 0;
  int agreement_cases = 0;     // margin > eps
  int agreement_holds = 0;     // gated == unconstrained there
  int intervention_cases = 0;  // true risk of unconstrained action > tau + eps
  int intervention_holds = 0;  // gated differs and its true risk <= tau + eps
  int unclassified = 0;
  double min_argmax_gap = std::numeric_limits<double>::infinity();

  bool all_hold() const {
    return agreement_holds == agreement_cases && intervention_holds == intervention_cases;
  }
};

enum class RiskErrorKind { None, Uniform, ConstantPlus };

inline RiskTable perturb_risk(const RiskTable& true_risk, RiskErrorKind kind, double eps,
                              std::uint64_t seed) {
  RiskTable out = true_risk;
  Rng rng(Rng::derive(seed, 55));
  for (auto& row : out) {
    for (auto& v : row) {
      double delta = 0.0;
      if (kind == RiskErrorKind::Uniform) delta = rng.uniform(-eps, eps);
      if (kind == RiskErrorKind::ConstantPlus) delta = eps;
      v = std::min(1.0, std::max(0.0, v + delta));
    }
  }
  return out;
}

inline AgreementReport check_agreement(const WindowModel& m, const RiskTable& rho_hat, double tau,
                                       double eps) {
  AgreementReport rep;
  const TabularQ q = proxy_fixed_point(m, rho_hat, tau, 0.0);
  rep.states = m.size();
  for (int i = 0; i < m.size(); ++i) {
    const auto& row = q.q[static_cast<std::size_t>(i)];
    int unc = 0;
    for (int a = 1; a < kA; ++a)
      if (row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(unc)]) unc = a;
    // uniqueness diagnostic: gap between best and second best
    double second = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kA; ++a)
      if (a != unc) second = std::max(second, row[static_cast<std::size_t>(a)]);
    rep.min_argmax_gap = std::min(rep.min_argmax_gap, row[static_cast<std::size_t>(unc)] - second);

    const int gated = detail::restricted_argmax(row, rho_hat[static_cast<std::size_t>(i)], tau);
    const double margin = tau - rho_hat[static_cast<std::size_t>(i)][static_cast<std::size_t>(unc)];
    const double true_unc = m.true_risk[static_cast<std::size_t>(i)][static_cast<std::size_t>(unc)];
    bool classified = false;
    if (margin > eps) {
      ++rep.agreement_cases;
      if (gated == unc) ++rep.agreement_holds;
      classified = true;
    }
    if (true_unc > tau + eps) {
      ++rep.intervention_cases;
      const double true_gated = m.true_risk[static_cast<std::size_t>(i)][static_cast<std::size_t>(gated)];
      if (gated != unc && true_gated <= tau + eps) ++rep.intervention_holds;
      classified = true;
    }
    if (!classified) ++rep.unclassified;
  }
  return rep;
}

}  // namespace riskgate::theory
