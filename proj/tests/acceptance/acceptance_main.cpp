// Acceptance suite: every criterion below pins its protocol and tolerances
// in code and prints one [PASS]/[FAIL] line. Run all with no arguments or a
// single criterion by number (1-14). Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "riskgate/experiment.hpp"

using namespace riskgate;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  explicit Failure(const std::string& what) : std::runtime_error(what) {}
};

#define ACCEPT(cond, msg)                                 \
  do {                                                    \
    if (!(cond)) {                                        \
      std::ostringstream os_;                             \
      os_ << msg;                                         \
      throw Failure(os_.str());                           \
    }                                                     \
  } while (0)

fs::path out_root() {
  const fs::path p = fs::current_path() / "acceptance_out";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Config glucose_protocol(std::uint64_t seed) {
  Config cfg;
  cfg.set("env.kind", "glucose");
  cfg.set("run.seed", std::to_string(seed));
  cfg.set("glucose.train_days", "3");
  cfg.set("glucose.eval_days", "2");
  cfg.set("agent.epsilon", "0.05");
  return cfg;
}

Config nav_protocol(std::uint64_t seed) {
  Config cfg;
  cfg.set("env.kind", "nav");
  cfg.set("run.seed", std::to_string(seed));
  cfg.set("gate.window_len", "2");
  cfg.set("nav.train_episodes", "20");
  cfg.set("nav.eval_episodes", "5");
  cfg.set("agent.update_every", "2");
  cfg.set("agent.warmup_steps", "3000");
  cfg.set("risk.horizon", "1");
  cfg.set("agent.epsilon", "0.1");
  cfg.set("train.eval_learning", "freeze");
  return cfg;
}

double agg(const nlohmann::json& report, const std::string& algorithm, const std::string& field) {
  for (const auto& row : report.at("aggregate"))
    if (row.at("algorithm") == algorithm) return row.at(field).get<double>();
  throw Failure("missing aggregate row for " + algorithm);
}

// --- criterion bodies -------------------------------------------------------

std::string c1_gate_algebra() {
  Rng rng(20260809);
  const int cases = 10000;
  long checked = 0;
  for (int trial = 0; trial < cases; ++trial) {
    const int m_count = 1 + rng.uniform_int(8);
    const int n_actions = 1 + rng.uniform_int(6);
    std::vector<std::vector<double>> q(static_cast<std::size_t>(m_count),
                                       std::vector<double>(static_cast<std::size_t>(n_actions)));
    for (auto& row : q)
      for (auto& v : row) v = rng.uniform(-20.0, 20.0);
    RiskVector risks;
    for (int a = 0; a < n_actions; ++a) risks.values.push_back(rng.uniform());
    const double r_max = rng.uniform();

    const auto g = gate_values(q, risks);
    for (int a = 0; a < n_actions; ++a) {
      ACCEPT(g.q_minus[static_cast<std::size_t>(a)] <= g.q_gate[static_cast<std::size_t>(a)] + 1e-12 &&
                 g.q_gate[static_cast<std::size_t>(a)] <= g.q_plus[static_cast<std::size_t>(a)] + 1e-12,
             "convexity violated at action " << a);
    }

    // exact rho limits
    RiskVector zero = risks, one = risks;
    const int probe = rng.uniform_int(n_actions);
    zero.values[static_cast<std::size_t>(probe)] = 0.0;
    one.values[static_cast<std::size_t>(probe)] = 1.0;
    ACCEPT(gate_values(q, zero).q_gate[static_cast<std::size_t>(probe)] ==
               g.q_plus[static_cast<std::size_t>(probe)],
           "rho=0 must return the optimistic envelope");
    ACCEPT(gate_values(q, one).q_gate[static_cast<std::size_t>(probe)] ==
               g.q_minus[static_cast<std::size_t>(probe)],
           "rho=1 must return the conservative envelope");

    // strict monotonicity on non-degenerate envelopes
    if (g.q_plus[static_cast<std::size_t>(probe)] > g.q_minus[static_cast<std::size_t>(probe)]) {
      double r1 = rng.uniform(), r2 = rng.uniform();
      if (r1 > r2) std::swap(r1, r2);
      if (r2 > r1) {
        RiskVector lo = risks, hi = risks;
        lo.values[static_cast<std::size_t>(probe)] = r1;
        hi.values[static_cast<std::size_t>(probe)] = r2;
        ACCEPT(gate_values(q, hi).q_gate[static_cast<std::size_t>(probe)] <
                   gate_values(q, lo).q_gate[static_cast<std::size_t>(probe)],
               "gate must be strictly decreasing in rho");
      }
    }

    // selection safety and fallback totality
    const auto sel = select_action(g.q_gate, risks, r_max);
    bool any_safe = false;
    for (int a = 0; a < n_actions; ++a) any_safe |= risks[static_cast<std::size_t>(a)] <= r_max;
    if (any_safe) {
      ACCEPT(!sel.fallback_used && risks[static_cast<std::size_t>(sel.action)] <= r_max,
             "selection must stay inside a nonempty safe set");
    } else {
      ACCEPT(sel.fallback_used, "empty safe set must use the fallback");
    }
    ACCEPT(sel.action >= 0 && sel.action < n_actions, "selection must be total");
    ++checked;
  }
  std::ostringstream os;
  os << checked << " randomized cases per property, 0 violations";
  return os.str();
}

std::string c2_tabular_equivalence() {
  const auto spec = default_tabular_pomdp();
  const double beta = 0.9;
  const auto wm = theory::build_window_model(spec, 1, beta);
  const auto vi = theory::proxy_fixed_point(wm, wm.true_risk, /*tau=*/1.0, /*lambda=*/0.0);
  const int NW = wm.size(), NA = theory::kA;

  CriticConfig cc;
  cc.members = 1;  // M = 1
  cc.hidden_dim = 0;
  cc.learning_rate = 1.0;
  cc.sync_interval = 0;
  cc.bootstrap_mask_prob = 1.0;
  cc.reward_clip = 10.0;
  cc.tabular_joint_encoding = true;
  CriticEnsemble ens(NW, NA, cc, 0, false);
  GateConfig gate;
  gate.discount = beta;
  gate.r_max = 1.0;      // no filtering
  gate.lambda_risk = 0.0;

  const auto onehot = [&](int i) {
    std::vector<double> v(static_cast<std::size_t>(NW), 0.0);
    v[static_cast<std::size_t>(i)] = 1.0;
    return v;
  };
  for (int sweep = 0; sweep < 300; ++sweep) {
    for (int w = 0; w < NW; ++w) {
      for (int a = 0; a < NA; ++a) {
        std::vector<Transition> batch;
        for (int o = 0; o < theory::kO; ++o) {
          const double p = wm.obs_prob[static_cast<std::size_t>(w)][static_cast<std::size_t>(a)]
                                      [static_cast<std::size_t>(o)];
          if (p <= 0.0) continue;
          Transition t;
          t.proxy_features = onehot(w);
          t.action = a;
          t.shaped_reward = wm.exp_reward[static_cast<std::size_t>(w)][static_cast<std::size_t>(a)];
          t.raw_reward = t.shaped_reward;
          t.next_proxy_features = onehot(
              wm.successor[static_cast<std::size_t>(w)][static_cast<std::size_t>(a)][static_cast<std::size_t>(o)]);
          t.next_risk_vector.values.assign(static_cast<std::size_t>(NA), 0.0);
          const int copies = static_cast<int>(std::lround(p * 200.0));
          for (int c = 0; c < copies; ++c) batch.push_back(t);
        }
        ens.td_update(batch, gate);
      }
    }
    ens.sync_targets();
  }

  double gap = 0.0;
  RiskVector risks;
  risks.values.assign(static_cast<std::size_t>(NA), 0.0);
  for (int w = 0; w < NW; ++w) {
    const auto q = ens.q_values(onehot(w), risks);
    for (int a = 0; a < NA; ++a)
      gap = std::max(gap, std::fabs(q[0][static_cast<std::size_t>(a)] -
                                    vi.q[static_cast<std::size_t>(w)][static_cast<std::size_t>(a)]));
  }
  ACCEPT(gap < 1e-6, "TD fixed point deviates from value iteration by " << gap);
  std::ostringstream os;
  os << "sup gap vs value iteration " << gap << " (< 1e-6), " << NW << " proxy states";
  return os.str();
}

std::string c3_contraction() {
  const auto spec = default_tabular_pomdp();
  const double beta = 0.9, tau = 0.25;
  const auto om = theory::build_oracle_model(spec, beta);
  const auto wm = theory::build_window_model(spec, 1, beta);
  Rng rng(31337);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    theory::TabularQ a1, a2, b1, b2;
    a1.q.resize(om.nodes.size());
    a2.q.resize(om.nodes.size());
    b1.q.resize(static_cast<std::size_t>(wm.size()));
    b2.q.resize(static_cast<std::size_t>(wm.size()));
    for (auto* q : {&a1, &a2})
      for (auto& row : q->q)
        for (auto& v : row) v = rng.uniform(-8, 8);
    for (auto* q : {&b1, &b2})
      for (auto& row : q->q)
        for (auto& v : row) v = rng.uniform(-8, 8);
    const double oracle_ratio =
        theory::apply_oracle_operator(om, a1, tau).sup_diff(theory::apply_oracle_operator(om, a2, tau)) /
        a1.sup_diff(a2);
    const double proxy_ratio = theory::apply_proxy_operator(wm, b1, wm.true_risk, tau, 0.2)
                                   .sup_diff(theory::apply_proxy_operator(wm, b2, wm.true_risk, tau, 0.2)) /
                               b1.sup_diff(b2);
    ACCEPT(oracle_ratio <= beta + 1e-12, "oracle operator ratio " << oracle_ratio << " exceeds beta");
    ACCEPT(proxy_ratio <= beta + 1e-12, "proxy operator ratio " << proxy_ratio << " exceeds beta");
    worst = std::max({worst, oracle_ratio, proxy_ratio});
  }
  std::ostringstream os;
  os << "100 random pairs per operator, worst ratio " << worst << " <= beta " << beta;
  return os.str();
}

std::string c4_envelope() {
  const std::vector<int> ms = {1, 2, 3, 5, 8};
  const auto results = theory::check_envelope(-1.0, 2.0, ms, 10000, 4242);
  std::ostringstream os;
  for (const auto& r : results) {
    ACCEPT(r.empirical_rate <= r.bound + 3.0 * r.mc_sigma,
           "M=" << r.ensemble_size << " rate " << r.empirical_rate << " exceeds bound " << r.bound
                << " + 3 sigma");
    os << "M=" << r.ensemble_size << " rate " << r.empirical_rate << " <= " << r.bound << "+3s; ";
  }
  return os.str();
}

std::string c5_agreement() {
  const auto spec = default_tabular_pomdp();
  const auto wm = theory::build_window_model(spec, 2, 0.9);
  const double tau = 0.25, eps = 0.05;
  const auto rho = theory::perturb_risk(wm.true_risk, theory::RiskErrorKind::Uniform, eps, 7);
  const auto rep = theory::check_agreement(wm, rho, tau, eps);
  ACCEPT(rep.agreement_cases > 0 && rep.intervention_cases > 0,
         "degenerate test: both clause preconditions must occur");
  ACCEPT(rep.agreement_holds == rep.agreement_cases,
         "agreement clause failed on " << (rep.agreement_cases - rep.agreement_holds) << " states");
  ACCEPT(rep.intervention_holds == rep.intervention_cases,
         "intervention clause failed on " << (rep.intervention_cases - rep.intervention_holds) << " states");
  std::ostringstream os;
  os << rep.states << " proxy states: " << rep.agreement_cases << " agreement and "
     << rep.intervention_cases << " intervention cases, all clauses hold (eps=" << eps << ")";
  return os.str();
}

std::string c6_error_bound() {
  const auto report = run_theory_checks(out_root() / "c6_theory");
  ACCEPT(report.at("w_trend_non_increasing").get<bool>(), "value error increased with window length");
  ACCEPT(report.at("n_trend_decreasing").get<bool>(), "value error did not decrease with sample size");
  ACCEPT(report.at("bounds_hold").get<bool>(), "a measured error exceeded the evaluated bound");
  std::ostringstream os;
  os << "W errors [";
  for (const auto& row : report.at("w_checks")) os << row.at("value_error").get<double>() << " ";
  os << "] non-increasing; n errors [";
  for (const auto& row : report.at("n_points")) os << row.at("value_error").get<double>() << " ";
  os << "] decreasing; all bounds hold";
  return os.str();
}

std::string c7_risk_calibration() {
  // Bernoulli cells with known violation probabilities.
  const std::vector<double> cell_p = {0.1, 0.5, 0.9};
  RiskModel model(1, 3, 32, 0.05);
  Rng rng(227);
  model.init_random(rng);
  Rng gen(228);
  std::vector<HazardLabel> data;
  for (int i = 0; i < 10000; ++i) {
    const int cell = gen.uniform_int(3);
    data.push_back({{1.0}, cell, gen.bernoulli(cell_p[static_cast<std::size_t>(cell)]), false});
  }
  Rng pick(229);
  std::vector<HazardLabel> batch;
  for (int step = 0; step < 3000; ++step) {
    batch.clear();
    for (int k = 0; k < 64; ++k)
      batch.push_back(data[static_cast<std::size_t>(pick.uniform_int(static_cast<int>(data.size())))]);
    model.update(batch);
  }
  std::ostringstream os;
  os << "cell errors [";
  for (int cell = 0; cell < 3; ++cell) {
    const double err =
        std::fabs(model.predict(std::vector<double>{1.0}, cell) - cell_p[static_cast<std::size_t>(cell)]);
    ACCEPT(err < 0.05, "cell p=" << cell_p[static_cast<std::size_t>(cell)] << " MAE " << err << " >= 0.05");
    os << err << " ";
  }
  os << "] < 0.05";

  // gradient vs central finite differences on the BCE objective
  RiskModel g(3, 2, 16, 0.01);
  Rng grng(230);
  g.init_random(grng);
  std::vector<HazardLabel> gb = {{{0.2, -0.4, 1.0}, 0, true, false},
                                 {{-0.7, 0.3, 0.1}, 1, false, false},
                                 {{0.5, 0.5, -0.5}, 0, false, false}};
  const auto bce = [&](RiskModel& m) {
    double loss = 0.0;
    for (const auto& l : gb) {
      const double p = m.predict(l.window_features, l.action);
      loss -= (l.violated ? std::log(p) : std::log(1.0 - p)) / static_cast<double>(gb.size());
    }
    return loss;
  };
  RiskModel stepped = g;
  const auto before = stepped.net().params();
  stepped.update(gb);
  const auto after = stepped.net().params();
  Rng idx_rng(231);
  double worst_rel = 0.0;
  for (int k = 0; k < 5; ++k) {
    const std::size_t idx =
        static_cast<std::size_t>(idx_rng.uniform_int(static_cast<int>(before.size())));
    const double analytic = (before[idx] - after[idx]) / stepped.learning_rate();
    RiskModel fd = g;
    const double h = 1e-6;
    fd.net().params()[idx] = before[idx] + h;
    const double up = bce(fd);
    fd.net().params()[idx] = before[idx] - h;
    const double dn = bce(fd);
    const double numeric = (up - dn) / (2.0 * h);
    const double rel = std::fabs(analytic - numeric) / std::max(1e-8, std::fabs(numeric));
    ACCEPT(rel < 1e-4, "BCE gradient relative error " << rel << " at parameter " << idx);
    worst_rel = std::max(worst_rel, rel);
  }
  os << "; gradient rel err " << worst_rel << " < 1e-4";
  return os.str();
}

std::string c8_glucose_end_to_end() {
  CompareOptions opts;
  opts.algorithms = {"riskgated", "unconstrained_q"};
  opts.seeds = {42, 123, 456};
  opts.workers = 2;
  const auto report = run_compare(glucose_protocol(42), opts, out_root() / "c8_glucose");
  const double tir_rg = agg(report, "riskgated", "tir_pct_mean");
  const double tir_unc = agg(report, "unconstrained_q", "tir_pct_mean");
  const double low_rg = agg(report, "riskgated", "time_below_70_pct_mean");
  const double low_unc = agg(report, "unconstrained_q", "time_below_70_pct_mean");
  ACCEPT(tir_rg >= tir_unc, "TIR " << tir_rg << " < unconstrained " << tir_unc);
  ACCEPT(low_rg <= 0.5 * low_unc,
         "time below 70: " << low_rg << " > half of unconstrained " << low_unc);
  std::ostringstream os;
  os << "TIR " << tir_rg << " vs " << tir_unc << "; below-70 " << low_rg << " vs " << low_unc
     << " (mean over seeds 42/123/456)";
  return os.str();
}

std::string c9_nav_end_to_end() {
  CompareOptions opts;
  opts.algorithms = {"riskgated", "unconstrained_q"};
  opts.seeds = {42, 123, 456};
  opts.workers = 2;
  const auto report = run_compare(nav_protocol(42), opts, out_root() / "c9_nav");
  const double cost_rg = agg(report, "riskgated", "avg_cost_mean");
  const double cost_unc = agg(report, "unconstrained_q", "avg_cost_mean");
  const double rpc_rg = agg(report, "riskgated", "reward_per_cost_of_means");
  const double rpc_unc = agg(report, "unconstrained_q", "reward_per_cost_of_means");
  ACCEPT(cost_rg <= 0.5 * cost_unc, "cost " << cost_rg << " > half of unconstrained " << cost_unc);
  ACCEPT(rpc_rg > rpc_unc, "reward/cost " << rpc_rg << " not greater than unconstrained " << rpc_unc);
  std::ostringstream os;
  os << "cost " << cost_rg << " vs " << cost_unc << "; reward/cost " << rpc_rg << " vs " << rpc_unc;
  return os.str();
}

std::string c10_calibration_analysis() {
  const fs::path dir = out_root() / "c10_run";
  fs::remove_all(dir);
  run_training(glucose_protocol(42), dir);
  const auto report = analyze_risk(dir);
  const double agreement = report.at("threshold_agreement_pct").get<double>();
  ACCEPT(agreement >= 90.0, "threshold agreement " << agreement << "% < 90%");
  std::ostringstream os;
  os << "threshold agreement " << agreement << "% at r_max 0.25 (" << report.at("samples").get<int>()
     << " steps)";
  return os.str();
}

std::string c11_ablation_trends() {
  // r_max sweep on glucose: hypoglycemia burden must not grow as the filter
  // tightens (within one standard deviation).
  SweepOptions gopts;
  gopts.grid = {{"gate.r_max", {"0.5", "0.25", "0.1"}}};
  gopts.seeds = {42, 123, 456};
  gopts.workers = 2;
  const auto gsweep = run_sweep(glucose_protocol(42), gopts, out_root() / "c11_rmax");
  std::vector<double> low_mean, low_sd;
  for (const auto& cell : gsweep.at("cells")) {
    ACCEPT(cell.at("failures").get<int>() == 0, "sweep cell failed");
    low_mean.push_back(cell.at("aggregate").at("time_below_70_pct_mean").get<double>());
    low_sd.push_back(cell.at("aggregate").at("time_below_70_pct_sd").get<double>());
  }
  // cells are ordered r_max = 0.5, 0.25, 0.1
  for (std::size_t i = 1; i < low_mean.size(); ++i) {
    const double tol = std::max(low_sd[i - 1], low_sd[i]);
    ACCEPT(low_mean[i] <= low_mean[i - 1] + tol,
           "below-70 grew from " << low_mean[i - 1] << " to " << low_mean[i]
                                 << " when tightening r_max (tolerance " << tol << ")");
  }

  // lambda sweep on navigation: shaping must reduce cost relative to none.
  SweepOptions nopts;
  nopts.grid = {{"gate.lambda_risk", {"0", "0.1"}}};
  nopts.seeds = {42, 123, 456};
  nopts.workers = 2;
  const auto nsweep = run_sweep(nav_protocol(42), nopts, out_root() / "c11_lambda");
  std::vector<double> cost;
  for (const auto& cell : nsweep.at("cells")) {
    ACCEPT(cell.at("failures").get<int>() == 0, "sweep cell failed");
    cost.push_back(cell.at("aggregate").at("avg_cost_mean").get<double>());
  }
  ACCEPT(cost[1] < cost[0],
         "navigation cost at lambda 0.1 (" << cost[1] << ") not below lambda 0 (" << cost[0] << ")");
  std::ostringstream os;
  os << "below-70 at r_max {0.5,0.25,0.1} = [" << low_mean[0] << " " << low_mean[1] << " " << low_mean[2]
     << "]; nav cost lambda {0,0.1} = [" << cost[0] << " " << cost[1] << "]";
  return os.str();
}

std::string c12_metrics_regression() {
  // mean ranks recomputed from the published comparison values
  const std::vector<std::vector<double>> adult = {
      {80.4, 9.7, 10.0},  {58.4, 26.3, 15.3}, {77.3, 2.2, 20.5}, {76.0, 1.9, 22.1},
      {75.7, 1.9, 22.4},  {74.4, 11.6, 14.0}, {82.0, 4.2, 13.8},
  };
  const std::vector<double> adult_expected = {2.67, 6.00, 3.67, 3.83, 4.50, 5.00, 2.33};
  const auto ar = mean_rank(adult, {true, false, false});
  for (std::size_t i = 0; i < ar.size(); ++i)
    ACCEPT(std::fabs(std::round(ar[i] * 100.0) / 100.0 - adult_expected[i]) < 5e-3,
           "adult mean rank " << ar[i] << " != " << adult_expected[i]);
  const std::vector<std::vector<double>> adolescent = {
      {66.6, 20.3, 13.1}, {54.8, 21.3, 24.0}, {65.7, 13.8, 20.5}, {66.3, 13.3, 20.4},
      {65.6, 15.1, 19.3}, {56.9, 10.0, 33.1}, {71.6, 11.2, 17.2},
  };
  const std::vector<double> adolescent_expected = {3.00, 6.67, 4.33, 3.33, 4.33, 4.67, 1.67};
  const auto sr = mean_rank(adolescent, {true, false, false});
  for (std::size_t i = 0; i < sr.size(); ++i)
    ACCEPT(std::fabs(std::round(sr[i] * 100.0) / 100.0 - adolescent_expected[i]) < 5e-3,
           "adolescent mean rank " << sr[i] << " != " << adolescent_expected[i]);

  // normalized navigation columns recomputed from the published raw values:
  // reward, cost, expected J^R (nan = arithmetically inconsistent in the
  // source and excluded), expected J^C, expected reward/cost
  struct Row {
    double reward, cost, jr, jc, rpc;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<Row> goal = {
      {11.37, 109.87, 1.000, 4.395, 0.103}, {8.14, 90.27, nan, 3.611, 0.090},
      {2.99, 195.33, nan, 7.813, 0.015},    {0.68, 110.67, nan, 4.427, 0.006},
      {2.99, 195.33, nan, 7.813, 0.015},    {-0.12, 25.67, nan, 1.027, -0.005},
      {-0.73, 5.67, nan, 0.227, -0.129},    {2.30, 41.67, nan, 1.667, 0.055},
      {2.26, 309.33, nan, 12.373, 0.007},   {-0.71, 101.50, nan, 4.060, -0.007},
      {5.39, 36.93, 0.474, 1.477, 0.146},
  };
  const double goal_ref = 11.37;
  const std::vector<Row> circle = {
      {25.15, 278.48, 1.000, 11.139, 0.090}, {23.11, 264.59, 0.919, 10.584, 0.087},
      {6.62, 107.50, 0.263, 4.300, 0.062},   {4.20, 77.66, 0.167, 3.106, 0.054},
      {6.62, 107.50, 0.263, 4.300, 0.062},   {4.23, 61.26, 0.168, 2.450, 0.069},
      {3.13, 51.65, 0.124, 2.066, 0.061},    {5.16, 96.07, 0.205, 3.843, 0.054},
      {7.33, 94.09, 0.291, 3.764, 0.078},    {9.53, 237.23, 0.379, 9.489, 0.040},
      {10.86, 106.47, 0.432, 4.259, 0.102},
  };
  const double circle_ref = 25.15;

  const auto round3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };
  const auto check_table = [&](const std::vector<Row>& rows, double ref, const char* name) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto m = nav_metrics(std::vector<double>{rows[i].reward}, std::vector<double>{rows[i].cost}, ref);
      ACCEPT(std::fabs(round3(m.j_c) - rows[i].jc) < 5e-4,
             name << " row " << i << " J^C " << round3(m.j_c) << " != " << rows[i].jc);
      ACCEPT(std::fabs(round3(m.reward_per_cost) - rows[i].rpc) < 5e-4,
             name << " row " << i << " reward/cost " << round3(m.reward_per_cost) << " != " << rows[i].rpc);
      if (!std::isnan(rows[i].jr))
        ACCEPT(std::fabs(round3(m.j_r) - rows[i].jr) < 5e-4,
               name << " row " << i << " J^R " << round3(m.j_r) << " != " << rows[i].jr);
    }
  };
  check_table(goal, goal_ref, "goal");
  check_table(circle, circle_ref, "circle");
  return "published mean ranks and normalized columns reproduce to 3 decimals";
}

std::string c13_determinism() {
  const fs::path a = out_root() / "c13_a";
  const fs::path b = out_root() / "c13_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_training(glucose_protocol(42), a);
  run_training_from_manifest(a / "manifest.json", b);
  ACCEPT(slurp(a / "metrics.json") == slurp(b / "metrics.json"),
         "metrics.json differs between a run and its manifest replay");
  ACCEPT(slurp(a / "metrics.json").size() > 0, "empty metrics file");
  return "manifest replay reproduced metrics.json byte for byte";
}

std::string c14_latency() {
  Config cfg = glucose_protocol(42);
  cfg.set("glucose.train_days", "1");
  cfg.set("glucose.eval_days", "1");
  const fs::path dir = out_root() / "c14_run";
  fs::remove_all(dir);
  const auto result = run_training(cfg, dir);
  ACCEPT(result.latency_ms < 5.0,
         "per-step decision latency " << result.latency_ms << " ms >= 5 ms");
  std::ostringstream os;
  os << "mean decision latency " << result.latency_ms << " ms < 5 ms (glucose configuration)";
  return os.str();
}

struct Criterion {
  int id;
  const char* name;
  std::function<std::string()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gate algebra", c1_gate_algebra},
      {2, "tabular oracle equivalence", c2_tabular_equivalence},
      {3, "operator contraction", c3_contraction},
      {4, "ensemble envelope bound", c4_envelope},
      {5, "policy agreement / intervention", c5_agreement},
      {6, "error-bound trends", c6_error_bound},
      {7, "risk-model calibration + gradient", c7_risk_calibration},
      {8, "glucose end-to-end comparison", c8_glucose_end_to_end},
      {9, "navigation end-to-end comparison", c9_nav_end_to_end},
      {10, "post-hoc risk calibration", c10_calibration_analysis},
      {11, "ablation trends", c11_ablation_trends},
      {12, "metrics regression", c12_metrics_regression},
      {13, "manifest determinism", c13_determinism},
      {14, "decision latency", c14_latency},
  };

  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const std::string detail = c.run();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("[PASS] C%-2d %s: %s (%.1f s)\n", c.id, c.name, detail.c_str(), secs);
    } catch (const std::exception& e) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("[FAIL] C%-2d %s: %s (%.1f s)\n", c.id, c.name, e.what(), secs);
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures;
}
