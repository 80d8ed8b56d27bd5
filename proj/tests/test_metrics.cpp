#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "riskgate/metrics.hpp"
#include "riskgate/rng.hpp"

using namespace riskgate;

TEST_CASE("glucose metrics on simple traces") {
  const std::vector<double> flat(10, 120.0);
  const auto m = glucose_metrics(flat);
  CHECK(m.tir_pct == 100.0);
  CHECK(m.time_below_70_pct == 0.0);
  CHECK(m.time_above_180_pct == 0.0);
  CHECK(m.mean_bg == 120.0);

  const std::vector<double> mixed = {60.0, 120.0, 200.0, 120.0};
  const auto x = glucose_metrics(mixed);
  CHECK(x.tir_pct == 50.0);
  CHECK(x.time_below_70_pct == 25.0);
  CHECK(x.time_above_180_pct == 25.0);
  CHECK(x.mean_bg == 125.0);
}

TEST_CASE("glucose boundary values count as in range") {
  const std::vector<double> edges = {70.0, 180.0};
  const auto m = glucose_metrics(edges);
  CHECK(m.tir_pct == 100.0);
  CHECK(m.time_below_70_pct == 0.0);
  CHECK(m.time_above_180_pct == 0.0);
}

TEST_CASE("glucose partition identity holds for random traces") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> trace;
    const int n = 1 + rng.uniform_int(200);
    for (int i = 0; i < n; ++i) trace.push_back(rng.uniform(30.0, 350.0));
    const auto m = glucose_metrics(trace);
    CHECK(m.tir_pct + m.time_below_70_pct + m.time_above_180_pct == Catch::Approx(100.0).margin(1e-9));
  }
  CHECK_THROWS_AS(glucose_metrics(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("navigation metrics and normalizations") {
  const std::vector<double> r = {11.37};
  const std::vector<double> c = {109.87};
  const auto m = nav_metrics(r, c, 11.37);
  CHECK(m.j_r == Catch::Approx(1.000).margin(5e-4));
  CHECK(m.j_c == Catch::Approx(4.395).margin(5e-4));
  CHECK(m.reward_per_cost == Catch::Approx(0.103).margin(5e-4));

  const std::vector<double> r2 = {5.39};
  const std::vector<double> c2 = {36.93};
  const auto g = nav_metrics(r2, c2, 11.37);
  CHECK(g.reward_per_cost == Catch::Approx(0.146).margin(5e-4));
  CHECK(g.j_c == Catch::Approx(1.477).margin(5e-4));

  const auto z = nav_metrics(std::vector<double>{3.0}, std::vector<double>{0.0}, 1.0);
  CHECK(z.infinite_ratio);
  CHECK(std::isinf(z.reward_per_cost));
}

TEST_CASE("navigation metrics input validation") {
  CHECK_THROWS_AS(nav_metrics(std::vector<double>{}, std::vector<double>{}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(nav_metrics(std::vector<double>{1.0}, std::vector<double>{1.0}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("risk calibration: identity, constant offset, flipped classification") {
  const std::vector<double> post = {0.1, 0.3, 0.6, 0.2, 0.45};
  const auto id = risk_calibration(post, post, 0.25);
  CHECK(id.mean_signed_error == 0.0);
  CHECK(id.mae == 0.0);
  CHECK(id.rmse == 0.0);
  CHECK(id.pearson_r == Catch::Approx(1.0));
  CHECK(id.hellinger == Catch::Approx(0.0).margin(1e-12));
  CHECK(id.threshold_agreement_pct == 100.0);

  std::vector<double> pred = post;
  for (auto& v : pred) v += 0.1;
  const auto off = risk_calibration(pred, post, 0.25);
  CHECK(off.mean_signed_error == Catch::Approx(0.1));
  CHECK(off.mae == Catch::Approx(0.1));
  CHECK(off.pearson_r == Catch::Approx(1.0));

  const std::vector<double> p2 = {0.1, 0.9};
  const std::vector<double> q2 = {0.9, 0.1};
  const auto flip = risk_calibration(p2, q2, 0.25);
  CHECK(flip.threshold_agreement_pct == 0.0);
}

TEST_CASE("risk calibration flags degenerate Pearson input") {
  const std::vector<double> constant = {0.5, 0.5, 0.5};
  const std::vector<double> varying = {0.1, 0.5, 0.9};
  const auto c = risk_calibration(constant, varying, 0.25);
  CHECK_FALSE(c.pearson_defined);
  CHECK_THROWS_AS(risk_calibration(constant, std::vector<double>{0.1}, 0.25), std::invalid_argument);
}

TEST_CASE("mae never exceeds rmse; hellinger is symmetric and bounded") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + rng.uniform_int(50);
    std::vector<double> p, q;
    for (int i = 0; i < n; ++i) {
      p.push_back(rng.uniform());
      q.push_back(rng.uniform());
    }
    const auto c = risk_calibration(p, q, 0.25);
    CHECK(c.mae <= c.rmse + 1e-12);
    const double h1 = hellinger_distance(p, q);
    const double h2 = hellinger_distance(q, p);
    CHECK(h1 == Catch::Approx(h2).margin(1e-12));
    CHECK(h1 >= 0.0);
    CHECK(h1 <= 1.0 + 1e-12);
    const double hb = hellinger_distance(p, q, HellingerMode::StepwiseBernoulli);
    CHECK(hb >= 0.0);
    CHECK(hb <= 1.0 + 1e-12);
  }
}

TEST_CASE("pearson correlation is invariant to affine rescaling") {
  Rng rng(9);
  std::vector<double> p, q;
  for (int i = 0; i < 40; ++i) {
    p.push_back(rng.uniform());
    q.push_back(rng.uniform());
  }
  const auto base = risk_calibration(p, q, 0.5);
  std::vector<double> scaled = p;
  for (auto& v : scaled) v = 0.2 * v + 0.3;
  const auto re = risk_calibration(scaled, q, 0.5);
  CHECK(base.pearson_r == Catch::Approx(re.pearson_r).margin(1e-9));
}

TEST_CASE("mean rank: degenerate and tied cases") {
  // best on all three metrics -> mean rank 1.0
  const std::vector<std::vector<double>> table = {{10.0, 1.0, 1.0}, {5.0, 2.0, 3.0}, {1.0, 3.0, 2.0}};
  const auto ranks = mean_rank(table, {true, false, false});
  CHECK(ranks[0] == Catch::Approx(1.0));

  // two-way tie on one metric -> both get 1.5 there
  const std::vector<std::vector<double>> tied = {{5.0}, {5.0}, {1.0}};
  const auto tr = mean_rank(tied, {true});
  CHECK(tr[0] == Catch::Approx(1.5));
  CHECK(tr[1] == Catch::Approx(1.5));
  CHECK(tr[2] == Catch::Approx(3.0));
}

TEST_CASE("mean rank regression: published glucose comparison tables") {
  // columns: TIR (higher better), time below 70 (lower), time above 180 (lower)
  const std::vector<std::vector<double>> adult = {
      {80.4, 9.7, 10.0},   // PID
      {58.4, 26.3, 15.3},  // Meal-Bolus
      {77.3, 2.2, 20.5},   // PPO
      {76.0, 1.9, 22.1},   // Safe-PPO
      {75.7, 1.9, 22.4},   // Safe-DQN
      {74.4, 11.6, 14.0},  // POMDP
      {82.0, 4.2, 13.8},   // RiskGated
  };
  const auto ar = mean_rank(adult, {true, false, false});
  const std::vector<double> adult_expected = {2.67, 6.00, 3.67, 3.83, 4.50, 5.00, 2.33};
  for (std::size_t i = 0; i < ar.size(); ++i)
    CHECK(std::round(ar[i] * 100.0) / 100.0 == Catch::Approx(adult_expected[i]).margin(5e-3));

  const std::vector<std::vector<double>> adolescent = {
      {66.6, 20.3, 13.1},  // PID
      {54.8, 21.3, 24.0},  // Meal-Bolus
      {65.7, 13.8, 20.5},  // PPO
      {66.3, 13.3, 20.4},  // Safe-PPO
      {65.6, 15.1, 19.3},  // Safe-DQN+IOB
      {56.9, 10.0, 33.1},  // POMDP
      {71.6, 11.2, 17.2},  // RiskGated
  };
  const auto sr = mean_rank(adolescent, {true, false, false});
  const std::vector<double> adolescent_expected = {3.00, 6.67, 4.33, 3.33, 4.33, 4.67, 1.67};
  for (std::size_t i = 0; i < sr.size(); ++i)
    CHECK(std::round(sr[i] * 100.0) / 100.0 == Catch::Approx(adolescent_expected[i]).margin(5e-3));
}
