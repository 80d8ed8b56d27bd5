#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>
#include <vector>

#include "riskgate/replay.hpp"

using namespace riskgate;

namespace {

Transition stamped(int id) {
  Transition t;
  t.action = id;
  t.raw_reward = 0.25 * id;
  t.shaped_reward = 0.25 * id - 0.01;
  t.cost = id % 2;
  t.violation = id % 2 == 1;
  t.predicted_risk_at_selection = 0.001 * id;
  t.proxy_features = {static_cast<double>(id), 1.0};
  t.next_proxy_features = {static_cast<double>(id) + 0.5, -1.0};
  t.next_risk_vector.values = {0.1, 0.9};
  t.terminal = false;
  return t;
}

}  // namespace

TEST_CASE("FIFO eviction at capacity") {
  ReplayBuffer buf(8, 1);
  for (int i = 0; i < 9; ++i) buf.push(stamped(i));
  CHECK(buf.size() == 8);
  bool first_present = false;
  for (std::size_t i = 0; i < buf.size(); ++i) first_present |= buf.at(i).action == 0;
  CHECK_FALSE(first_present);
}

TEST_CASE("pushes preserve field values bit-exactly") {
  ReplayBuffer buf(4, 1);
  const auto t = stamped(3);
  buf.push(t);
  const auto& stored = buf.at(0);
  CHECK(stored.action == t.action);
  CHECK(stored.raw_reward == t.raw_reward);
  CHECK(stored.shaped_reward == t.shaped_reward);
  CHECK(stored.cost == t.cost);
  CHECK(stored.violation == t.violation);
  CHECK(stored.predicted_risk_at_selection == t.predicted_risk_at_selection);
  CHECK(stored.proxy_features == t.proxy_features);
  CHECK(stored.next_proxy_features == t.next_proxy_features);
  CHECK(stored.next_risk_vector.values == t.next_risk_vector.values);
}

TEST_CASE("single element buffer returns that element k times") {
  ReplayBuffer buf(4, 9);
  buf.push(stamped(7));
  const auto s = buf.sample(5);
  REQUIRE(s.size() == 5);
  for (const auto& t : s) CHECK(t.action == 7);
}

TEST_CASE("sampling is reproducible under the seed") {
  ReplayBuffer a(64, 123), b(64, 123);
  for (int i = 0; i < 50; ++i) {
    a.push(stamped(i));
    b.push(stamped(i));
  }
  const auto sa = a.sample(32);
  const auto sb = b.sample(32);
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].action == sb[i].action);
}

TEST_CASE("sampling from an empty buffer is an error") {
  ReplayBuffer buf(4, 0);
  CHECK_THROWS_AS(buf.sample(1), std::invalid_argument);
}

TEST_CASE("mutating a sampled copy never alters stored data") {
  ReplayBuffer buf(4, 5);
  buf.push(stamped(1));
  auto s = buf.sample(1);
  s[0].proxy_features[0] = 999.0;
  s[0].action = -5;
  CHECK(buf.at(0).proxy_features[0] == 1.0);
  CHECK(buf.at(0).action == 1);
}

TEST_CASE("with-replacement draws cover most of the buffer in expectation") {
  // k = n = 100: expected unique fraction 1 - (1 - 1/n)^n, about 63.4%
  ReplayBuffer buf(100, 31);
  for (int i = 0; i < 100; ++i) buf.push(stamped(i));
  double unique_sum = 0.0;
  const int trials = 400;
  for (int trial = 0; trial < trials; ++trial) {
    const auto s = buf.sample(100);
    std::set<int> ids;
    for (const auto& t : s) ids.insert(t.action);
    unique_sum += static_cast<double>(ids.size());
  }
  CHECK(unique_sum / trials >= 60.0);
}

TEST_CASE("uniformity: chi-square goodness of fit over 100k draws") {
  ReplayBuffer buf(100, 77);
  for (int i = 0; i < 100; ++i) buf.push(stamped(i));
  std::vector<long> counts(100, 0);
  const long draws = 100000;
  const auto s = buf.sample(draws);
  for (const auto& t : s) counts[static_cast<std::size_t>(t.action)] += 1;
  const double expected = static_cast<double>(draws) / 100.0;
  double chi2 = 0.0;
  for (long c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  // df = 99, alpha = 0.01 critical value
  CHECK(chi2 < 134.642);
}

TEST_CASE("csv dump has one row per transition and a fixed header") {
  ReplayBuffer buf(4, 2);
  buf.push(stamped(0));
  buf.push(stamped(1));
  std::ostringstream os;
  buf.dump_csv(os);
  const std::string text = os.str();
  CHECK(text.rfind("action,shaped_reward,raw_reward,cost,violation,predicted_risk,terminal", 0) == 0);
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  CHECK(lines == 3);  // header + 2 rows
}
