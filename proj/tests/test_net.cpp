#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "riskgate/net.hpp"
#include "riskgate/rng.hpp"

using namespace riskgate;

namespace {

// Central finite differences on the loss 0.5 * (f(x) - y)^2.
double fd_grad(ScalarNet& net, const std::vector<double>& x, double target, std::size_t k, double h) {
  auto& p = net.params();
  const double orig = p[k];
  p[k] = orig + h;
  const double up = net.forward(x) - target;
  p[k] = orig - h;
  const double dn = net.forward(x) - target;
  p[k] = orig;
  return (0.5 * up * up - 0.5 * dn * dn) / (2.0 * h);
}

}  // namespace

TEST_CASE("zero-initialized net outputs zero") {
  ScalarNet net(5, 8);
  const std::vector<double> x = {1.0, -2.0, 0.5, 3.0, -1.0};
  CHECK(net.forward(x) == 0.0);
}

TEST_CASE("linear mode is an affine map") {
  ScalarNet net(3, 0);
  net.params() = {2.0, -1.0, 0.5, 10.0};  // w, b
  const std::vector<double> x = {1.0, 2.0, 4.0};
  CHECK(net.forward(x) == Catch::Approx(2.0 - 2.0 + 2.0 + 10.0));
}

TEST_CASE("bias-free linear mode is a pure weight table") {
  ScalarNet net(4, 0, false);
  REQUIRE(net.params().size() == 4);
  net.params() = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> onehot = {0.0, 0.0, 1.0, 0.0};
  CHECK(net.forward(onehot) == 3.0);
  CHECK_THROWS_AS(ScalarNet(4, 8, false), std::invalid_argument);
}

TEST_CASE("backprop matches central finite differences") {
  Rng rng(7);
  for (const int hidden : {0, 6}) {
    ScalarNet net(4, hidden);
    net.init_random(rng);
    const std::vector<double> x = {0.3, -1.2, 2.0, 0.7};
    const double target = 0.9;

    std::vector<double> grad(net.params().size(), 0.0);
    const double pred = net.forward(x);
    net.forward_backward(x, pred - target, grad);

    for (int k = 0; k < 5; ++k) {
      const std::size_t idx =
          static_cast<std::size_t>(rng.uniform_int(static_cast<int>(net.params().size())));
      const double fd = fd_grad(net, x, target, idx, 1e-6);
      const double denom = std::max(1e-8, std::fabs(fd));
      CHECK(std::fabs(grad[idx] - fd) / denom < 1e-4);
    }
  }
}

TEST_CASE("apply_step moves parameters along the negative gradient") {
  ScalarNet net(2, 0);
  net.params() = {1.0, 1.0, 0.0};
  const std::vector<double> x = {1.0, 0.0};
  std::vector<double> grad(net.params().size(), 0.0);
  const double pred = net.forward(x);  // 1.0
  net.forward_backward(x, pred - 3.0, grad);
  net.apply_step(grad, 0.5, 1.0);
  CHECK(net.forward(x) > pred);
}

TEST_CASE("deterministic init given the same stream") {
  Rng a(42), b(42);
  ScalarNet n1(6, 12), n2(6, 12);
  n1.init_random(a);
  n2.init_random(b);
  CHECK(n1.params() == n2.params());
}
