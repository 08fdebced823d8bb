#include <cmath>
#include <random>

#include "doctest.h"
#include "dynamo/error.hpp"
#include "dynamo/policies.hpp"

using namespace dynamo;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> g(0.0, s);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST_CASE("absolute threshold") {
  const std::vector<double> e{1e-2, 1e-4};
  CHECK(threshold_absolute(e, 1e-3) == std::vector<Action>{Action::fine, Action::coarse});
  CHECK(threshold_absolute(e, 1.0) == std::vector<Action>{Action::coarse, Action::coarse});
  CHECK(threshold_absolute(e, 1e-2)[0] == Action::coarse);
  CHECK_THROWS_AS(threshold_absolute(e, 0.0), InvalidArgument);

  // raising theta never turns coarse into fine
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-8, 0);
  std::vector<double> errs(200);
  for (double& x : errs) x = std::pow(10.0, u(rng));
  std::vector<Action> prev = threshold_absolute(errs, 1e-8);
  for (double t = 1e-7; t < 1; t *= 10) {
    const auto now = threshold_absolute(errs, t);
    for (std::size_t i = 0; i < errs.size(); ++i) {
      if (prev[i] == Action::coarse) CHECK(now[i] == Action::coarse);
    }
    prev = now;
  }
}

TEST_CASE("relative threshold as written") {
  const std::vector<double> e{1, 0};
  CHECK(threshold_relative(e, 0.5) == std::vector<Action>{Action::coarse, Action::fine});
  const std::vector<double> f{0.2, 0.5, 0.9};
  CHECK(threshold_relative(f, 1.0) == std::vector<Action>(3, Action::coarse));
  CHECK(threshold_relative(f, 0.0) == std::vector<Action>{Action::fine, Action::fine, Action::coarse});
  CHECK(threshold_relative(std::vector<double>{0.3, 0.3}, 0.2) ==
        std::vector<Action>(2, Action::coarse));
}

TEST_CASE("network forward") {
  const ObservationLayout layout{1, 1, 2};
  PolicyWeights w;
  w.layout = layout;
  w.hidden = 16;
  w.policy = Eigen::VectorXd::Zero(w.policy_shape().parameter_count());
  w.value = Eigen::VectorXd::Zero(w.value_shape().parameter_count());
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd obs = random_matrix(3, layout.size(), rng);
  const PolicyOutput out = policy_forward(w, obs);
  CHECK(out.logits.cwiseAbs().maxCoeff() == 0.0);
  CHECK(log_softmax(out.logits.row(0).transpose())[0] == doctest::Approx(std::log(0.5)));

  const PolicyWeights r = init_weights(layout, 32, rng);
  r.validate();
  Eigen::MatrixXd same(4, layout.size());
  same.rowwise() = obs.row(0);
  const PolicyOutput o2 = policy_forward(r, same);
  for (int i = 1; i < 4; ++i) {
    CHECK(o2.logits.row(i) == o2.logits.row(0));
    CHECK(o2.values[i] == o2.values[0]);
  }
  // near-uniform initial policy
  CHECK(o2.logits.cwiseAbs().maxCoeff() < 0.2);
  CHECK_THROWS_AS(policy_forward(r, random_matrix(2, layout.size() + 1, rng)), InvalidArgument);
}

TEST_CASE("orthogonal initialisation") {
  std::mt19937_64 rng(3);
  const ObservationLayout layout{2, 2, 2};
  const PolicyWeights w = init_weights(layout, 64, rng);
  const NetworkShape s = w.value_shape();
  // W2 (64 x 64) is orthogonal with gain 1
  const Eigen::Index w2 = 64 * s.inputs + 64;
  Eigen::MatrixXd W2(64, 64);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) W2(i, j) = w.value[w2 + i * 64 + j];
  CHECK((W2 * W2.transpose() - Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-12);
  // biases are zero
  CHECK(w.value.segment(64 * s.inputs, 64).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp backward matches finite differences") {
  std::mt19937_64 rng(4);
  const NetworkShape shape{6, 8, 2};
  const Eigen::VectorXd params = random_matrix(shape.parameter_count(), 1, rng, 0.4);
  const Eigen::MatrixXd x = random_matrix(3, 6, rng);
  const Eigen::MatrixXd d = random_matrix(3, 2, rng);
  const MlpTape tape = mlp_forward(shape, params, x);
  const Eigen::VectorXd g = mlp_backward(shape, params, tape, d);
  auto f = [&](const Eigen::VectorXd& p) {
    return (mlp_forward(shape, p, x).output.array() * d.array()).sum();
  };
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    Eigen::VectorXd a = params, b = params;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const double fd = (f(a) - f(b)) / 2e-6;
    CHECK(std::abs(fd - g[i]) <= 1e-5 * std::max({std::abs(fd), std::abs(g[i]), 1e-3}));
  }
}

TEST_CASE("action selection") {
  std::mt19937_64 rng(5);
  int coarse = 0;
  for (int k = 0; k < 20000; ++k) {
    const ActionChoice c = select_action(Eigen::Vector2d(10, -10), SelectMode::sample, &rng);
    coarse += c.action == Action::coarse;
  }
  CHECK(coarse >= 19998);
  const ActionChoice even = select_action(Eigen::Vector2d(0, 0), SelectMode::sample, &rng);
  CHECK(even.log_prob == doctest::Approx(std::log(0.5)));
  CHECK(select_action(Eigen::Vector2d(1, 1), SelectMode::argmax).action == Action::coarse);
  CHECK(select_action(Eigen::Vector2d(1, 1.5), SelectMode::argmax).action == Action::fine);

  // sampling frequency follows softmax
  int fine = 0;
  for (int k = 0; k < 20000; ++k) {
    fine += select_action(Eigen::Vector2d(0, std::log(3.0)), SelectMode::sample, &rng).action ==
            Action::fine;
  }
  CHECK(fine / 20000.0 == doctest::Approx(0.75).epsilon(0.03));

  // shift invariance
  for (double c : {-50.0, 0.3, 700.0}) {
    const Eigen::Vector2d l(0.2, -1.1);
    const Eigen::Vector2d s = l.array() + c;
    CHECK((log_softmax(l) - log_softmax(s)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(select_action(l, SelectMode::argmax).action == select_action(s, SelectMode::argmax).action);
  }
}

TEST_CASE("greedy deployment matches argmax") {
  std::mt19937_64 rng(6);
  const ObservationLayout layout{1, 2, 2};
  const PolicyWeights w = init_weights(layout, 16, rng);
  const Eigen::MatrixXd obs = random_matrix(20, layout.size(), rng, 3.0);
  const auto a = greedy_actions(w, obs);
  const PolicyOutput out = policy_forward(w, obs);
  for (int i = 0; i < 20; ++i) {
    CHECK(a[i] == select_action(out.logits.row(i).transpose(), SelectMode::argmax).action);
  }
}

TEST_CASE("weights validation") {
  std::mt19937_64 rng(7);
  PolicyWeights w = init_weights(ObservationLayout{1, 1, 2}, 8, rng);
  CHECK_NOTHROW(w.validate());
  w.policy[3] = std::nan("");
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
  w = init_weights(ObservationLayout{1, 1, 2}, 8, rng);
  w.value.conservativeResize(w.value.size() - 1);
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
}
