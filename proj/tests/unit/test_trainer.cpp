#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "dynamo/checkpoint.hpp"
#include "dynamo/error.hpp"
#include "dynamo/trainer.hpp"

using namespace dynamo;
namespace fs = std::filesystem;

namespace {

EnvConfig tiny_env() {
  EnvConfig c;
  c.family = Family::adv_ring;
  c.agents_x = c.agents_y = 2;
  c.remesh_time = 0.02;
  c.rl_steps = 4;
  c.window_x = c.window_y = 1;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dynamo_trainer_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Transitions with a two-entry observation [s, 0]; action `fine` is right iff s > 0.
TrajectoryBuffer band_batch(const PolicyWeights& w, std::mt19937_64& rng, int n) {
  TrajectoryBuffer b;
  b.observation_size = 2;
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd obs(n, 2);
  for (int i = 0; i < n; ++i) obs.row(i) << u(rng), 0.0;
  const PolicyOutput out = policy_forward(w, obs);
  for (int i = 0; i < n; ++i) {
    const ActionChoice c = select_action(out.logits.row(i).transpose(), SelectMode::sample, &rng);
    const bool right = (c.action == Action::fine) == (obs(i, 0) > 0);
    b.observations.push_back(obs(i, 0));
    b.observations.push_back(0.0);
    b.actions.push_back(static_cast<int>(c.action));
    b.log_probs.push_back(c.log_prob);
    b.rewards.push_back(right ? 0.0 : -1.0);
    b.values.push_back(out.values[i]);
    b.dones.push_back(1);
    b.trajectory.push_back(i);
    b.next_values.push_back(0.0);
  }
  return b;
}

}  // namespace

TEST_CASE("gae examples") {
  const std::vector<double> r1{1.0}, v1{0.0};
  const std::vector<char> d1{1};
  const GaeResult g1 = gae(r1, v1, d1, 5.0, 0.99, 1.0);
  CHECK(g1.advantages[0] == doctest::Approx(1.0));
  CHECK(g1.returns[0] == doctest::Approx(1.0));

  const std::vector<double> z(5, 0.0);
  const std::vector<char> dz(5, 0);
  const GaeResult gz = gae(z, z, dz, 0.0, 0.99, 0.95);
  for (double a : gz.advantages) CHECK(a == 0.0);

  const std::vector<double> r2{0.0, -1.0}, v2{0.0, 0.0};
  const std::vector<char> d2{0, 1};
  const GaeResult g2 = gae(r2, v2, d2, 0.0, 1.0, 1.0);
  CHECK(g2.advantages[0] == doctest::Approx(-1.0));
  CHECK(g2.advantages[1] == doctest::Approx(-1.0));

  // bootstrap enters only without done, discounted returns otherwise
  const std::vector<double> r3{1.0, 1.0, 1.0}, v3{0.5, 0.2, -0.1};
  const std::vector<char> d3{0, 0, 0};
  const GaeResult g3 = gae(r3, v3, d3, 2.0, 0.9, 1.0);
  CHECK(g3.returns[0] == doctest::Approx(1 + 0.9 + 0.81 + 0.729 * 2.0));
  CHECK(g3.returns[2] == doctest::Approx(1 + 0.9 * 2.0));

  // lambda = 0 is one-step TD
  const GaeResult g4 = gae(r3, v3, d3, 2.0, 0.9, 0.0);
  CHECK(g4.advantages[0] == doctest::Approx(1 + 0.9 * 0.2 - 0.5));
  CHECK(g4.advantages[2] == doctest::Approx(1 + 0.9 * 2.0 + 0.1));
  CHECK_THROWS_AS(gae(r3, v2, d3, 0.0, 0.9, 1.0), InvalidArgument);
}

TEST_CASE("advantage normalisation") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(3.0, 7.0);
  std::vector<double> a(1000);
  for (double& x : a) x = g(rng);
  normalize_advantages(a);
  double mean = 0, var = 0;
  for (double x : a) mean += x;
  mean /= a.size();
  for (double x : a) var += (x - mean) * (x - mean);
  CHECK(std::abs(mean) < 1e-10);
  CHECK(std::abs(std::sqrt(var / a.size()) - 1.0) < 1e-6);

  std::vector<double> c(4, 2.0);
  normalize_advantages(c);
  for (double x : c) CHECK(x == 0.0);
}

TEST_CASE("rollout collection") {
  const EnvConfig env = tiny_env();
  auto workers = make_workers(env, 1, 11);
  std::mt19937_64 rng(2);
  const PolicyWeights w = init_weights(workers[0].env->layout(), 16, rng);
  const TrajectoryBuffer b = collect_rollouts(workers, w, 20);
  REQUIRE(b.size() == 80);
  CHECK(b.observations.size() == 80 * static_cast<std::size_t>(w.inputs()));
  int dones = 0;
  for (char d : b.dones) dones += d;
  CHECK(dones == 5 * 4);
  // 5 episodes of 4 agents each
  std::set<long> ids(b.trajectory.begin(), b.trajectory.end());
  CHECK(ids.size() == 20);
  for (double r : b.rewards) CHECK(r <= 0.0);
  for (double lp : b.log_probs) CHECK(lp <= 0.0);

  auto again = make_workers(env, 1, 11);
  const TrajectoryBuffer c = collect_rollouts(again, w, 20);
  CHECK(c.actions == b.actions);
  CHECK(c.rewards == b.rewards);
  CHECK(c.observations == b.observations);

  // fragments continue a running episode and bootstrap its cut
  auto cont = make_workers(env, 1, 11);
  TrajectoryBuffer f = collect_rollouts(cont, w, 3);
  CHECK_FALSE(cont[0].needs_reset);
  for (char d : f.dones) CHECK(d == 0);
  const Eigen::VectorXd boot = policy_forward(w, cont[0].observations).values;
  for (int a = 0; a < 4; ++a) CHECK(f.next_values[8 + a] == boot[a]);
  compute_advantages(f, 0.99, 1.0);
  CHECK(f.advantages.size() == 12);
}

TEST_CASE("ppo gradient matches finite differences") {
  std::mt19937_64 rng(3);
  const ObservationLayout layout{1, 1, 2};
  PolicyWeights w = init_weights(layout, 12, rng);
  // larger weights give a non-trivial policy
  w.policy *= 20.0;
  const int n = 16;
  Minibatch mb;
  std::normal_distribution<double> g;
  mb.observations.resize(n, layout.size());
  for (Eigen::Index i = 0; i < mb.observations.size(); ++i) mb.observations.data()[i] = g(rng);
  const PolicyOutput out = policy_forward(w, mb.observations);
  mb.old_log_probs.resize(n);
  mb.advantages.resize(n);
  mb.returns.resize(n);
  for (int i = 0; i < n; ++i) {
    mb.actions.push_back(i % 2);
    // old policy close to the current one: ratios stay inside the clip range
    mb.old_log_probs[i] = log_softmax(out.logits.row(i).transpose())[i % 2] + 0.05 * g(rng);
    mb.advantages[i] = g(rng);
    mb.returns[i] = g(rng);
  }
  TrainConfig cfg;
  cfg.entropy_coef = 0.01;
  cfg.vf_coef = 0.5;
  const LossGradient lg = ppo_loss(w, mb, cfg);
  CHECK(lg.report.clip_fraction == 0.0);

  std::uniform_int_distribution<Eigen::Index> pick_p(0, w.policy.size() - 1);
  std::uniform_int_distribution<Eigen::Index> pick_v(0, w.value.size() - 1);
  const double h = 1e-6;
  for (int k = 0; k < 40; ++k) {
    const Eigen::Index i = pick_p(rng);
    PolicyWeights a = w, b = w;
    a.policy[i] += h;
    b.policy[i] -= h;
    const double fd =
        (ppo_loss(a, mb, cfg).report.policy_loss - ppo_loss(b, mb, cfg).report.policy_loss) / (2 * h);
    CHECK(std::abs(fd - lg.policy[i]) <= 1e-5 * std::max(1.0, std::abs(fd)));

    const Eigen::Index j = pick_v(rng);
    a = w;
    b = w;
    a.value[j] += h;
    b.value[j] -= h;
    const double fv = cfg.vf_coef *
                      (ppo_loss(a, mb, cfg).report.value_loss - ppo_loss(b, mb, cfg).report.value_loss) /
                      (2 * h);
    CHECK(std::abs(fv - lg.value[j]) <= 1e-5 * std::max(1.0, std::abs(fv)));
  }
}

TEST_CASE("ppo loss special cases") {
  std::mt19937_64 rng(4);
  const ObservationLayout layout{1, 1, 2};
  const PolicyWeights w = init_weights(layout, 8, rng);
  Minibatch mb;
  mb.observations = Eigen::MatrixXd::Random(6, layout.size());
  const PolicyOutput out = policy_forward(w, mb.observations);
  mb.old_log_probs.resize(6);
  for (int i = 0; i < 6; ++i) {
    mb.actions.push_back(i % 2);
    mb.old_log_probs[i] = log_softmax(out.logits.row(i).transpose())[i % 2];
  }
  mb.advantages = Eigen::VectorXd::Zero(6);
  mb.returns = Eigen::VectorXd::Zero(6);
  TrainConfig cfg;
  CHECK(ppo_loss(w, mb, cfg).policy.cwiseAbs().maxCoeff() == 0.0);

  // at ratio 1 the clipped and unclipped objectives agree: loss = -mean(A)
  mb.advantages << 1, -2, 3, 0.5, -0.5, 1;
  const LossGradient lg = ppo_loss(w, mb, cfg);
  CHECK(lg.report.policy_loss == doctest::Approx(-mb.advantages.mean()));
  CHECK(lg.report.clip_fraction == 0.0);
  TrainConfig narrow = cfg;
  narrow.clip = 1e-3;
  CHECK(ppo_loss(w, mb, narrow).report.policy_loss == doctest::Approx(lg.report.policy_loss));
}

TEST_CASE("zero learning rate leaves weights unchanged") {
  const EnvConfig env = tiny_env();
  auto workers = make_workers(env, 1, 5);
  std::mt19937_64 rng(5);
  PolicyWeights w = init_weights(workers[0].env->layout(), 16, rng);
  const PolicyWeights before = w;
  TrajectoryBuffer b = collect_rollouts(workers, w, 20);
  compute_advantages(b, 0.99, 1.0);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 80;
  cfg.minibatch_size = 20;
  OptimizerState opt;
  ppo_update(w, opt, b, cfg, rng);
  CHECK(w.policy == before.policy);
  CHECK(w.value == before.value);
  cfg.optimizer = OptimizerKind::adam;
  ppo_update(w, opt, b, cfg, rng);
  CHECK(w.policy == before.policy);
}

TEST_CASE("update raises the probability of advantageous actions") {
  std::mt19937_64 rng(6);
  const ObservationLayout layout{0, 0, 2};
  PolicyWeights w = init_weights(layout, 16, rng);
  TrajectoryBuffer b;
  b.observation_size = 2;
  const Eigen::MatrixXd x = Eigen::RowVector2d(0.3, -0.2);
  const Eigen::Vector2d lp0 = log_softmax(policy_forward(w, x).logits.row(0).transpose());
  for (int i = 0; i < 100; ++i) {
    const int a = i % 2;
    b.observations.insert(b.observations.end(), {0.3, -0.2});
    b.actions.push_back(a);
    b.log_probs.push_back(lp0[a]);
    b.rewards.push_back(a == 1 ? 1.0 : 0.0);
    b.values.push_back(0.0);
    b.dones.push_back(1);
    b.trajectory.push_back(i);
    b.next_values.push_back(0.0);
  }
  compute_advantages(b, 0.99, 1.0);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 100;
  cfg.minibatch_size = 100;
  OptimizerState opt;
  ppo_update(w, opt, b, cfg, rng);
  const Eigen::Vector2d lp1 = log_softmax(policy_forward(w, x).logits.row(0).transpose());
  CHECK(lp1[1] > lp0[1]);
}

TEST_CASE("policy learns a band rule") {
  std::mt19937_64 rng(7);
  PolicyWeights w = init_weights(ObservationLayout{0, 0, 2}, 16, rng);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::adam;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 200;
  cfg.minibatch_size = 50;
  cfg.epochs = 2;
  OptimizerState opt;
  double first = 0, last = 0;
  for (int it = 0; it < 60; ++it) {
    TrajectoryBuffer b = band_batch(w, rng, 200);
    compute_advantages(b, cfg.gamma, cfg.lambda);
    double mean = 0;
    for (double r : b.rewards) mean += r / 200.0;
    if (it < 5) first += mean / 5;
    if (it >= 55) last += mean / 5;
    ppo_update(w, opt, b, cfg, rng);
  }
  CHECK(last > first);
  Eigen::MatrixXd probe(2, 2);
  probe << 0.8, 0, -0.8, 0;
  const auto a = greedy_actions(w, probe);
  CHECK(a[0] == Action::fine);
  CHECK(a[1] == Action::coarse);
}

TEST_CASE("train writes checkpoints and metrics") {
  const fs::path dir = scratch("zero");
  TrainConfig cfg;
  cfg.iterations = 0;
  cfg.hidden = 8;
  const TrainResult r0 = train(tiny_env(), cfg, dir.string());
  CHECK(r0.log.empty());
  CHECK(fs::exists(dir / "policy_initial.ck"));
  CHECK(fs::exists(dir / "policy_latest.ck"));
  CHECK_FALSE(fs::exists(dir / "policy_best.ck"));
  CHECK(slurp(dir / "metrics.csv") == "iteration,env_steps,batch_mean_reward,policy_loss,value_loss\n");
  fs::remove_all(dir);
}

TEST_CASE("train is reproducible and resumable") {
  TrainConfig cfg;
  cfg.iterations = 2;
  cfg.hidden = 8;
  cfg.batch_size = 80;
  cfg.minibatch_size = 20;
  cfg.learning_rate = 1e-3;
  cfg.optimizer = OptimizerKind::adam;
  cfg.seed = 9;
  const fs::path a = scratch("a"), b = scratch("b");
  const TrainResult ra = train(tiny_env(), cfg, a.string());
  const TrainResult rb = train(tiny_env(), cfg, b.string());
  REQUIRE(ra.log.size() == 2);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(ra.final_weights.policy == rb.final_weights.policy);
  CHECK(ra.log[1].env_steps == 40);
  CHECK(fs::exists(a / "policy_best.ck"));

  const Checkpoint latest = load_checkpoint((a / "policy_latest.ck").string());
  CHECK(latest.weights.policy == ra.final_weights.policy);
  CHECK(latest.find_extra("adam_m_policy") != nullptr);

  cfg.iterations = 1;
  const TrainResult rc = train(tiny_env(), cfg, a.string(), true);
  REQUIRE(rc.log.size() == 1);
  CHECK(rc.log[0].iteration == 3);
  CHECK(rc.log[0].env_steps == 60);
  std::ifstream in(a / "metrics.csv");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 4);
  fs::remove_all(a);
  fs::remove_all(b);

  TrainConfig bad = cfg;
  bad.minibatch_size = 200;
  CHECK_THROWS_AS(train(tiny_env(), bad, scratch("bad").string()), InvalidArgument);
  CHECK_THROWS_AS(train(tiny_env(), cfg, scratch("missing").string(), true), IoError);
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(8);
  Checkpoint ck;
  ck.weights = init_weights(ObservationLayout{2, 1, 3}, 10, rng);
  ck.info = R"({"note":"x","n":3})";
  ck.extra = {{"moments", Eigen::VectorXd::Random(17)}};
  const fs::path p = fs::temp_directory_path() / "dynamo_ck_test.ck";
  save_checkpoint(p.string(), ck);
  const Checkpoint back = load_checkpoint(p.string());
  CHECK(back.weights.policy == ck.weights.policy);
  CHECK(back.weights.value == ck.weights.value);
  CHECK(back.weights.hidden == 10);
  CHECK(back.weights.layout.window_x == 2);
  CHECK(back.weights.layout.window_y == 1);
  CHECK(back.weights.layout.channels == 3);
  REQUIRE(back.find_extra("moments"));
  CHECK(*back.find_extra("moments") == ck.extra[0].second);
  CHECK(back.find_extra("other") == nullptr);
  CHECK(nlohmann::json::parse(back.info) == nlohmann::json::parse(ck.info));

  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.write("BADMAGIC", 8);
  }
  CHECK_THROWS_AS(load_checkpoint(p.string()), IoError);
  fs::remove(p);
  CHECK_THROWS_AS(load_checkpoint(p.string()), IoError);
}
