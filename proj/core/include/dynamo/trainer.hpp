#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynamo/checkpoint.hpp"
#include "dynamo/env.hpp"
#include "dynamo/policies.hpp"

namespace dynamo {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  double learning_rate = 1e-4;
  int fragment_length = 20;
  int batch_size = 1000;
  int minibatch_size = 50;
  int epochs = 1;
  double clip = 0.3;
  double gamma = 0.99;
  double lambda = 1.0;
  double vf_coef = 1.0;
  double entropy_coef = 0.0;
  int iterations = 100;
  int envs = 1;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int hidden = 256;

  void validate() const;
};

/// Pooled per-agent transitions of every environment and agent.
struct TrajectoryBuffer {
  int observation_size = 0;
  std::vector<double> observations;  // row-major, one row per transition
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<char> dones;
  /// Transitions sharing an id form one agent trajectory, in time order.
  std::vector<long> trajectory;
  /// Value of the observation that follows a transition; only read for the
  /// last transition of a trajectory cut without `done`.
  std::vector<double> next_values;

  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
  Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> observation(std::size_t i) const;
  void append(const TrajectoryBuffer& other);
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalised advantage estimation over one trajectory. `bootstrap` is the
/// value after the last step and is ignored when that step is done.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const char> dones, double bootstrap, double gamma, double lambda);

/// Fills buffer.advantages / returns trajectory by trajectory.
void compute_advantages(TrajectoryBuffer& buffer, double gamma, double lambda);

/// Rescales to zero mean and unit (population) standard deviation.
void normalize_advantages(std::vector<double>& advantages);

/// One environment with its random streams and the state of its running
/// episode, so fragments continue episodes across iterations.
struct RolloutWorker {
  std::unique_ptr<AmrEnv> env;
  std::mt19937_64 problem_rng;
  std::mt19937_64 action_rng;
  Eigen::MatrixXd observations;
  bool needs_reset = true;
  long next_trajectory = 0;
  long env_steps = 0;
};

std::vector<RolloutWorker> make_workers(const EnvConfig& config, int count, std::uint64_t seed);

/// Advances every worker `fragment_length` env steps with actions sampled
/// from the policy; each agent contributes one transition per step.
TrajectoryBuffer collect_rollouts(std::vector<RolloutWorker>& workers, const PolicyWeights& weights,
                                  int fragment_length);

struct Minibatch {
  Eigen::MatrixXd observations;
  std::vector<int> actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

Minibatch gather(const TrajectoryBuffer& buffer, std::span<const std::size_t> indices);

struct LossReport {
  double policy_loss = 0.0;  // negative clipped surrogate minus entropy bonus
  double value_loss = 0.0;   // mean squared error
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
};

struct LossGradient {
  LossReport report;
  Eigen::VectorXd policy;  // d policy_loss / d policy weights
  Eigen::VectorXd value;   // d (vf_coef * value_loss) / d value weights
};

LossGradient ppo_loss(const PolicyWeights& weights, const Minibatch& batch,
                      const TrainConfig& config);

/// First and second moment estimates of the adaptive optimizer.
struct OptimizerState {
  Eigen::VectorXd m_policy, v_policy, m_value, v_value;
  long step = 0;
};

/// Shuffled minibatch passes over the buffer for the configured epochs.
/// Advantages must have been computed. Throws Error on a non-finite loss.
LossReport ppo_update(PolicyWeights& weights, OptimizerState& optimizer,
                      const TrajectoryBuffer& buffer, const TrainConfig& config,
                      std::mt19937_64& rng);

struct IterationLog {
  int iteration = 0;
  long env_steps = 0;
  double batch_mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

struct TrainResult {
  std::vector<IterationLog> log;
  PolicyWeights final_weights;
  double best_reward = 0.0;
  int best_iteration = 0;
};

/// Collect/update loop. Writes metrics.csv, policy_latest.ck and
/// policy_best.ck (plus policy_initial.ck) into `directory`. With `resume`,
/// continues from policy_latest.ck and appends to the metrics log.
TrainResult train(const EnvConfig& env_config, const TrainConfig& config,
                  const std::string& directory, bool resume = false,
                  const std::function<void(const IterationLog&)>& progress = {});

}  // namespace dynamo
