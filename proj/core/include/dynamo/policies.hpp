#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynamo/env.hpp"
#include "dynamo/mesh.hpp"

namespace dynamo {

/// fine where e_i > theta. Requires theta > 0.
std::vector<Action> threshold_absolute(std::span<const double> errors, double theta);

/// fine where (e_max - e_i) / (e_max - e_min) > theta, with e_max, e_min the
/// field extrema. A constant field gives all coarse.
std::vector<Action> threshold_relative(std::span<const double> errors, double theta);

/// Dense tanh network with two hidden layers. Parameters are packed as
/// W1, b1, W2, b2, W3, b3 with each W stored row-major (outputs x inputs).
struct NetworkShape {
  int inputs = 0;
  int hidden = 256;
  int outputs = 2;

  Eigen::Index parameter_count() const;
};

/// Activations kept for the backward pass.
struct MlpTape {
  Eigen::MatrixXd input;  // batch x inputs
  Eigen::MatrixXd h1;     // batch x hidden, post-activation
  Eigen::MatrixXd h2;
  Eigen::MatrixXd output;  // batch x outputs
};

MlpTape mlp_forward(const NetworkShape& shape, const Eigen::VectorXd& params,
                    const Eigen::MatrixXd& input);
/// Gradient of sum(d_output .* output) with respect to the parameters.
Eigen::VectorXd mlp_backward(const NetworkShape& shape, const Eigen::VectorXd& params,
                             const MlpTape& tape, const Eigen::MatrixXd& d_output);

/// Independent policy (2 logits) and value (1 output) networks.
struct PolicyWeights {
  ObservationLayout layout;
  int hidden = 256;
  Eigen::VectorXd policy;
  Eigen::VectorXd value;

  int inputs() const { return layout.size(); }
  NetworkShape policy_shape() const { return {inputs(), hidden, 2}; }
  NetworkShape value_shape() const { return {inputs(), hidden, 1}; }
  /// Throws InvalidArgument on inconsistent sizes or non-finite values.
  void validate() const;
};

/// Orthogonal initialisation: gain 1 for hidden layers, 0.01 for the logit
/// layer, 1 for the value head; zero biases.
PolicyWeights init_weights(const ObservationLayout& layout, int hidden, std::mt19937_64& rng);

struct PolicyOutput {
  Eigen::MatrixXd logits;  // batch x 2
  Eigen::VectorXd values;
};

PolicyOutput policy_forward(const PolicyWeights& weights, const Eigen::MatrixXd& observations);

enum class SelectMode { sample, argmax };

struct ActionChoice {
  Action action = Action::coarse;
  double log_prob = 0.0;
};

/// Categorical draw (or argmax, ties to coarse) over softmax(logits).
ActionChoice select_action(const Eigen::Vector2d& logits, SelectMode mode,
                           std::mt19937_64* rng = nullptr);

/// log softmax of a 2-logit vector.
Eigen::Vector2d log_softmax(const Eigen::Vector2d& logits);

/// Deterministic deployment of the policy network.
std::vector<Action> greedy_actions(const PolicyWeights& weights,
                                   const Eigen::MatrixXd& observations);

}  // namespace dynamo
