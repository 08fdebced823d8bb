#include "dynamo/policies.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

#include "dynamo/error.hpp"

namespace dynamo {

std::vector<Action> threshold_absolute(std::span<const double> errors, double theta) {
  if (!(theta > 0.0)) throw InvalidArgument("threshold must be positive");
  std::vector<Action> a(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    a[i] = errors[i] > theta ? Action::fine : Action::coarse;
  }
  return a;
}

std::vector<Action> threshold_relative(std::span<const double> errors, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("relative threshold outside [0, 1]");
  std::vector<Action> a(errors.size(), Action::coarse);
  if (errors.empty()) return a;
  const auto [lo, hi] = std::minmax_element(errors.begin(), errors.end());
  const double e_min = *lo;
  const double e_max = *hi;
  if (!(e_max > e_min)) return a;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if ((e_max - errors[i]) / (e_max - e_min) > theta) a[i] = Action::fine;
  }
  return a;
}

Eigen::Index NetworkShape::parameter_count() const {
  const Eigen::Index d = inputs, h = hidden, o = outputs;
  return h * d + h + h * h + h + o * h + o;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct Layout {
  Eigen::Index w1, b1, w2, b2, w3, b3;
};

Layout offsets(const NetworkShape& s) {
  Layout l{};
  const Eigen::Index d = s.inputs, h = s.hidden, o = s.outputs;
  l.w1 = 0;
  l.b1 = l.w1 + h * d;
  l.w2 = l.b1 + h;
  l.b2 = l.w2 + h * h;
  l.w3 = l.b2 + h;
  l.b3 = l.w3 + o * h;
  return l;
}

void check(const NetworkShape& s, const Eigen::VectorXd& params, Eigen::Index input_cols) {
  if (params.size() != s.parameter_count()) throw InvalidArgument("parameter count mismatch");
  if (input_cols != s.inputs) throw InvalidArgument("observation size does not match network");
}

RowMatrix orthogonal(Eigen::Index rows, Eigen::Index cols, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool tall = rows >= cols;
  const Eigen::Index r = tall ? rows : cols;
  const Eigen::Index c = tall ? cols : rows;
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::MatrixXd rr = qr.matrixQR().topLeftCorner(c, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    if (rr(j, j) < 0.0) q.col(j) *= -1.0;
  }
  RowMatrix out = tall ? RowMatrix(q) : RowMatrix(q.transpose());
  return gain * out;
}

Eigen::VectorXd init_network(const NetworkShape& s, double out_gain, std::mt19937_64& rng) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(s.parameter_count());
  const Layout l = offsets(s);
  const RowMatrix w1 = orthogonal(s.hidden, s.inputs, 1.0, rng);
  const RowMatrix w2 = orthogonal(s.hidden, s.hidden, 1.0, rng);
  const RowMatrix w3 = orthogonal(s.outputs, s.hidden, out_gain, rng);
  p.segment(l.w1, w1.size()) = Eigen::Map<const Eigen::VectorXd>(w1.data(), w1.size());
  p.segment(l.w2, w2.size()) = Eigen::Map<const Eigen::VectorXd>(w2.data(), w2.size());
  p.segment(l.w3, w3.size()) = Eigen::Map<const Eigen::VectorXd>(w3.data(), w3.size());
  return p;
}

}  // namespace

MlpTape mlp_forward(const NetworkShape& s, const Eigen::VectorXd& params,
                    const Eigen::MatrixXd& input) {
  check(s, params, input.cols());
  const Layout l = offsets(s);
  const ConstMap w1(params.data() + l.w1, s.hidden, s.inputs);
  const ConstVecMap b1(params.data() + l.b1, s.hidden);
  const ConstMap w2(params.data() + l.w2, s.hidden, s.hidden);
  const ConstVecMap b2(params.data() + l.b2, s.hidden);
  const ConstMap w3(params.data() + l.w3, s.outputs, s.hidden);
  const ConstVecMap b3(params.data() + l.b3, s.outputs);

  MlpTape t;
  t.input = input;
  t.h1 = ((input * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
  t.h2 = ((t.h1 * w2.transpose()).rowwise() + b2.transpose()).array().tanh();
  t.output = (t.h2 * w3.transpose()).rowwise() + b3.transpose();
  return t;
}

Eigen::VectorXd mlp_backward(const NetworkShape& s, const Eigen::VectorXd& params,
                             const MlpTape& tape, const Eigen::MatrixXd& d_output) {
  check(s, params, tape.input.cols());
  const Layout l = offsets(s);
  const ConstMap w2(params.data() + l.w2, s.hidden, s.hidden);
  const ConstMap w3(params.data() + l.w3, s.outputs, s.hidden);

  Eigen::VectorXd g(params.size());
  auto put = [&g](Eigen::Index at, const RowMatrix& m) {
    g.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  };
  put(l.w3, d_output.transpose() * tape.h2);
  g.segment(l.b3, s.outputs) = d_output.colwise().sum().transpose();

  const Eigen::MatrixXd d2 =
      ((d_output * w3).array() * (1.0 - tape.h2.array().square())).matrix();
  put(l.w2, d2.transpose() * tape.h1);
  g.segment(l.b2, s.hidden) = d2.colwise().sum().transpose();

  const Eigen::MatrixXd d1 = ((d2 * w2).array() * (1.0 - tape.h1.array().square())).matrix();
  put(l.w1, d1.transpose() * tape.input);
  g.segment(l.b1, s.hidden) = d1.colwise().sum().transpose();
  return g;
}

void PolicyWeights::validate() const {
  if (hidden < 1) throw InvalidArgument("hidden width must be positive");
  if (policy.size() != policy_shape().parameter_count() ||
      value.size() != value_shape().parameter_count()) {
    throw InvalidArgument("weights do not match the network shape");
  }
  if (!policy.allFinite() || !value.allFinite()) throw InvalidArgument("non-finite weights");
}

PolicyWeights init_weights(const ObservationLayout& layout, int hidden, std::mt19937_64& rng) {
  PolicyWeights w;
  w.layout = layout;
  w.hidden = hidden;
  w.policy = init_network(w.policy_shape(), 0.01, rng);
  w.value = init_network(w.value_shape(), 1.0, rng);
  return w;
}

PolicyOutput policy_forward(const PolicyWeights& weights, const Eigen::MatrixXd& observations) {
  PolicyOutput out;
  out.logits = mlp_forward(weights.policy_shape(), weights.policy, observations).output;
  out.values = mlp_forward(weights.value_shape(), weights.value, observations).output.col(0);
  return out;
}

Eigen::Vector2d log_softmax(const Eigen::Vector2d& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
  return logits.array() - lse;
}

ActionChoice select_action(const Eigen::Vector2d& logits, SelectMode mode, std::mt19937_64* rng) {
  if (!logits.allFinite()) throw InvalidArgument("non-finite logits");
  const Eigen::Vector2d lp = log_softmax(logits);
  ActionChoice c;
  if (mode == SelectMode::argmax) {
    c.action = logits[1] > logits[0] ? Action::fine : Action::coarse;
  } else {
    if (!rng) throw InvalidArgument("sampling needs a random generator");
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(*rng);
    c.action = u < std::exp(lp[0]) ? Action::coarse : Action::fine;
  }
  c.log_prob = lp[static_cast<int>(c.action)];
  return c;
}

std::vector<Action> greedy_actions(const PolicyWeights& weights,
                                   const Eigen::MatrixXd& observations) {
  const Eigen::MatrixXd logits =
      mlp_forward(weights.policy_shape(), weights.policy, observations).output;
  std::vector<Action> a(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    a[i] = select_action(logits.row(i).transpose(), SelectMode::argmax).action;
  }
  return a;
}

}  // namespace dynamo
