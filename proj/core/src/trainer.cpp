#include "dynamo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dynamo/error.hpp"

namespace dynamo {

namespace fs = std::filesystem;
using json = nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
  if (fragment_length < 1) throw InvalidArgument("fragment length must be positive");
  if (batch_size < 1 || minibatch_size < 1) throw InvalidArgument("batch sizes must be positive");
  if (minibatch_size > batch_size) throw InvalidArgument("minibatch larger than batch");
  if (epochs < 1) throw InvalidArgument("epochs must be positive");
  if (!(clip > 0.0)) throw InvalidArgument("clip must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma outside [0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda outside [0, 1]");
  if (!(vf_coef >= 0.0) || !(entropy_coef >= 0.0)) throw InvalidArgument("negative loss weight");
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (envs < 1) throw InvalidArgument("need at least one environment");
  if (hidden < 1) throw InvalidArgument("hidden width must be positive");
}

Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> TrajectoryBuffer::observation(
    std::size_t i) const {
  return {observations.data() + i * observation_size, 1, observation_size,
          Eigen::OuterStride<>(1)};
}

void TrajectoryBuffer::append(const TrajectoryBuffer& o) {
  if (observation_size == 0) observation_size = o.observation_size;
  if (o.size() > 0 && o.observation_size != observation_size) {
    throw InvalidArgument("observation size mismatch between buffers");
  }
  const long offset = trajectory.empty()
                          ? 0
                          : *std::max_element(trajectory.begin(), trajectory.end()) + 1;
  observations.insert(observations.end(), o.observations.begin(), o.observations.end());
  actions.insert(actions.end(), o.actions.begin(), o.actions.end());
  log_probs.insert(log_probs.end(), o.log_probs.begin(), o.log_probs.end());
  rewards.insert(rewards.end(), o.rewards.begin(), o.rewards.end());
  values.insert(values.end(), o.values.begin(), o.values.end());
  dones.insert(dones.end(), o.dones.begin(), o.dones.end());
  for (long t : o.trajectory) trajectory.push_back(t + offset);
  next_values.insert(next_values.end(), o.next_values.begin(), o.next_values.end());
  advantages.insert(advantages.end(), o.advantages.begin(), o.advantages.end());
  returns.insert(returns.end(), o.returns.begin(), o.returns.end());
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const char> dones, double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw InvalidArgument("GAE input length mismatch");
  GaeResult r;
  r.advantages.resize(n);
  r.returns.resize(n);
  double next_value = bootstrap;
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    running = delta + gamma * lambda * live * running;
    r.advantages[k] = running;
    r.returns[k] = running + values[k];
    next_value = values[k];
  }
  return r;
}

void compute_advantages(TrajectoryBuffer& b, double gamma, double lambda) {
  std::vector<std::size_t> order(b.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return b.trajectory[a] < b.trajectory[c]; });
  b.advantages.assign(b.size(), 0.0);
  b.returns.assign(b.size(), 0.0);
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start;
    while (end < order.size() && b.trajectory[order[end]] == b.trajectory[order[start]]) ++end;
    std::vector<double> r, v;
    std::vector<char> d;
    for (std::size_t k = start; k < end; ++k) {
      r.push_back(b.rewards[order[k]]);
      v.push_back(b.values[order[k]]);
      d.push_back(b.dones[order[k]]);
    }
    const GaeResult g = gae(r, v, d, b.next_values[order[end - 1]], gamma, lambda);
    for (std::size_t k = start; k < end; ++k) {
      b.advantages[order[k]] = g.advantages[k - start];
      b.returns[order[k]] = g.returns[k - start];
    }
    start = end;
  }
}

void normalize_advantages(std::vector<double>& a) {
  if (a.empty()) return;
  const double n = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double std = std::sqrt(var / n);
  for (double& x : a) x = (x - mean) / std::max(std, 1e-8);
}

std::vector<RolloutWorker> make_workers(const EnvConfig& config, int count, std::uint64_t seed) {
  std::vector<RolloutWorker> workers;
  for (int w = 0; w < count; ++w) {
    RolloutWorker worker;
    worker.env = std::make_unique<AmrEnv>(config);
    std::seed_seq problem_seed{seed, static_cast<std::uint64_t>(w), std::uint64_t{1}};
    std::seed_seq action_seed{seed, static_cast<std::uint64_t>(w), std::uint64_t{2}};
    worker.problem_rng.seed(problem_seed);
    worker.action_rng.seed(action_seed);
    workers.push_back(std::move(worker));
  }
  return workers;
}

TrajectoryBuffer collect_rollouts(std::vector<RolloutWorker>& workers, const PolicyWeights& weights,
                                  int fragment_length) {
  TrajectoryBuffer buffer;
  buffer.observation_size = weights.inputs();
  long trajectory_base = 0;
  for (RolloutWorker& w : workers) {
    // Trajectory ids are local to this fragment: one per (episode segment, agent).
    long segment = 0;
    bool fresh_segment = true;
    std::vector<std::size_t> last_of_agent;
    for (int step = 0; step < fragment_length; ++step) {
      if (w.needs_reset) {
        w.observations = w.env->reset(w.problem_rng);
        w.needs_reset = false;
        if (!fresh_segment) ++segment;
      }
      fresh_segment = false;
      const int agents = w.env->agent_count();
      if (w.observations.cols() != weights.inputs()) {
        throw InvalidArgument("environment observations do not match the network input size");
      }
      const PolicyOutput out = policy_forward(weights, w.observations);
      std::vector<Action> actions(agents);
      std::vector<double> log_probs(agents);
      for (int a = 0; a < agents; ++a) {
        const ActionChoice c =
            select_action(out.logits.row(a).transpose(), SelectMode::sample, &w.action_rng);
        actions[a] = c.action;
        log_probs[a] = c.log_prob;
      }
      const StepResult result = w.env->step(actions);
      ++w.env_steps;
      last_of_agent.assign(agents, 0);
      for (int a = 0; a < agents; ++a) {
        const auto row = w.observations.row(a);
        for (Eigen::Index k = 0; k < row.size(); ++k) buffer.observations.push_back(row[k]);
        buffer.actions.push_back(static_cast<int>(actions[a]));
        buffer.log_probs.push_back(log_probs[a]);
        buffer.rewards.push_back(result.rewards[a]);
        buffer.values.push_back(out.values[a]);
        buffer.dones.push_back(result.done ? 1 : 0);
        buffer.trajectory.push_back(trajectory_base + segment * agents + a);
        buffer.next_values.push_back(0.0);
        last_of_agent[a] = buffer.size() - 1;
      }
      w.observations = result.observations;
      if (result.done) {
        w.needs_reset = true;
        ++segment;
        fresh_segment = true;
      }
    }
    if (!w.needs_reset) {
      const Eigen::VectorXd bootstrap = policy_forward(weights, w.observations).values;
      for (std::size_t a = 0; a < last_of_agent.size(); ++a) {
        buffer.next_values[last_of_agent[a]] = bootstrap[static_cast<Eigen::Index>(a)];
      }
    }
    long max_id = trajectory_base - 1;
    for (long t : buffer.trajectory) max_id = std::max(max_id, t);
    trajectory_base = max_id + 1;
  }
  return buffer;
}

Minibatch gather(const TrajectoryBuffer& b, std::span<const std::size_t> idx) {
  Minibatch m;
  const auto n = static_cast<Eigen::Index>(idx.size());
  m.observations.resize(n, b.observation_size);
  m.actions.resize(idx.size());
  m.old_log_probs.resize(n);
  m.advantages.resize(n);
  m.returns.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t i = idx[k];
    m.observations.row(k) = b.observation(i);
    m.actions[k] = b.actions[i];
    m.old_log_probs[k] = b.log_probs[i];
    m.advantages[k] = b.advantages.at(i);
    m.returns[k] = b.returns.at(i);
  }
  return m;
}

LossGradient ppo_loss(const PolicyWeights& weights, const Minibatch& batch,
                      const TrainConfig& config) {
  const Eigen::Index n = batch.observations.rows();
  if (n == 0) throw InvalidArgument("empty minibatch");
  const MlpTape pt = mlp_forward(weights.policy_shape(), weights.policy, batch.observations);
  const MlpTape vt = mlp_forward(weights.value_shape(), weights.value, batch.observations);

  LossGradient out;
  Eigen::MatrixXd d_logits(n, 2);
  Eigen::MatrixXd d_values(n, 1);
  double surrogate = 0.0;
  double entropy = 0.0;
  double clipped = 0.0;
  double sq = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d lp = log_softmax(pt.output.row(i).transpose());
    const Eigen::Vector2d p = lp.array().exp();
    const int a = batch.actions[i];
    const double adv = batch.advantages[i];
    const double ratio = std::exp(lp[a] - batch.old_log_probs[i]);
    const double ratio_c = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
    const double unclipped = ratio * adv;
    const double clipped_term = ratio_c * adv;
    const bool use_unclipped = unclipped <= clipped_term;
    surrogate += std::min(unclipped, clipped_term);
    if (!use_unclipped) clipped += 1.0;
    const double h = -(p.array() * lp.array()).sum();
    entropy += h;

    const double ds_dratio = use_unclipped ? adv : 0.0;
    for (int k = 0; k < 2; ++k) {
      const double dratio = ratio * ((k == a ? 1.0 : 0.0) - p[k]);
      const double dh = -p[k] * (lp[k] + h);
      d_logits(i, k) = (-ds_dratio * dratio - config.entropy_coef * dh) * inv_n;
    }
    const double diff = vt.output(i, 0) - batch.returns[i];
    sq += diff * diff;
    d_values(i, 0) = 2.0 * config.vf_coef * diff * inv_n;
  }
  out.report.entropy = entropy * inv_n;
  out.report.policy_loss = -surrogate * inv_n - config.entropy_coef * out.report.entropy;
  out.report.value_loss = sq * inv_n;
  out.report.total = out.report.policy_loss + config.vf_coef * out.report.value_loss;
  out.report.clip_fraction = clipped * inv_n;
  out.policy = mlp_backward(weights.policy_shape(), weights.policy, pt, d_logits);
  out.value = mlp_backward(weights.value_shape(), weights.value, vt, d_values);
  return out;
}

namespace {

void adam_step(Eigen::VectorXd& p, const Eigen::VectorXd& g, Eigen::VectorXd& m,
               Eigen::VectorXd& v, long step, const TrainConfig& c) {
  if (m.size() != p.size()) m = Eigen::VectorXd::Zero(p.size());
  if (v.size() != p.size()) v = Eigen::VectorXd::Zero(p.size());
  m = c.adam_beta1 * m + (1.0 - c.adam_beta1) * g;
  v = c.adam_beta2 * v + (1.0 - c.adam_beta2) * g.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(step));
  p.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.adam_epsilon);
}

}  // namespace

LossReport ppo_update(PolicyWeights& weights, OptimizerState& opt, const TrajectoryBuffer& buffer,
                      const TrainConfig& config, std::mt19937_64& rng) {
  if (buffer.size() < static_cast<std::size_t>(config.minibatch_size)) {
    throw InvalidArgument("buffer smaller than one minibatch");
  }
  if (buffer.advantages.size() != buffer.size()) throw InvalidArgument("advantages missing");
  std::vector<double> adv = buffer.advantages;
  normalize_advantages(adv);

  LossReport mean;
  int batches = 0;
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.minibatch_size) {
      const std::size_t end = std::min(order.size(), start + config.minibatch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Minibatch mb = gather(buffer, idx);
      for (Eigen::Index k = 0; k < mb.advantages.size(); ++k) mb.advantages[k] = adv[idx[k]];
      const LossGradient g = ppo_loss(weights, mb, config);
      if (!std::isfinite(g.report.total) || !g.policy.allFinite() || !g.value.allFinite()) {
        throw Error("non-finite PPO loss (policy " + std::to_string(g.report.policy_loss) +
                    ", value " + std::to_string(g.report.value_loss) + ")");
      }
      if (config.optimizer == OptimizerKind::sgd) {
        weights.policy -= config.learning_rate * g.policy;
        weights.value -= config.learning_rate * g.value;
      } else {
        ++opt.step;
        adam_step(weights.policy, g.policy, opt.m_policy, opt.v_policy, opt.step, config);
        adam_step(weights.value, g.value, opt.m_value, opt.v_value, opt.step, config);
      }
      mean.policy_loss += g.report.policy_loss;
      mean.value_loss += g.report.value_loss;
      mean.entropy += g.report.entropy;
      mean.total += g.report.total;
      mean.clip_fraction += g.report.clip_fraction;
      ++batches;
    }
  }
  const double inv = 1.0 / batches;
  mean.policy_loss *= inv;
  mean.value_loss *= inv;
  mean.entropy *= inv;
  mean.total *= inv;
  mean.clip_fraction *= inv;
  return mean;
}

namespace {

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream s(state);
  s >> rng;
  if (!s) throw IoError("corrupt random generator state in checkpoint");
}

struct TrainState {
  int iteration = 0;
  long env_steps = 0;
  double best_reward = -std::numeric_limits<double>::infinity();
  int best_iteration = 0;
};

Checkpoint make_checkpoint(const PolicyWeights& w, const OptimizerState& opt, const TrainState& s,
                           double reward, const std::vector<RolloutWorker>& workers,
                           const std::mt19937_64& update_rng, const EnvConfig& env) {
  Checkpoint ck;
  ck.weights = w;
  json info;
  info["iteration"] = s.iteration;
  info["env_steps"] = s.env_steps;
  info["batch_mean_reward"] = std::isfinite(reward) ? json(reward) : json(nullptr);
  info["best_reward"] = std::isfinite(s.best_reward) ? json(s.best_reward) : json(nullptr);
  info["best_iteration"] = s.best_iteration;
  info["optimizer_step"] = opt.step;
  info["family"] = std::string(family_name(env.family));
  info["mode"] = env.mode == RefineMode::h ? "h" : "p";
  info["alpha"] = env.alpha;
  info["beta"] = env.beta;
  json rngs = json::array();
  for (const auto& worker : workers) {
    rngs.push_back({rng_state(worker.problem_rng), rng_state(worker.action_rng)});
  }
  info["worker_rng"] = rngs;
  info["update_rng"] = rng_state(update_rng);
  ck.info = info.dump();
  if (opt.m_policy.size() > 0) {
    ck.extra = {{"adam_m_policy", opt.m_policy},
                {"adam_v_policy", opt.v_policy},
                {"adam_m_value", opt.m_value},
                {"adam_v_value", opt.v_value}};
  }
  return ck;
}

}  // namespace

TrainResult train(const EnvConfig& env_config, const TrainConfig& config,
                  const std::string& directory, bool resume,
                  const std::function<void(const IterationLog&)>& progress) {
  config.validate();
  env_config.validate();
  fs::create_directories(directory);
  const fs::path dir(directory);
  const std::string metrics_path = (dir / "metrics.csv").string();
  const std::string latest_path = (dir / "policy_latest.ck").string();
  const std::string best_path = (dir / "policy_best.ck").string();

  std::vector<RolloutWorker> workers = make_workers(env_config, config.envs, config.seed);
  std::seed_seq update_seed{config.seed, std::uint64_t{7}};
  std::mt19937_64 update_rng(update_seed);
  OptimizerState opt;
  TrainState state;
  PolicyWeights weights;

  const ObservationLayout layout = workers.front().env->layout();

  if (resume) {
    const Checkpoint ck = load_checkpoint(latest_path);
    weights = ck.weights;
    if (weights.inputs() != layout.size()) {
      throw InvalidArgument("checkpoint does not match the environment observation size");
    }
    const json info = json::parse(ck.info);
    state.iteration = info.at("iteration").get<int>();
    state.env_steps = info.at("env_steps").get<long>();
    if (!info.at("best_reward").is_null()) state.best_reward = info["best_reward"].get<double>();
    state.best_iteration = info.at("best_iteration").get<int>();
    opt.step = info.at("optimizer_step").get<long>();
    const auto& rngs = info.at("worker_rng");
    for (std::size_t w = 0; w < workers.size() && w < rngs.size(); ++w) {
      restore_rng(workers[w].problem_rng, rngs[w].at(0).get<std::string>());
      restore_rng(workers[w].action_rng, rngs[w].at(1).get<std::string>());
    }
    restore_rng(update_rng, info.at("update_rng").get<std::string>());
    if (const auto* v = ck.find_extra("adam_m_policy")) opt.m_policy = *v;
    if (const auto* v = ck.find_extra("adam_v_policy")) opt.v_policy = *v;
    if (const auto* v = ck.find_extra("adam_m_value")) opt.m_value = *v;
    if (const auto* v = ck.find_extra("adam_v_value")) opt.v_value = *v;
  } else {
    std::seed_seq init_seed{config.seed, std::uint64_t{3}};
    std::mt19937_64 init_rng(init_seed);
    weights = init_weights(layout, config.hidden, init_rng);
    save_checkpoint((dir / "policy_initial.ck").string(),
                    make_checkpoint(weights, opt, state, std::nan(""), workers, update_rng,
                                    env_config));
    save_checkpoint(latest_path, make_checkpoint(weights, opt, state, std::nan(""), workers,
                                                 update_rng, env_config));
    std::ofstream csv(metrics_path, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + metrics_path);
    csv << "iteration,env_steps,batch_mean_reward,policy_loss,value_loss\n";
  }

  TrainResult result;
  for (int it = 0; it < config.iterations; ++it) {
    TrajectoryBuffer buffer;
    buffer.observation_size = weights.inputs();
    while (buffer.size() < static_cast<std::size_t>(config.batch_size)) {
      TrajectoryBuffer fragment = collect_rollouts(workers, weights, config.fragment_length);
      compute_advantages(fragment, config.gamma, config.lambda);
      buffer.append(fragment);
    }
    long steps = 0;
    for (const auto& w : workers) steps += w.env_steps;
    const double reward = std::accumulate(buffer.rewards.begin(), buffer.rewards.end(), 0.0) /
                          static_cast<double>(buffer.size());
    const PolicyWeights behaviour = weights;
    const LossReport loss = ppo_update(weights, opt, buffer, config, update_rng);

    ++state.iteration;
    state.env_steps += steps;
    for (auto& w : workers) w.env_steps = 0;
    IterationLog log{state.iteration, state.env_steps, reward, loss.policy_loss, loss.value_loss};
    result.log.push_back(log);
    {
      std::ofstream csv(metrics_path, std::ios::app);
      if (!csv) throw IoError("cannot open " + metrics_path);
      csv.precision(17);
      csv << log.iteration << ',' << log.env_steps << ',' << log.batch_mean_reward << ','
          << log.policy_loss << ',' << log.value_loss << '\n';
    }
    // The batch reward belongs to the weights that collected it.
    if (reward > state.best_reward) {
      state.best_reward = reward;
      state.best_iteration = state.iteration;
      save_checkpoint(best_path, make_checkpoint(behaviour, opt, state, reward, workers,
                                                 update_rng, env_config));
    }
    save_checkpoint(latest_path, make_checkpoint(weights, opt, state, reward, workers, update_rng,
                                                 env_config));
    if (progress) progress(log);
  }
  result.final_weights = weights;
  result.best_reward = state.best_reward;
  result.best_iteration = state.best_iteration;
  return result;
}

}  // namespace dynamo
