#pragma once

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynamo/mesh.hpp"
#include "dynamo/problems.hpp"
#include "dynamo/simulation.hpp"

namespace dynamo {

struct EnvConfig {
  Family family = Family::adv_ring;
  /// When set, every reset uses this instance instead of sampling.
  std::optional<ProblemSpec> problem;
  RefineMode mode = RefineMode::p;
  int agents_x = 0;          // 0: problem default
  int agents_y = 0;
  double remesh_time = 0.0;  // 0: problem default
  int rl_steps = 0;          // 0: problem default
  int base_order = -1;       // -1: problem default
  double cfl = 0.5;

  double alpha = 0.1;
  double beta = 1.2;
  double p_ur = 10.0;
  double p_or = 5.0;
  int window_x = 8;
  int window_y = 8;
  bool solution_channels = false;
  JumpEstimatorOptions estimator;

  double failure_penalty = -100.0;
  double error_floor = 1e-16;

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;
};

struct Thresholds {
  double e_max = 0.0;
  double e_min = 0.0;
};

/// e_max = alpha |e|_inf, e_min = e_max^beta. Throws DegenerateThreshold if
/// every error is zero.
Thresholds thresholds(std::span<const double> errors, double alpha, double beta);

/// Penalty of one agent; `e_hat` is floored at `floor` before the logs.
double agent_reward(double e_hat, Action action, const Thresholds& t, double p_ur, double p_or,
                    double floor = 1e-16);
std::vector<double> compute_reward(std::span<const Action> actions, std::span<const double> e_hat,
                                   const Thresholds& t, double p_ur, double p_or,
                                   double floor = 1e-16);

struct ObservationLayout {
  int window_x = 0;  // half widths
  int window_y = 0;
  int channels = 2;

  int window_cells() const { return (2 * window_x + 1) * (2 * window_y + 1); }
  int size() const { return window_cells() * channels; }
  /// Flat index of (window cell, channel); cells run over rows dy = -ny..ny
  /// with dx = -nx..nx fastest.
  int index(int cell, int channel) const { return cell * channels + channel; }
};

/// Per-agent quantities the observation is built from.
struct AgentFields {
  std::vector<double> errors;
  /// <A_ll>_j for the observed component l, averaged over each agent.
  std::vector<Vec2> propagation;
  /// Optional averaged conserved then primitive variables (agent x field).
  std::vector<std::vector<double>> solution;
};

/// Agent-level averages of the flux-Jacobian diagonal entry of `component`.
std::vector<Vec2> agent_propagation(const SolutionState& state, const ConservationLaw& law,
                                    int component);
/// Agent-level averages of the conserved variables followed by (rho, u, v, P)
/// for Euler.
std::vector<std::vector<double>> agent_solution_averages(const SolutionState& state,
                                                         const ConservationLaw& law);

/// Rows are agents, columns follow ObservationLayout.
Eigen::MatrixXd build_observations(const Mesh& mesh, const AgentFields& fields, double e_max,
                                   double remesh_time, const ObservationLayout& layout,
                                   double floor = 1e-16);

struct StepDiagnostics {
  std::vector<double> errors;  // instantaneous, after the step
  std::vector<double> running_max;
  Thresholds used;             // thresholds the rewards were computed with
  Thresholds next;             // thresholds for the following step
  std::size_t dofs = 0;        // during the interval
  double dof_steps = 0.0;
  double region_dof_steps = 0.0;
  long solver_steps = 0;
  double time = 0.0;
  bool failed = false;
  std::string failure;
  /// L2 error against the analytic solution when one exists.
  std::optional<double> true_error;
};

struct StepResult {
  Eigen::MatrixXd observations;
  std::vector<double> rewards;
  bool done = false;
  StepDiagnostics diagnostics;
};

/// Multi-agent AMR environment: one agent per initial coarse element.
class AmrEnv {
 public:
  explicit AmrEnv(EnvConfig config);

  /// New episode with a sampled (or the fixed) problem.
  Eigen::MatrixXd reset(std::mt19937_64& rng);
  /// New episode on the given instance.
  Eigen::MatrixXd reset(const ProblemSpec& spec);
  StepResult step(std::span<const Action> actions);

  const EnvConfig& config() const { return config_; }
  /// Evaluation-time override of the threshold scale.
  void set_alpha(double alpha);
  const ObservationLayout& layout() const { return layout_; }
  int agent_count() const;
  bool active() const { return sim_ && !done_; }
  int steps_taken() const { return steps_; }
  const AmrSimulation& simulation() const { return *sim_; }
  const ProblemSpec& problem() const { return sim_->problem(); }
  const Thresholds& current_thresholds() const { return thresholds_; }
  const std::vector<double>& current_errors() const { return errors_; }
  const Eigen::MatrixXd& current_observations() const { return observations_; }

  /// Whether T respects min(n_x dx, n_y dy) / lambda_max for `spec`.
  static bool remesh_time_within_bound(const ProblemSpec& spec, const EnvConfig& config);

 private:
  ProblemSpec resolve(ProblemSpec spec) const;
  Eigen::MatrixXd observe();
  std::optional<double> true_error() const;

  EnvConfig config_;
  ObservationLayout layout_;
  std::unique_ptr<AmrSimulation> sim_;
  Thresholds thresholds_;
  std::vector<double> errors_;
  Eigen::MatrixXd observations_;
  int steps_ = 0;
  bool done_ = false;
};

/// Per-step episode log: time, DOF, mean reward, |e|_inf, thresholds,
/// action counts.
class EpisodeTrace {
 public:
  void record(const StepResult& result, std::span<const Action> actions);
  void write_csv(const std::string& path) const;
  std::size_t size() const { return rows_.size(); }

 private:
  struct Row {
    double time;
    std::size_t dofs;
    double mean_reward;
    double max_error;
    double e_max;
    double e_min;
    int fine;
    int coarse;
  };
  std::vector<Row> rows_;
};

}  // namespace dynamo
