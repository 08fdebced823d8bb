#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dynamo/env.hpp"
#include "dynamo/policies.hpp"
#include "dynamo/problems.hpp"
#include "dynamo/simulation.hpp"

namespace dynamo {

enum class CostMode {
  per_step,      // DOF count summed over accepted solver steps
  per_interval,  // DOF count summed once per remesh interval
};

/// Everything needed to score one evaluation episode.
struct EpisodeRun {
  std::vector<double> dof_steps;  // per remesh interval, inside the analysis region
  std::vector<double> dofs;       // per remesh interval, inside the analysis region
  std::vector<std::vector<Action>> actions;
  std::shared_ptr<const SolutionState> final_state;
  double final_time = 0.0;
  bool failed = false;
  std::string failure;
};

double accumulate_cost(const EpisodeRun& run, CostMode mode = CostMode::per_step);

/// Marking decision from the environment's current state.
using MarkingPolicy = std::function<std::vector<Action>(const AmrEnv& env)>;

MarkingPolicy uniform_policy(Action action);
MarkingPolicy threshold_policy(double theta);
MarkingPolicy network_policy(std::shared_ptr<const PolicyWeights> weights);

/// Runs one full episode of `problem` (rl_steps remesh intervals).
EpisodeRun run_episode(const EnvConfig& config, const ProblemSpec& problem,
                       const MarkingPolicy& policy);

/// Reference solution for the true error.
struct Reference {
  ProblemSpec problem;
  /// Uniformly fine run for Euler problems; empty for advection.
  std::shared_ptr<const SolutionState> solution;
};

/// p mode: uniform order base+2. h mode: agents refined twice (4x per axis).
Reference make_reference(const ProblemSpec& problem, RefineMode mode, const EnvConfig& config);

/// L2 error of the observed component at the run's final time over the
/// analysis region, against the analytic solution (advection) or the
/// reference run (Euler). Throws InvalidArgument on mismatched problems or
/// final times.
double true_error(const SolutionState& state, const Reference& reference);

struct Normalized {
  double cost = 0.0;
  double error = 0.0;
};

/// (c - c_coarse) / (c_fine - c_coarse), (e - e_fine) / (e_coarse - e_fine).
Normalized normalize(double c, double e, double c_coarse, double e_coarse, double c_fine,
                     double e_fine);

/// 1 - sqrt(c^2 + e^2).
double efficiency(double normalized_cost, double normalized_error);

struct RunRecord {
  std::string policy;
  double parameter = 0.0;
  double cost = 0.0;
  double error = 0.0;
  double normalized_cost = 0.0;
  double normalized_error = 0.0;
  double efficiency = 0.0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  bool failed = false;
};

/// Coarse/fine/reference results of one problem instance.
struct Baselines {
  double c_coarse = 0.0;
  double e_coarse = 0.0;
  double c_fine = 0.0;
  double e_fine = 0.0;
  std::shared_ptr<const Reference> reference;
};

/// Caches baselines by problem instance (serialized spec) for reuse across
/// sweeps.
class BaselineCache {
 public:
  const Baselines& get(const ProblemSpec& problem, const EnvConfig& config, CostMode mode);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, Baselines> entries_;
};

enum class PolicyFamily { threshold, network };

struct SweepOptions {
  PolicyFamily family = PolicyFamily::threshold;
  /// Required for the network family; the sweep varies alpha.
  std::shared_ptr<const PolicyWeights> weights;
  CostMode cost_mode = CostMode::per_step;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// One evaluation episode per parameter (theta or alpha), in order. Failed
/// runs are recorded with `failed` set and do not stop the sweep.
std::vector<RunRecord> pareto_sweep(const ProblemSpec& problem, const EnvConfig& config,
                                    const std::vector<double>& parameters,
                                    const SweepOptions& options, BaselineCache& cache);

/// policy,parameter,c,e,c_norm,e_norm,efficiency,seed,wall_time
void write_sweep_csv(const std::string& path, const std::vector<RunRecord>& records);

}  // namespace dynamo
