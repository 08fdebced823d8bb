#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dynamo/dg.hpp"
#include "dynamo/estimators.hpp"
#include "dynamo/mesh.hpp"
#include "dynamo/problems.hpp"

namespace dynamo {

struct SimulationSetup {
  RefineMode mode = RefineMode::p;
  int agents_x = 0;  // 0: take the problem's resolution
  int agents_y = 0;
  int base_order = -1;  // -1: take the family default
  SolverSettings solver;
  JumpEstimatorOptions estimator;
};

/// Setup with every default taken from the problem family.
SimulationSetup default_setup(const ProblemSpec& spec, RefineMode mode);

/// Work done over one remesh interval.
struct IntervalReport {
  long steps = 0;
  /// Sum over accepted steps of the mesh DOF count (all components).
  double dof_steps = 0.0;
  /// Same, restricted to elements inside the analysis region.
  double region_dof_steps = 0.0;
  /// Per-agent running maximum of the instantaneous estimate.
  RunningMaxError running_max;
};

/// Adaptive DG simulation on one periodic agent grid: owns the current mesh,
/// solution, operator and estimator.
class AmrSimulation {
 public:
  AmrSimulation(const ProblemSpec& spec, const SimulationSetup& setup);

  const ProblemSpec& problem() const { return spec_; }
  const ConservationLaw& law() const { return law_; }
  const Mesh& mesh() const { return state_->mesh(); }
  std::shared_ptr<const Mesh> mesh_ptr() const { return state_->mesh_ptr(); }
  const SolutionState& state() const { return *state_; }
  const ErrorEstimator& estimator() const { return estimator_; }
  const DgOperator& op() const { return *op_; }
  int components() const { return law_.components(); }

  /// Remeshes with absolute actions and transfers the solution.
  void remesh(std::span<const Action> actions);

  /// Integrates over `duration`. With `track_errors`, the running maximum
  /// starts from the estimate on the current mesh at the current time.
  IntervalReport advance(double duration, bool track_errors);

  std::vector<double> agent_errors() const;
  /// Number of DOFs of elements whose centre lies in the analysis region.
  std::size_t region_dof_count() const;

 private:
  ProblemSpec spec_;
  ConservationLaw law_;
  SolverSettings solver_;
  ErrorEstimator estimator_;
  std::unique_ptr<SolutionState> state_;
  std::unique_ptr<DgOperator> op_;
};

/// L2 norm over `region` (whole domain when unset) of u_h[component] - exact,
/// with three extra Gauss points per direction beyond each element's order.
double l2_error(const SolutionState& state, const std::function<double(const Vec2&)>& exact,
                int component, const std::optional<Box>& region = std::nullopt);

/// Elements whose centre lies in `region` (all when unset).
std::vector<int> elements_in_region(const Mesh& mesh, const std::optional<Box>& region);

}  // namespace dynamo
