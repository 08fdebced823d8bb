#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "dynamo/basis.hpp"
#include "dynamo/equations.hpp"
#include "dynamo/mesh.hpp"

namespace dynamo {

/// Nodal coefficients of every element: one (nodes x components) block each.
using Coefficients = std::vector<Eigen::MatrixXd>;

/// Discrete DG solution on a fixed mesh at one instant.
class SolutionState {
 public:
  SolutionState(std::shared_ptr<const Mesh> mesh, int components, double time = 0.0);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int components() const { return components_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  Coefficients& coefficients() { return coeffs_; }
  const Coefficients& coefficients() const { return coeffs_; }
  Eigen::MatrixXd& element(int e) { return coeffs_[e]; }
  const Eigen::MatrixXd& element(int e) const { return coeffs_[e]; }

  /// Point value (periodic wrap applied).
  StateVec evaluate(const Vec2& x) const;
  StateVec cell_average(int element) const;
  /// Domain integral of every component.
  Eigen::VectorXd integral() const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  int components_;
  double time_;
  Coefficients coeffs_;
};

using InitialCondition = std::function<StateVec(const Vec2&)>;

/// Nodal interpolation of `f` at every element's Gauss-Lobatto nodes.
SolutionState interpolate_ic(const InitialCondition& f, std::shared_ptr<const Mesh> mesh,
                             int components);

/// L2 projection onto each element's polynomial space; used for
/// discontinuous data, where nodal values on element edges are ambiguous.
SolutionState project_ic(const InitialCondition& f, std::shared_ptr<const Mesh> mesh,
                         int components);

/// 1/2 (F(u-) + F(u+)).n - 1/2 lambda_max (u+ - u-).
StateVec rusanov_flux(const ConservationLaw& law, const StateVec& u_minus,
                      const StateVec& u_plus, const Vec2& n);

/// L2 projection of one element's coefficients between polynomial orders.
Eigen::MatrixXd project_order(const Eigen::MatrixXd& coeffs, int p_from, int p_to);

/// L2 projection of four congruent children (z-order) onto their parent.
Eigen::MatrixXd project_children_to_parent(const std::array<Eigen::MatrixXd, 4>& children,
                                           int order);

/// Exact split of a parent polynomial into its four children (z-order).
std::array<Eigen::MatrixXd, 4> split_to_children(const Eigen::MatrixXd& parent, int order);

/// Moves a solution onto a mesh with the same agents but different
/// refinement, using exact embedding when refining and L2 projection when
/// coarsening.
SolutionState transfer_solution(const SolutionState& state, std::shared_ptr<const Mesh> target);

struct SolverSettings {
  double cfl = 0.5;
  /// Barth-Jespersen limiting after every Runge-Kutta stage.
  bool limiter = false;
  /// Component whose extrema drive the limiter (density for Euler).
  int limited_component = 0;
  /// Safety valve against stalled integration.
  long max_steps_per_advance = 10'000'000;
};

/// Called after every accepted time step with the step size that was taken.
using StepCallback = std::function<void(const SolutionState&, double dt)>;

/// Semi-discrete DG operator bound to one mesh. Rebuild it after remeshing.
class DgOperator {
 public:
  DgOperator(ConservationLaw law, std::shared_ptr<const Mesh> mesh,
             SolverSettings settings = {});

  const ConservationLaw& law() const { return law_; }
  const SolverSettings& settings() const { return settings_; }
  const Mesh& mesh() const { return *mesh_; }

  /// du/dt for the given coefficients. Throws SolverError on inadmissible
  /// states.
  void residual(const Coefficients& u, Coefficients& dudt, double time = 0.0) const;

  /// cfl * min_e h_min / (lambda_e (2p + 1)); +inf when nothing moves.
  double stable_dt(const Coefficients& u, double time = 0.0) const;

  /// Classical four-stage RK4, limiting after every stage when enabled.
  void rk4_step(SolutionState& state, double dt) const;

  /// Barth-Jespersen slope scaling against the face neighbours' cell means.
  /// Returns the per-element scaling factor.
  std::vector<double> limit(Coefficients& u) const;

  /// Integrates to exactly state.time() + duration; `tap` sees every step.
  void advance(SolutionState& state, double duration, const StepCallback& tap = {}) const;

 private:
  struct FaceOps {
    const Eigen::MatrixXd* left_trace;
    const Eigen::MatrixXd* right_trace;
    Eigen::VectorXd weights;  // physical surface weights
    Vec2 normal;
  };

  ConservationLaw law_;
  std::shared_ptr<const Mesh> mesh_;
  SolverSettings settings_;
  std::vector<const ReferenceElement*> refs_;  // per element
  std::vector<FaceOps> faces_;
  std::vector<std::vector<int>> neighbours_;
};

}  // namespace dynamo
