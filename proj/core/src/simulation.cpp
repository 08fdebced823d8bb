#include "dynamo/simulation.hpp"

#include <cmath>

#include "dynamo/basis.hpp"
#include "dynamo/error.hpp"

namespace dynamo {

SimulationSetup default_setup(const ProblemSpec& spec, RefineMode mode) {
  SimulationSetup s;
  s.mode = mode;
  s.agents_x = spec.agents_x;
  s.agents_y = spec.agents_y;
  s.base_order = base_order_for(spec);
  s.solver = solver_settings_for(spec);
  return s;
}

std::vector<int> elements_in_region(const Mesh& mesh, const std::optional<Box>& region) {
  std::vector<int> out;
  out.reserve(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    if (region) {
      const Vec2 c = mesh.elements()[e].box.center();
      const Vec2 lo = region->min;
      const Vec2 hi = region->min + region->size;
      if (c.x() < lo.x() || c.x() > hi.x() || c.y() < lo.y() || c.y() > hi.y()) continue;
    }
    out.push_back(e);
  }
  return out;
}

double l2_error(const SolutionState& state, const std::function<double(const Vec2&)>& exact,
                int component, const std::optional<Box>& region) {
  const Mesh& mesh = state.mesh();
  double sum = 0.0;
  for (int e : elements_in_region(mesh, region)) {
    const Element& el = mesh.elements()[e];
    const auto rule = gauss_legendre(el.order + 3);
    const auto nodes = gauss_lobatto_nodes(el.order);
    const Eigen::MatrixXd v = lagrange_values(nodes, rule.points);
    const Eigen::VectorXd uq = kron(v, v) * state.element(e).col(component);
    const int q = static_cast<int>(rule.points.size());
    for (int qy = 0; qy < q; ++qy) {
      for (int qx = 0; qx < q; ++qx) {
        const Vec2 x(el.box.min.x() + 0.5 * (rule.points[qx] + 1.0) * el.box.size.x(),
                     el.box.min.y() + 0.5 * (rule.points[qy] + 1.0) * el.box.size.y());
        const double d = uq[qy * q + qx] - exact(x);
        sum += rule.weights[qx] * rule.weights[qy] * 0.25 * el.box.area() * d * d;
      }
    }
  }
  return std::sqrt(sum);
}

AmrSimulation::AmrSimulation(const ProblemSpec& spec, const SimulationSetup& setup)
    : spec_(spec),
      law_(law_for(spec)),
      solver_(setup.solver),
      estimator_(ErrorEstimator::for_mode(setup.mode, observed_component(spec), setup.estimator)) {
  const int nx = setup.agents_x > 0 ? setup.agents_x : spec.agents_x;
  const int ny = setup.agents_y > 0 ? setup.agents_y : spec.agents_y;
  const int order = setup.base_order >= 0 ? setup.base_order : base_order_for(spec);
  if (setup.mode == RefineMode::p && order < 1) {
    throw InvalidArgument("p-refinement needs base order >= 1");
  }
  auto mesh = std::make_shared<const Mesh>(
      Mesh::cartesian(nx, ny, spec.domain_min, spec.domain_max, setup.mode, order));
  const InitialCondition ic = initial_condition(spec);
  state_ = std::make_unique<SolutionState>(
      spec.smooth ? interpolate_ic(ic, mesh, law_.components())
                  : project_ic(ic, mesh, law_.components()));
  op_ = std::make_unique<DgOperator>(law_, mesh, solver_);
  if (solver_.limiter) op_->limit(state_->coefficients());
}

void AmrSimulation::remesh(std::span<const Action> actions) {
  auto target = std::make_shared<const Mesh>(mesh().apply_actions(actions));
  state_ = std::make_unique<SolutionState>(transfer_solution(*state_, target));
  op_ = std::make_unique<DgOperator>(law_, target, solver_);
}

IntervalReport AmrSimulation::advance(double duration, bool track_errors) {
  IntervalReport report;
  const double dof = static_cast<double>(mesh().dof_count(components()));
  const double region_dof = static_cast<double>(region_dof_count());
  if (track_errors) report.running_max = running_max_update({}, agent_errors());
  op_->advance(*state_, duration, [&](const SolutionState& s, double) {
    ++report.steps;
    report.dof_steps += dof;
    report.region_dof_steps += region_dof;
    if (track_errors) {
      report.running_max = running_max_update(std::move(report.running_max),
                                              estimator_.agent_errors(s));
    }
  });
  return report;
}

std::vector<double> AmrSimulation::agent_errors() const { return estimator_.agent_errors(*state_); }

std::size_t AmrSimulation::region_dof_count() const {
  if (!spec_.analysis_region) return mesh().dof_count(components());
  std::size_t n = 0;
  for (int e : elements_in_region(mesh(), spec_.analysis_region)) {
    const int p = mesh().elements()[e].order;
    n += static_cast<std::size_t>((p + 1) * (p + 1) * components());
  }
  return n;
}

}  // namespace dynamo
