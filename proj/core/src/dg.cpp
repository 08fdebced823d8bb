#include "dynamo/dg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dynamo/error.hpp"

namespace dynamo {

SolutionState::SolutionState(std::shared_ptr<const Mesh> mesh, int components, double time)
    : mesh_(std::move(mesh)), components_(components), time_(time) {
  if (!mesh_) throw InvalidArgument("solution state needs a mesh");
  if (components < 1) throw InvalidArgument("solution needs at least one component");
  coeffs_.reserve(mesh_->elements().size());
  for (const auto& e : mesh_->elements()) {
    coeffs_.emplace_back(Eigen::MatrixXd::Zero((e.order + 1) * (e.order + 1), components));
  }
}

StateVec SolutionState::evaluate(const Vec2& x) const {
  const Vec2 w = mesh_->wrap(x);
  const int e = mesh_->locate_element(w);
  const Element& el = mesh_->elements()[e];
  const double xi = std::clamp(2.0 * (w.x() - el.box.min.x()) / el.box.size.x() - 1.0, -1.0, 1.0);
  const double eta = std::clamp(2.0 * (w.y() - el.box.min.y()) / el.box.size.y() - 1.0, -1.0, 1.0);
  const Eigen::MatrixXd v = evaluation_matrix(el.order, {xi}, {eta});
  return (v * coeffs_[e]).transpose();
}

StateVec SolutionState::cell_average(int element) const {
  const ReferenceElement& ref = reference_element(mesh_->elements()[element].order);
  return (ref.mean * coeffs_[element]).transpose();
}

Eigen::VectorXd SolutionState::integral() const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(components_);
  for (int e = 0; e < mesh_->element_count(); ++e) {
    total += mesh_->elements()[e].box.area() * cell_average(e);
  }
  return total;
}

SolutionState interpolate_ic(const InitialCondition& f, std::shared_ptr<const Mesh> mesh,
                             int components) {
  SolutionState state(mesh, components, 0.0);
  for (int e = 0; e < mesh->element_count(); ++e) {
    const Element& el = mesh->elements()[e];
    const auto nodes = gauss_lobatto_nodes(el.order);
    const int n1 = el.order + 1;
    for (int iy = 0; iy < n1; ++iy) {
      for (int ix = 0; ix < n1; ++ix) {
        const Vec2 x(el.box.min.x() + 0.5 * (nodes[ix] + 1.0) * el.box.size.x(),
                     el.box.min.y() + 0.5 * (nodes[iy] + 1.0) * el.box.size.y());
        const StateVec u = f(x);
        if (u.size() != components) throw InvalidArgument("initial condition has wrong size");
        state.element(e).row(iy * n1 + ix) = u.transpose();
      }
    }
  }
  return state;
}

SolutionState project_ic(const InitialCondition& f, std::shared_ptr<const Mesh> mesh,
                         int components) {
  SolutionState state(mesh, components, 0.0);
  for (int e = 0; e < mesh->element_count(); ++e) {
    const Element& el = mesh->elements()[e];
    const ReferenceElement& ref = reference_element(el.order);
    const int q = ref.quad_1d;
    Eigen::MatrixXd fq(ref.quad_count(), components);
    for (int qy = 0; qy < q; ++qy) {
      for (int qx = 0; qx < q; ++qx) {
        const Vec2 x(el.box.min.x() + 0.5 * (ref.rule.points[qx] + 1.0) * el.box.size.x(),
                     el.box.min.y() + 0.5 * (ref.rule.points[qy] + 1.0) * el.box.size.y());
        const StateVec u = f(x);
        if (u.size() != components) throw InvalidArgument("initial condition has wrong size");
        fq.row(qy * q + qx) = ref.weights[qy * q + qx] * u.transpose();
      }
    }
    state.element(e) = ref.mass_inv * (ref.interp.transpose() * fq);
  }
  return state;
}

StateVec rusanov_flux(const ConservationLaw& law, const StateVec& u_minus,
                      const StateVec& u_plus, const Vec2& n) {
  const double lambda = interface_wavespeed(law, u_minus, u_plus, n);
  return 0.5 * (normal_flux(law, u_minus, n) + normal_flux(law, u_plus, n)) -
         0.5 * lambda * (u_plus - u_minus);
}

Eigen::MatrixXd project_order(const Eigen::MatrixXd& coeffs, int p_from, int p_to) {
  if (coeffs.rows() != (p_from + 1) * (p_from + 1)) {
    throw InvalidArgument("coefficient block does not match source order");
  }
  if (p_from == p_to) return coeffs;
  return order_transfer(p_from, p_to) * coeffs;
}

Eigen::MatrixXd project_children_to_parent(const std::array<Eigen::MatrixXd, 4>& children,
                                           int order) {
  Eigen::MatrixXd parent = child_restriction(order, 0) * children[0];
  for (int c = 1; c < 4; ++c) parent += child_restriction(order, c) * children[c];
  return parent;
}

std::array<Eigen::MatrixXd, 4> split_to_children(const Eigen::MatrixXd& parent, int order) {
  std::array<Eigen::MatrixXd, 4> out;
  for (int c = 0; c < 4; ++c) out[c] = child_prolongation(order, c) * parent;
  return out;
}

SolutionState transfer_solution(const SolutionState& state, std::shared_ptr<const Mesh> target) {
  const Mesh& from = state.mesh();
  if (target->agent_count() != from.agent_count()) {
    throw InvalidArgument("solution transfer requires identical agent layout");
  }
  SolutionState out(target, state.components(), state.time());
  for (int a = 0; a < from.agent_count(); ++a) {
    const int f0 = from.first_element(a);
    const int fn = from.element_count(a);
    const int t0 = target->first_element(a);
    const int tn = target->element_count(a);
    const int p_from = from.elements()[f0].order;
    const int p_to = target->elements()[t0].order;
    if (fn == tn) {
      for (int k = 0; k < fn; ++k) {
        out.element(t0 + k) = project_order(state.element(f0 + k), p_from, p_to);
      }
    } else if (fn == 1) {
      const auto kids = split_to_children(project_order(state.element(f0), p_from, p_to), p_to);
      for (int c = 0; c < 4; ++c) out.element(t0 + c) = kids[c];
    } else {
      std::array<Eigen::MatrixXd, 4> kids;
      for (int c = 0; c < 4; ++c) kids[c] = project_order(state.element(f0 + c), p_from, p_to);
      out.element(t0) = project_children_to_parent(kids, p_to);
    }
  }
  return out;
}

DgOperator::DgOperator(ConservationLaw law, std::shared_ptr<const Mesh> mesh,
                       SolverSettings settings)
    : law_(law), mesh_(std::move(mesh)), settings_(settings) {
  if (!(settings_.cfl > 0.0)) throw InvalidArgument("CFL number must be positive");
  if (settings_.limited_component < 0 || settings_.limited_component >= law_.components()) {
    throw InvalidArgument("limited component out of range");
  }
  const auto& elements = mesh_->elements();
  refs_.reserve(elements.size());
  for (const auto& e : elements) refs_.push_back(&reference_element(e.order));

  neighbours_.assign(elements.size(), {});
  faces_.reserve(mesh_->faces().size());
  for (const auto& f : mesh_->faces()) {
    const int pl = elements[f.left].order;
    const int pr = elements[f.right].order;
    const int q = std::max(pl, pr) + 2;
    const bool x = f.axis == Axis::x;
    FaceOps ops;
    ops.left_trace = &face_trace(pl, x ? FaceSide::east : FaceSide::north, q,
                                 static_cast<int>(f.left_part));
    ops.right_trace = &face_trace(pr, x ? FaceSide::west : FaceSide::south, q,
                                  static_cast<int>(f.right_part));
    const auto rule = gauss_legendre(q);
    ops.weights.resize(q);
    for (int k = 0; k < q; ++k) ops.weights[k] = 0.5 * f.length * rule.weights[k];
    ops.normal = x ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
    faces_.push_back(std::move(ops));
    neighbours_[f.left].push_back(f.right);
    neighbours_[f.right].push_back(f.left);
  }
  for (auto& n : neighbours_) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
}

void DgOperator::residual(const Coefficients& u, Coefficients& dudt, double time) const {
  const auto& elements = mesh_->elements();
  const int m = law_.components();
  dudt.resize(elements.size());

  for (std::size_t e = 0; e < elements.size(); ++e) {
    const ReferenceElement& ref = *refs_[e];
    const Box& box = elements[e].box;
    const Eigen::MatrixXd uq = ref.interp * u[e];
    Eigen::MatrixXd fx(uq.rows(), m);
    Eigen::MatrixXd fy(uq.rows(), m);
    try {
      for (Eigen::Index k = 0; k < uq.rows(); ++k) {
        const FluxMatrix f = flux(law_, uq.row(k).transpose());
        fx.row(k) = f.col(0).transpose();
        fy.row(k) = f.col(1).transpose();
      }
    } catch (const InadmissibleState& err) {
      throw SolverError(err.what(), time, static_cast<std::ptrdiff_t>(e));
    }
    dudt[e] = ref.grad_x_t * fx * (0.5 * box.size.y()) + ref.grad_y_t * fy * (0.5 * box.size.x());
  }

  const auto& segments = mesh_->faces();
  for (std::size_t s = 0; s < faces_.size(); ++s) {
    const FaceOps& ops = faces_[s];
    const int l = segments[s].left;
    const int r = segments[s].right;
    const Eigen::MatrixXd ul = *ops.left_trace * u[l];
    const Eigen::MatrixXd ur = *ops.right_trace * u[r];
    Eigen::MatrixXd g(ul.rows(), m);
    try {
      for (Eigen::Index k = 0; k < ul.rows(); ++k) {
        g.row(k) = ops.weights[k] *
                   rusanov_flux(law_, ul.row(k).transpose(), ur.row(k).transpose(), ops.normal)
                       .transpose();
      }
    } catch (const InadmissibleState& err) {
      throw SolverError(err.what(), time, l);
    }
    dudt[l].noalias() -= ops.left_trace->transpose() * g;
    dudt[r].noalias() += ops.right_trace->transpose() * g;
  }

  for (std::size_t e = 0; e < elements.size(); ++e) {
    const double jac = 4.0 / elements[e].box.area();
    dudt[e] = (refs_[e]->mass_inv * dudt[e]) * jac;
  }
}

double DgOperator::stable_dt(const Coefficients& u, double time) const {
  const auto& elements = mesh_->elements();
  double dt = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < elements.size(); ++e) {
    double lambda = 0.0;
    try {
      for (Eigen::Index k = 0; k < u[e].rows(); ++k) {
        lambda = std::max(lambda, max_wavespeed(law_, u[e].row(k).transpose()));
      }
    } catch (const InadmissibleState& err) {
      throw SolverError(err.what(), time, static_cast<std::ptrdiff_t>(e));
    }
    if (lambda <= 0.0) continue;
    const double h = elements[e].box.size.minCoeff();
    dt = std::min(dt, settings_.cfl * h / (lambda * (2.0 * elements[e].order + 1.0)));
  }
  return dt;
}

std::vector<double> DgOperator::limit(Coefficients& u) const {
  const int c = settings_.limited_component;
  const std::size_t n = u.size();
  std::vector<double> mean(n);
  for (std::size_t e = 0; e < n; ++e) mean[e] = (refs_[e]->mean * u[e].col(c))(0);

  std::vector<double> alpha(n, 1.0);
  for (std::size_t e = 0; e < n; ++e) {
    double lo = mean[e];
    double hi = mean[e];
    for (int nb : neighbours_[e]) {
      lo = std::min(lo, mean[nb]);
      hi = std::max(hi, mean[nb]);
    }
    double a = 1.0;
    for (Eigen::Index k = 0; k < u[e].rows(); ++k) {
      const double delta = u[e](k, c) - mean[e];
      if (delta > 0.0) {
        a = std::min(a, (hi - mean[e]) / delta);
      } else if (delta < 0.0) {
        a = std::min(a, (lo - mean[e]) / delta);
      }
    }
    a = std::clamp(a, 0.0, 1.0);
    alpha[e] = a;
    if (a < 1.0) {
      const Eigen::RowVectorXd avg = refs_[e]->mean * u[e];
      u[e] = (u[e].rowwise() - avg) * a;
      u[e].rowwise() += avg;
    }
  }
  return alpha;
}

void DgOperator::rk4_step(SolutionState& state, double dt) const {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  const Coefficients& u0 = state.coefficients();
  const double t = state.time();
  const std::size_t n = u0.size();
  Coefficients k1, k2, k3, k4, stage(n);

  auto make_stage = [&](const Coefficients& k, double a) {
    for (std::size_t e = 0; e < n; ++e) stage[e] = u0[e] + a * k[e];
    if (settings_.limiter) limit(stage);
  };

  residual(u0, k1, t);
  make_stage(k1, 0.5 * dt);
  residual(stage, k2, t + 0.5 * dt);
  make_stage(k2, 0.5 * dt);
  residual(stage, k3, t + 0.5 * dt);
  make_stage(k3, dt);
  residual(stage, k4, t + dt);

  Coefficients& u = state.coefficients();
  for (std::size_t e = 0; e < n; ++e) {
    u[e] += (dt / 6.0) * (k1[e] + 2.0 * k2[e] + 2.0 * k3[e] + k4[e]);
  }
  if (settings_.limiter) limit(u);
  state.set_time(t + dt);
}

void DgOperator::advance(SolutionState& state, double duration, const StepCallback& tap) const {
  if (!(duration > 0.0)) throw InvalidArgument("advance duration must be positive");
  const double t_end = state.time() + duration;
  long steps = 0;
  while (state.time() < t_end) {
    const double remaining = t_end - state.time();
    double dt = stable_dt(state.coefficients(), state.time());
    bool last = false;
    if (dt >= remaining * (1.0 - 1e-12)) {
      dt = remaining;
      last = true;
    }
    rk4_step(state, dt);
    if (last) state.set_time(t_end);
    for (const auto& block : state.coefficients()) {
      if (!block.allFinite()) throw SolverError("non-finite solution", state.time(), -1);
    }
    if (tap) tap(state, dt);
    if (++steps > settings_.max_steps_per_advance) {
      throw SolverError("step limit exceeded", state.time(), -1);
    }
  }
}

}  // namespace dynamo
