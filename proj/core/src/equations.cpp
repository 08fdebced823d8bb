#include "dynamo/equations.hpp"

#include <cmath>
#include <string>

#include "dynamo/error.hpp"

namespace dynamo {

ConservationLaw ConservationLaw::advection(const Vec2& velocity) {
  if (!velocity.allFinite()) throw InvalidArgument("advection velocity must be finite");
  ConservationLaw law;
  law.kind_ = LawKind::advection;
  law.velocity_ = velocity;
  return law;
}

ConservationLaw ConservationLaw::euler(double gamma) {
  if (!(gamma > 1.0)) throw InvalidArgument("ratio of specific heats must exceed 1");
  ConservationLaw law;
  law.kind_ = LawKind::euler;
  law.gamma_ = gamma;
  return law;
}

namespace {

void require_density(double rho) {
  if (!(rho > 0.0)) {
    throw InadmissibleState("non-positive density " + std::to_string(rho));
  }
}

}  // namespace

double pressure(const ConservationLaw& law, const StateVec& u) {
  const double rho = u[0];
  require_density(rho);
  const double ke = 0.5 * (u[1] * u[1] + u[2] * u[2]) / rho;
  return (law.gamma() - 1.0) * (u[3] - ke);
}

Primitive conserved_to_primitive(const ConservationLaw& law, const StateVec& u) {
  Primitive w;
  w.density = u[0];
  require_density(w.density);
  w.velocity = Vec2(u[1] / w.density, u[2] / w.density);
  w.pressure = pressure(law, u);
  w.positive_pressure = w.pressure > 0.0;
  return w;
}

StateVec primitive_to_conserved(const ConservationLaw& law, double density,
                                const Vec2& velocity, double p) {
  require_density(density);
  StateVec u(4);
  u[0] = density;
  u[1] = density * velocity.x();
  u[2] = density * velocity.y();
  u[3] = p / (law.gamma() - 1.0) + 0.5 * density * velocity.squaredNorm();
  return u;
}

FluxMatrix flux(const ConservationLaw& law, const StateVec& u) {
  FluxMatrix f(law.components(), 2);
  if (law.kind() == LawKind::advection) {
    f(0, 0) = law.velocity().x() * u[0];
    f(0, 1) = law.velocity().y() * u[0];
    return f;
  }
  const double rho = u[0];
  const double p = pressure(law, u);
  const double vx = u[1] / rho;
  const double vy = u[2] / rho;
  f(0, 0) = u[1];
  f(0, 1) = u[2];
  f(1, 0) = u[1] * vx + p;
  f(1, 1) = u[1] * vy;
  f(2, 0) = u[2] * vx;
  f(2, 1) = u[2] * vy + p;
  f(3, 0) = (u[3] + p) * vx;
  f(3, 1) = (u[3] + p) * vy;
  return f;
}

StateVec normal_flux(const ConservationLaw& law, const StateVec& u, const Vec2& n) {
  const FluxMatrix f = flux(law, u);
  return f.col(0) * n.x() + f.col(1) * n.y();
}

FluxJacobian flux_jacobian(const ConservationLaw& law, const StateVec& u) {
  FluxJacobian jac;
  const int m = law.components();
  if (law.kind() == LawKind::advection) {
    for (int dir = 0; dir < 2; ++dir) {
      jac.by_direction[dir] = SquareMatrix::Constant(m, m, law.velocity()[dir]);
    }
    return jac;
  }
  const double g1 = law.gamma() - 1.0;
  const double rho = u[0];
  require_density(rho);
  const Vec2 mom(u[1], u[2]);
  const double E = u[3];
  const double msq = mom.squaredNorm();
  const double p = g1 * (E - 0.5 * msq / rho);
  for (int i = 0; i < 2; ++i) {
    SquareMatrix a = SquareMatrix::Zero(4, 4);
    const double mi = mom[i];
    a(0, 1 + i) = 1.0;
    for (int j = 0; j < 2; ++j) {
      const double dij = i == j ? 1.0 : 0.0;
      a(1 + j, 0) = -mi * mom[j] / (rho * rho) + g1 * 0.5 * msq / (rho * rho) * dij;
      for (int k = 0; k < 2; ++k) {
        const double djk = j == k ? 1.0 : 0.0;
        const double dik = i == k ? 1.0 : 0.0;
        a(1 + j, 1 + k) = (mi * djk + mom[j] * dik) / rho - g1 * dij * mom[k] / rho;
      }
      a(1 + j, 3) = g1 * dij;
    }
    a(3, 0) = -mi * (E + p) / (rho * rho) + g1 * mi * msq / (2.0 * rho * rho * rho);
    for (int k = 0; k < 2; ++k) {
      const double dik = i == k ? 1.0 : 0.0;
      a(3, 1 + k) = (E + p) / rho * dik - g1 * mi * mom[k] / (rho * rho);
    }
    a(3, 3) = law.gamma() * mi / rho;
    jac.by_direction[i] = a;
  }
  return jac;
}

namespace {

double sound_speed(const ConservationLaw& law, const StateVec& u, Vec2* velocity) {
  const Primitive w = conserved_to_primitive(law, u);
  if (!w.positive_pressure) {
    throw InadmissibleState("non-positive pressure " + std::to_string(w.pressure));
  }
  *velocity = w.velocity;
  return std::sqrt(law.gamma() * w.pressure / w.density);
}

}  // namespace

double max_wavespeed(const ConservationLaw& law, const StateVec& u) {
  if (law.kind() == LawKind::advection) return law.velocity().norm();
  Vec2 v;
  const double a = sound_speed(law, u, &v);
  return v.norm() + a;
}

double interface_wavespeed(const ConservationLaw& law, const StateVec& u_minus,
                           const StateVec& u_plus, const Vec2& n) {
  if (law.kind() == LawKind::advection) return std::abs(law.velocity().dot(n));
  Vec2 vm;
  Vec2 vp;
  const double am = sound_speed(law, u_minus, &vm);
  const double ap = sound_speed(law, u_plus, &vp);
  return std::max(std::abs(vm.dot(n)) + am, std::abs(vp.dot(n)) + ap);
}

}  // namespace dynamo
