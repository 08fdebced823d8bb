#pragma once

#include <array>

#include <Eigen/Core>

#include "dynamo/mesh.hpp"

namespace dynamo {

/// Conserved state of at most four components, stored without heap allocation.
using StateVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;
/// Flux tensor F(u) with one column per spatial direction.
using FluxMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2, 0, 4, 2>;
using SquareMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;

enum class LawKind { advection, euler };

/// Scalar linear advection with constant velocity, or the 2D compressible
/// Euler equations with a calorically perfect gas.
class ConservationLaw {
 public:
  static ConservationLaw advection(const Vec2& velocity);
  static ConservationLaw euler(double gamma = 1.4);

  LawKind kind() const { return kind_; }
  int components() const { return kind_ == LawKind::advection ? 1 : 4; }
  const Vec2& velocity() const { return velocity_; }
  double gamma() const { return gamma_; }

 private:
  LawKind kind_ = LawKind::advection;
  Vec2 velocity_ = Vec2::Zero();
  double gamma_ = 1.4;
};

/// dF_dir/du for each spatial direction: jacobian[dir](k, l) = dF_{k,dir}/du_l.
struct FluxJacobian {
  std::array<SquareMatrix, 2> by_direction;

  Vec2 entry(int k, int l) const {
    return Vec2(by_direction[0](k, l), by_direction[1](k, l));
  }
};

struct Primitive {
  double density = 0.0;
  Vec2 velocity = Vec2::Zero();
  double pressure = 0.0;
  /// False when the pressure is not strictly positive.
  bool positive_pressure = true;
};

FluxMatrix flux(const ConservationLaw& law, const StateVec& u);
StateVec normal_flux(const ConservationLaw& law, const StateVec& u, const Vec2& n);
FluxJacobian flux_jacobian(const ConservationLaw& law, const StateVec& u);

/// Euler only. Throws InadmissibleState when the density is not positive.
Primitive conserved_to_primitive(const ConservationLaw& law, const StateVec& u);
StateVec primitive_to_conserved(const ConservationLaw& law, double density,
                                const Vec2& velocity, double pressure);
double pressure(const ConservationLaw& law, const StateVec& u);

/// Bound on the characteristic speed at a single state: |c| or |v| + a.
double max_wavespeed(const ConservationLaw& law, const StateVec& u);

/// Interface wavespeed used by the Rusanov flux: |c.n| for advection, the
/// Davis estimate max(|v-.n| + a-, |v+.n| + a+) for Euler.
double interface_wavespeed(const ConservationLaw& law, const StateVec& u_minus,
                           const StateVec& u_plus, const Vec2& n);

}  // namespace dynamo
