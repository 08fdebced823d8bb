#include <cmath>
#include <random>

#include "doctest.h"
#include "dynamo/equations.hpp"
#include "dynamo/error.hpp"

using namespace dynamo;

namespace {

StateVec state(std::initializer_list<double> v) {
  StateVec u(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) u[i++] = x;
  return u;
}

// central differences of flux(), independent of the closed form
SquareMatrix fd_jacobian(const ConservationLaw& law, const StateVec& u, int dir, double h) {
  const int m = law.components();
  SquareMatrix J(m, m);
  for (int l = 0; l < m; ++l) {
    StateVec up = u, dn = u;
    up[l] += h;
    dn[l] -= h;
    const FluxMatrix fp = flux(law, up), fm = flux(law, dn);
    for (int k = 0; k < m; ++k) J(k, l) = (fp(k, dir) - fm(k, dir)) / (2 * h);
  }
  return J;
}

}  // namespace

TEST_CASE("advection flux") {
  const auto law = ConservationLaw::advection(Vec2(1, 2));
  const FluxMatrix f = flux(law, state({3}));
  CHECK(f(0, 0) == 3);
  CHECK(f(0, 1) == 6);
  const FluxJacobian J = flux_jacobian(law, state({-7.5}));
  CHECK(J.entry(0, 0) == Vec2(1, 2));
}

TEST_CASE("euler flux examples") {
  const auto law = ConservationLaw::euler(1.4);
  const FluxMatrix rest = flux(law, state({1, 0, 0, 1}));
  CHECK(rest(0, 0) == 0);
  CHECK(rest(0, 1) == 0);
  CHECK(rest(1, 0) == doctest::Approx(0.4));
  CHECK(rest(2, 1) == doctest::Approx(0.4));
  CHECK(rest(1, 1) == 0);
  CHECK(rest(2, 0) == 0);
  CHECK(rest(3, 0) == 0);
  CHECK(rest(3, 1) == 0);

  const StateVec u = state({1, 1, 0, 1});
  CHECK(pressure(law, u) == doctest::Approx(0.2));
  const FluxMatrix f = flux(law, u);
  CHECK(f(0, 0) == doctest::Approx(1.0));
  CHECK(f(1, 0) == doctest::Approx(1.2));
  CHECK(f(3, 0) == doctest::Approx(1.2));

  CHECK_THROWS_AS(flux(law, state({0, 0, 0, 1})), InadmissibleState);
  CHECK_THROWS_AS(flux(law, state({-1, 0, 0, 1})), InadmissibleState);
}

TEST_CASE("primitive conversions") {
  const auto law = ConservationLaw::euler(1.4);
  const Primitive w = conserved_to_primitive(law, state({1, 0, 0, 1}));
  CHECK(w.density == 1);
  CHECK(w.velocity.norm() == 0);
  CHECK(w.pressure == doctest::Approx(0.4));
  CHECK(w.positive_pressure);

  const StateVec sod = primitive_to_conserved(law, 1.0, Vec2::Zero(), 1.0);
  CHECK(sod[3] == doctest::Approx(2.5));

  const Primitive neg = conserved_to_primitive(law, state({1, 2, 0, 1}));
  CHECK_FALSE(neg.positive_pressure);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> r(0.1, 3.0), v(-2, 2);
  for (int k = 0; k < 200; ++k) {
    const double rho = r(rng), p = r(rng);
    const Vec2 vel(v(rng), v(rng));
    const Primitive back = conserved_to_primitive(law, primitive_to_conserved(law, rho, vel, p));
    CHECK(back.density == doctest::Approx(rho).epsilon(1e-14));
    CHECK(back.velocity.x() == doctest::Approx(vel.x()).epsilon(1e-13));
    CHECK(back.pressure == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("flux jacobian at rest") {
  const auto law = ConservationLaw::euler(1.4);
  const FluxJacobian J = flux_jacobian(law, state({1, 0, 0, 1}));
  CHECK(J.entry(3, 3) == Vec2(0, 0));
}

TEST_CASE("flux jacobian matches finite differences") {
  const auto law = ConservationLaw::euler(1.4);
  auto check = [&](const StateVec& u) {
    const FluxJacobian J = flux_jacobian(law, u);
    for (int dir = 0; dir < 2; ++dir) {
      const SquareMatrix fd = fd_jacobian(law, u, dir, 1e-6);
      const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
      for (int k = 0; k < 4; ++k) {
        for (int l = 0; l < 4; ++l) {
          CHECK(std::abs(J.by_direction[dir](k, l) - fd(k, l)) <= 1e-6 * scale);
        }
      }
    }
  };
  check(state({1.3, 0.4, -0.2, 2.1}));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> r(0.1, 3.0), ang(0, 2 * M_PI), mag(0, 2);
  for (int k = 0; k < 100; ++k) {
    const double rho = r(rng), p = r(rng), a = ang(rng), s = mag(rng);
    check(primitive_to_conserved(law, rho, Vec2(s * std::cos(a), s * std::sin(a)), p));
  }
}

TEST_CASE("advection quasi-linear form equals the divergence") {
  const auto law = ConservationLaw::advection(Vec2(0.3, -1.7));
  const Vec2 grad(2.5, -0.25);
  // F(u) = c u; div F = c . grad u = A . grad u
  const FluxJacobian J = flux_jacobian(law, state({4.0}));
  const double lhs = J.entry(0, 0).dot(grad);
  CHECK(lhs == doctest::Approx(law.velocity().dot(grad)));
}

TEST_CASE("interface wavespeed") {
  const auto adv = ConservationLaw::advection(Vec2(1, 1) / std::sqrt(2.0));
  CHECK(interface_wavespeed(adv, state({0}), state({1}), Vec2(1, 0)) ==
        doctest::Approx(1 / std::sqrt(2.0)));

  const auto law = ConservationLaw::euler(1.4);
  const StateVec rest = primitive_to_conserved(law, 1, Vec2::Zero(), 1);
  CHECK(interface_wavespeed(law, rest, rest, Vec2(1, 0)) == doctest::Approx(1.18322).epsilon(1e-5));
  // v.n = 2, a = 1: P = rho / gamma
  const StateVec moving = primitive_to_conserved(law, 1, Vec2(2, 0), 1 / 1.4);
  CHECK(interface_wavespeed(law, rest, moving, Vec2(1, 0)) == doctest::Approx(3.0));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> r(0.2, 2.0), v(-1, 1);
  for (int k = 0; k < 50; ++k) {
    const StateVec a = primitive_to_conserved(law, r(rng), Vec2(v(rng), v(rng)), r(rng));
    const StateVec b = primitive_to_conserved(law, r(rng), Vec2(v(rng), v(rng)), r(rng));
    const Vec2 n = Vec2(v(rng), v(rng)).normalized();
    const double s = interface_wavespeed(law, a, b, n);
    CHECK(interface_wavespeed(law, b, a, n) == s);
    CHECK(interface_wavespeed(law, a, b, -n) == doctest::Approx(s));
  }
}
