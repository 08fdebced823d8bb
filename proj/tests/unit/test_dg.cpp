#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "dynamo/dg.hpp"
#include "dynamo/error.hpp"

using namespace dynamo;

namespace {

std::shared_ptr<const Mesh> square(int n, RefineMode mode, int order) {
  return std::make_shared<const Mesh>(
      Mesh::cartesian(n, n, Vec2(0, 0), Vec2(1, 1), mode, order));
}

StateVec scalar(double v) {
  StateVec u(1);
  u[0] = v;
  return u;
}

double max_abs(const Coefficients& c) {
  double m = 0;
  for (const auto& b : c) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

std::shared_ptr<const Mesh> mixed_mesh(int order) {
  const Mesh base = Mesh::cartesian(4, 4, Vec2(0, 0), Vec2(1, 1), RefineMode::h, order);
  std::vector<Action> h(16, Action::coarse), p(16, Action::coarse);
  h[0] = h[5] = h[6] = h[15] = Action::fine;
  p[1] = p[5] = p[10] = p[12] = Action::fine;
  return std::make_shared<const Mesh>(base.with_refinement(h, p));
}

}  // namespace

TEST_CASE("interpolate_ic") {
  auto mesh = square(3, RefineMode::p, 2);
  const auto one = interpolate_ic([](const Vec2&) { return scalar(1.0); }, mesh, 1);
  for (const auto& b : one.coefficients()) CHECK((b.array() - 1.0).abs().maxCoeff() == 0.0);

  const auto lin = interpolate_ic([](const Vec2& x) { return scalar(2 * x.x() - 1); }, mesh, 1);
  for (double x : {0.01, 0.37, 0.5, 0.91}) {
    CHECK(lin.evaluate(Vec2(x, 0.3))[0] == doctest::Approx(2 * x - 1));
  }

  // ring of radius 0.1 centred at (0.5, 0.5), w = 100
  auto fine = square(24, RefineMode::p, 2);
  const auto ring = interpolate_ic(
      [](const Vec2& x) {
        const double r = (x - Vec2(0.5, 0.5)).norm();
        return scalar(1 + std::exp(-100 * (r - 0.1) * (r - 0.1)));
      },
      fine, 1);
  double hi = 0;
  for (const auto& b : ring.coefficients()) hi = std::max(hi, b.maxCoeff());
  CHECK(hi >= 1.0);
  CHECK(hi <= 2.0);
}

TEST_CASE("project_ic is exact for polynomials in the space") {
  auto mesh = mixed_mesh(2);
  auto f = [](const Vec2& x) { return scalar(x.x() * x.y() - 3 * x.y() + 0.5); };
  const auto a = interpolate_ic(f, mesh, 1);
  const auto b = project_ic(f, mesh, 1);
  for (int e = 0; e < mesh->element_count(); ++e) {
    CHECK((a.element(e) - b.element(e)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rusanov flux") {
  const auto adv = ConservationLaw::advection(Vec2(1, 0));
  CHECK(rusanov_flux(adv, scalar(2), scalar(5), Vec2(1, 0))[0] == doctest::Approx(2.0));
  CHECK(rusanov_flux(adv, scalar(3), scalar(3), Vec2(1, 0))[0] == doctest::Approx(3.0));

  const auto law = ConservationLaw::euler(1.4);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> r(0.2, 2.0), v(-1, 1);
  for (int k = 0; k < 50; ++k) {
    const StateVec a = primitive_to_conserved(law, r(rng), Vec2(v(rng), v(rng)), r(rng));
    const StateVec b = primitive_to_conserved(law, r(rng), Vec2(v(rng), v(rng)), r(rng));
    const Vec2 n = Vec2(v(rng), v(rng)).normalized();
    const StateVec f = rusanov_flux(law, a, b, n);
    const StateVec g = rusanov_flux(law, b, a, -n);
    CHECK((f + g).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((rusanov_flux(law, a, a, n) - normal_flux(law, a, n)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("free stream on conforming and nonconforming meshes") {
  const auto law = ConservationLaw::euler(1.4);
  const StateVec u0 = primitive_to_conserved(law, 1.0, Vec2(0.3, -0.7), 1.0);
  for (auto mesh : {square(4, RefineMode::p, 2), mixed_mesh(1), mixed_mesh(2)}) {
    DgOperator op(law, mesh);
    const auto s = interpolate_ic([&](const Vec2&) { return u0; }, mesh, 4);
    Coefficients r;
    op.residual(s.coefficients(), r);
    CHECK(max_abs(r) < 1e-12);
  }
  const auto adv = ConservationLaw::advection(Vec2(1, 0.5));
  auto mesh = mixed_mesh(2);
  DgOperator op(adv, mesh);
  auto s = interpolate_ic([](const Vec2&) { return scalar(2.0); }, mesh, 1);
  op.advance(s, 0.1);
  for (const auto& b : s.coefficients()) CHECK((b.array() - 2.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("residual of a polynomial row equals -c du/dx at the nodes") {
  // u = x^3 jumps only across the periodic seam, so elements away from it see
  // no jump terms and the residual is exactly -c u_x.
  const int p = 3;
  auto mesh = std::make_shared<const Mesh>(
      Mesh::cartesian(4, 1, Vec2(0, 0), Vec2(1, 0.25), RefineMode::p, p));
  const auto law = ConservationLaw::advection(Vec2(1, 0));
  DgOperator op(law, mesh);
  const auto s = interpolate_ic([](const Vec2& x) { return scalar(x.x() * x.x() * x.x()); }, mesh, 1);
  Coefficients r;
  op.residual(s.coefficients(), r);
  const auto nodes = gauss_lobatto_nodes(p);
  for (int e = 1; e < 3; ++e) {
    const Box& b = mesh->elements()[e].box;
    for (int iy = 0; iy <= p; ++iy) {
      for (int ix = 0; ix <= p; ++ix) {
        const double x = b.min.x() + 0.5 * (nodes[ix] + 1) * b.size.x();
        CHECK(r[e](iy * (p + 1) + ix, 0) == doctest::Approx(-3 * x * x).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("stable_dt") {
  const auto law = ConservationLaw::advection(Vec2(2, 0));
  auto mesh = square(10, RefineMode::p, 2);
  DgOperator op(law, mesh, SolverSettings{.cfl = 0.5});
  const auto s = interpolate_ic([](const Vec2&) { return scalar(1.0); }, mesh, 1);
  CHECK(op.stable_dt(s.coefficients()) == doctest::Approx(0.005));

  auto finer = square(20, RefineMode::p, 2);
  DgOperator op2(law, finer, SolverSettings{.cfl = 0.5});
  const auto s2 = interpolate_ic([](const Vec2&) { return scalar(1.0); }, finer, 1);
  CHECK(op2.stable_dt(s2.coefficients()) == doctest::Approx(0.0025));

  std::vector<Action> a(100, Action::coarse);
  a[17] = Action::fine;
  auto mixed = std::make_shared<const Mesh>(mesh->apply_actions(a));
  DgOperator op3(law, mixed, SolverSettings{.cfl = 0.5});
  const auto s3 = interpolate_ic([](const Vec2&) { return scalar(1.0); }, mixed, 1);
  CHECK(op3.stable_dt(s3.coefficients()) == doctest::Approx(0.5 * 0.1 / (2 * 7)));

  const auto still = ConservationLaw::advection(Vec2(0, 0));
  DgOperator op4(still, mesh);
  CHECK(std::isinf(op4.stable_dt(s.coefficients())));
}

TEST_CASE("rk4 local error is fifth order in dt") {
  const auto law = ConservationLaw::advection(Vec2(1, 0.4));
  auto mesh = square(4, RefineMode::p, 3);
  DgOperator op(law, mesh);
  const auto s0 = interpolate_ic(
      [](const Vec2& x) { return scalar(std::sin(2 * M_PI * x.x()) * std::cos(2 * M_PI * x.y())); },
      mesh, 1);
  auto reference = [&](double dt) {
    SolutionState s = s0;
    for (int k = 0; k < 64; ++k) op.rk4_step(s, dt / 64);
    return s;
  };
  auto err = [&](double dt) {
    SolutionState a = s0;
    op.rk4_step(a, dt);
    const SolutionState b = reference(dt);
    double m = 0;
    for (int e = 0; e < mesh->element_count(); ++e) {
      m = std::max(m, (a.element(e) - b.element(e)).cwiseAbs().maxCoeff());
    }
    return m;
  };
  const double e1 = err(0.01), e2 = err(0.005);
  CHECK(std::log2(e1 / e2) > 4.5);

  // constant residual-free state is unchanged
  SolutionState c = interpolate_ic([](const Vec2&) { return scalar(3.0); }, mesh, 1);
  op.rk4_step(c, 0.1);
  for (const auto& b : c.coefficients()) CHECK((b.array() - 3.0).abs().maxCoeff() < 1e-11);
}

TEST_CASE("advance clips the last step and calls the tap") {
  const auto law = ConservationLaw::advection(Vec2(1, 0));
  auto mesh = square(4, RefineMode::p, 1);
  DgOperator op(law, mesh);
  auto s = interpolate_ic([](const Vec2& x) { return scalar(std::sin(2 * M_PI * x.x())); }, mesh, 1);
  const double dt = op.stable_dt(s.coefficients());
  int calls = 0;
  op.advance(s, 0.3 * dt, [&](const SolutionState&, double h) {
    ++calls;
    CHECK(h == doctest::Approx(0.3 * dt));
  });
  CHECK(calls == 1);
  CHECK(s.time() == 0.3 * dt);

  calls = 0;
  double total = 0;
  const double t0 = s.time();
  op.advance(s, 0.137, [&](const SolutionState&, double h) {
    ++calls;
    total += h;
  });
  CHECK(s.time() == t0 + 0.137);
  CHECK(total == doctest::Approx(0.137));
  CHECK(calls >= 2);
  CHECK_THROWS_AS(op.advance(s, 0.0), InvalidArgument);
}

TEST_CASE("advection ring translates over T") {
  const auto law = ConservationLaw::advection(Vec2(1, 1) / std::sqrt(2.0));
  auto mesh = square(24, RefineMode::p, 2);
  DgOperator op(law, mesh);
  auto ring = [](const Vec2& x) {
    Vec2 d = x - Vec2(0.5, 0.5);
    for (int k = 0; k < 2; ++k) d[k] -= std::round(d[k]);
    const double r = d.norm();
    return scalar(1 + std::exp(-100 * (r - 0.1) * (r - 0.1)));
  };
  auto s = interpolate_ic(ring, mesh, 1);
  op.advance(s, 0.3);
  const Vec2 shift = law.velocity() * 0.3;
  double worst = 0;
  for (double x = 0.05; x < 1; x += 0.1) {
    for (double y = 0.05; y < 1; y += 0.1) {
      worst = std::max(worst, std::abs(s.evaluate(Vec2(x, y))[0] - ring(Vec2(x, y) - shift)[0]));
    }
  }
  CHECK(worst < 2e-2);
}

TEST_CASE("order and level projections") {
  auto mesh = square(1, RefineMode::p, 2);
  auto f = [](const Vec2& x) { return scalar(3 * x.x() - x.y() + 1); };
  const auto p2 = interpolate_ic(f, mesh, 1);
  const Eigen::MatrixXd p1 = project_order(p2.element(0), 2, 1);
  const Eigen::MatrixXd back = project_order(p1, 1, 2);
  CHECK((back - p2.element(0)).cwiseAbs().maxCoeff() < 1e-13);

  std::array<Eigen::MatrixXd, 4> kids;
  for (auto& k : kids) k = Eigen::MatrixXd::Constant(9, 1, 4.25);
  const Eigen::MatrixXd parent = project_children_to_parent(kids, 2);
  CHECK((parent.array() - 4.25).abs().maxCoeff() < 1e-13);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd q(9, 2);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = g(rng);
  const auto split = split_to_children(q, 2);
  CHECK((project_children_to_parent(split, 2) - q).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solution transfer preserves integrals") {
  const auto law = ConservationLaw::euler(1.4);
  for (RefineMode mode : {RefineMode::h, RefineMode::p}) {
    auto mesh = square(4, mode, 1);
    auto s = interpolate_ic(
        [&](const Vec2& x) {
          return primitive_to_conserved(law, 1 + 0.2 * std::sin(2 * M_PI * x.x()),
                                        Vec2(0.1, 0.2), 1 + 0.1 * x.y());
        },
        mesh, 4);
    std::vector<Action> a(16, Action::coarse);
    for (int k = 0; k < 16; k += 3) a[k] = Action::fine;
    auto refined = std::make_shared<const Mesh>(mesh->apply_actions(a));
    const auto up = transfer_solution(s, refined);
    const auto down = transfer_solution(up, mesh);
    CHECK((up.integral() - s.integral()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((down.integral() - s.integral()).cwiseAbs().maxCoeff() < 1e-13);
    for (int e = 0; e < mesh->element_count(); ++e) {
      CHECK((down.element(e) - s.element(e)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("barth-jespersen limiter") {
  const auto law = ConservationLaw::euler(1.4);
  auto mesh = square(5, RefineMode::p, 1);
  SolverSettings settings;
  settings.limiter = true;
  DgOperator op(law, mesh, settings);

  auto linear = interpolate_ic(
      [&](const Vec2& x) { return primitive_to_conserved(law, 1 + 0.1 * x.x() + 0.05 * x.y(), Vec2(0.2, 0), 1); },
      mesh, 4);
  // interior elements of a linear field see no new extrema; the seam does
  Coefficients c = linear.coefficients();
  const auto a = op.limit(c);
  for (int iy = 1; iy < 4; ++iy) {
    for (int ix = 1; ix < 4; ++ix) CHECK(a[mesh->agent_index(ix, iy)] == doctest::Approx(1.0));
  }

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> r(0.5, 1.5);
  Coefficients u(mesh->element_count());
  for (auto& b : u) {
    b.resize(4, 4);
    for (int k = 0; k < 4; ++k) {
      b.row(k) = primitive_to_conserved(law, r(rng), Vec2(0.1, 0.1), 1).transpose();
    }
  }
  // spike in the middle element
  u[12].col(0) << 1.0, 9.0, 1.0, 1.0;
  const ReferenceElement& ref = reference_element(1);
  std::vector<Eigen::RowVectorXd> before;
  for (const auto& b : u) before.push_back(ref.mean * b);
  const Coefficients orig = u;
  const auto alpha = op.limit(u);
  CHECK(alpha[12] < 1.0);
  for (std::size_t e = 0; e < u.size(); ++e) {
    CHECK(alpha[e] >= 0.0);
    CHECK(alpha[e] <= 1.0);
    CHECK(((ref.mean * u[e]) - before[e]).cwiseAbs().maxCoeff() < 1e-14);
  }
  double lo = 1e9, hi = -1e9;
  for (int nb : {7, 11, 13, 17, 12}) {
    lo = std::min(lo, (ref.mean * orig[nb].col(0))(0));
    hi = std::max(hi, (ref.mean * orig[nb].col(0))(0));
  }
  for (int k = 0; k < 4; ++k) {
    CHECK(u[12](k, 0) >= lo - 1e-12);
    CHECK(u[12](k, 0) <= hi + 1e-12);
  }
}

TEST_CASE("inadmissible state raises SolverError with the element") {
  const auto law = ConservationLaw::euler(1.4);
  auto mesh = square(2, RefineMode::p, 1);
  DgOperator op(law, mesh);
  auto s = interpolate_ic([&](const Vec2&) { return primitive_to_conserved(law, 1, Vec2::Zero(), 1); },
                          mesh, 4);
  s.element(2)(1, 0) = -0.5;
  Coefficients r;
  try {
    op.residual(s.coefficients(), r, 0.25);
    FAIL("expected SolverError");
  } catch (const SolverError& err) {
    CHECK(err.element() == 2);
    CHECK(err.time() == 0.25);
  }
}
