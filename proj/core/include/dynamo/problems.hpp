#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dynamo/dg.hpp"
#include "dynamo/equations.hpp"
#include "dynamo/mesh.hpp"

namespace dynamo {

enum class Family {
  adv_ring,
  adv_bump,
  euler_pressure_pulse,
  euler_density_pulse,
  riemann_2d,
  sod_radial,
};

std::string_view family_name(Family family);
/// Throws InvalidArgument for unknown names.
Family parse_family(std::string_view name);

struct Pulse {
  Vec2 center = Vec2::Zero();
  double height = 0.0;
  double width = 0.0;
};

struct PrimitiveState {
  double density = 1.0;
  double u = 0.0;
  double v = 0.0;
  double pressure = 1.0;

  friend bool operator==(const PrimitiveState&, const PrimitiveState&) = default;
};

enum Quadrant { top_left = 0, top_right = 1, bottom_left = 2, bottom_right = 3 };

/// A fully specified initial-value problem plus the run settings that go
/// with its family. Only the fields of the active family are meaningful.
struct ProblemSpec {
  Family family = Family::adv_ring;
  Vec2 domain_min = Vec2::Zero();
  Vec2 domain_max = Vec2::Ones();
  double gamma = 1.4;

  /// Advection velocity, or the background flow (u0, v0) of the pulses.
  Vec2 velocity = Vec2::Zero();

  // ring / bump
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  double width = 0.0;
  double height = 1.0;

  // pressure pulses (one entry for the density pulse)
  std::vector<Pulse> pulses;

  // riemann_2d
  std::array<PrimitiveState, 4> quadrants{};
  Vec2 diaphragm = Vec2::Zero();
  int case_id = 0;

  // sod_radial
  PrimitiveState inner;
  PrimitiveState outer;
  double sod_radius = 0.0;

  int agents_x = 24;
  int agents_y = 24;
  double remesh_time = 0.3;
  int rl_steps = 4;
  /// Smooth families run P2 unlimited, discontinuous ones P1 with limiting.
  bool smooth = true;
  /// Cost and error are measured only inside this box when set.
  std::optional<Box> analysis_region;

  double final_time() const { return remesh_time * rl_steps; }
};

/// Parameters drawn uniformly from the family's training distribution.
ProblemSpec sample(Family family, std::mt19937_64& rng);

/// Fixed, documented instance of each family used for examples and tests.
ProblemSpec example_problem(Family family);

/// Canonical four-quadrant cases 3, 4, 6, 12, 15, 17 on the doubled domain.
ProblemSpec riemann_case(int id);
ProblemSpec sod_radial();

ConservationLaw law_for(const ProblemSpec& spec);
int base_order_for(const ProblemSpec& spec);
SolverSettings solver_settings_for(const ProblemSpec& spec);
/// Component used for error estimation, observation and evaluation.
int observed_component(const ProblemSpec& spec);

/// Conserved variables of the initial condition at x.
StateVec evaluate_ic(const ProblemSpec& spec, const Vec2& x);
InitialCondition initial_condition(const ProblemSpec& spec);

/// Analytic solution at time t for the advection families.
std::optional<StateVec> exact_solution(const ProblemSpec& spec, const Vec2& x, double t);

std::string to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const std::string& text);

}  // namespace dynamo
