#include "dynamo/problems.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "dynamo/error.hpp"

namespace dynamo {

namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, 6> kFamilyNames = {
    "adv_ring", "adv_bump", "euler_pressure_pulse", "euler_density_pulse", "riemann_2d",
    "sod_radial"};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Minimal-image offset x - c on the periodic domain of `spec`.
Vec2 periodic_offset(const ProblemSpec& spec, const Vec2& x, const Vec2& c) {
  const Vec2 ext = spec.domain_max - spec.domain_min;
  Vec2 d = x - c;
  for (int k = 0; k < 2; ++k) d[k] -= ext[k] * std::round(d[k] / ext[k]);
  return d;
}

StateVec conserved(const ProblemSpec& spec, const PrimitiveState& s) {
  return primitive_to_conserved(ConservationLaw::euler(spec.gamma), s.density,
                                Vec2(s.u, s.v), s.pressure);
}

PrimitiveState draw_riemann_state(std::mt19937_64& rng) {
  PrimitiveState s;
  s.density = uniform(rng, 0.2, 2.0);
  s.u = uniform(rng, -0.5, 0.5);
  s.v = uniform(rng, -0.5, 0.5);
  s.pressure = uniform(rng, 0.2, 2.0);
  return s;
}

ProblemSpec ring_defaults() {
  ProblemSpec s;
  s.family = Family::adv_ring;
  s.agents_x = s.agents_y = 24;
  s.remesh_time = 0.3;
  s.rl_steps = 4;
  return s;
}

ProblemSpec pulse_defaults(Family family) {
  ProblemSpec s;
  s.family = family;
  s.domain_max = Vec2(1.5, 1.5);
  s.agents_x = s.agents_y = 48;
  s.remesh_time = 0.05;
  s.rl_steps = 4;
  return s;
}

ProblemSpec riemann_defaults() {
  ProblemSpec s;
  s.family = Family::riemann_2d;
  s.agents_x = s.agents_y = 32;
  s.remesh_time = 0.05;
  s.rl_steps = 4;
  s.smooth = false;
  s.diaphragm = Vec2(0.5, 0.5);
  return s;
}

Vec2 velocity_from_polar(double magnitude, double angle) {
  return Vec2(magnitude * std::cos(angle), magnitude * std::sin(angle));
}

}  // namespace

std::string_view family_name(Family family) {
  return kFamilyNames[static_cast<std::size_t>(family)];
}

Family parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i) {
    if (kFamilyNames[i] == name) return static_cast<Family>(i);
  }
  throw InvalidArgument("unknown problem family '" + std::string(name) + "'");
}

ProblemSpec sample(Family family, std::mt19937_64& rng) {
  switch (family) {
    case Family::adv_ring: {
      ProblemSpec s = ring_defaults();
      s.center = Vec2(uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7));
      s.radius = uniform(rng, 0.1, 0.3);
      s.width = uniform(rng, 50.0, 150.0);
      const double speed = uniform(rng, 0.7, 1.0);
      s.velocity = velocity_from_polar(speed, uniform(rng, 0.0, 2.0 * std::numbers::pi));
      return s;
    }
    case Family::adv_bump: {
      ProblemSpec s = ring_defaults();
      s.family = Family::adv_bump;
      s.center = Vec2(uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7));
      s.height = uniform(rng, 0.2, 1.0);
      s.width = uniform(rng, 25.0, 100.0);
      const double speed = uniform(rng, 0.7, 1.0);
      s.velocity = velocity_from_polar(speed, uniform(rng, 0.0, 2.0 * std::numbers::pi));
      return s;
    }
    case Family::euler_pressure_pulse:
    case Family::euler_density_pulse: {
      ProblemSpec s = pulse_defaults(family);
      s.velocity = Vec2(uniform(rng, 0.0, 3.0), uniform(rng, 0.0, 3.0));
      const int count = family == Family::euler_pressure_pulse
                            ? std::uniform_int_distribution<int>(1, 3)(rng)
                            : 1;
      for (int i = 0; i < count; ++i) {
        Pulse p;
        p.height = uniform(rng, 0.05, 0.2);
        p.width = uniform(rng, 200.0, 700.0);
        p.center = Vec2(uniform(rng, 0.25, 1.25), uniform(rng, 0.25, 1.25));
        s.pulses.push_back(p);
      }
      return s;
    }
    case Family::riemann_2d: {
      ProblemSpec s = riemann_defaults();
      for (auto& q : s.quadrants) q = draw_riemann_state(rng);
      s.diaphragm = Vec2(uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7));
      return s;
    }
    case Family::sod_radial:
      return sod_radial();
  }
  throw InvalidArgument("unknown problem family");
}

ProblemSpec example_problem(Family family) {
  switch (family) {
    case Family::adv_ring: {
      ProblemSpec s = ring_defaults();
      s.center = Vec2(0.5, 0.5);
      s.radius = 0.1;
      s.width = 100.0;
      s.velocity = velocity_from_polar(1.0, 0.25 * std::numbers::pi);
      return s;
    }
    case Family::adv_bump: {
      ProblemSpec s = ring_defaults();
      s.family = Family::adv_bump;
      s.center = Vec2(0.5, 0.5);
      s.height = 1.0;
      s.width = 50.0;
      s.velocity = velocity_from_polar(1.0, 0.25 * std::numbers::pi);
      return s;
    }
    case Family::euler_pressure_pulse: {
      ProblemSpec s = pulse_defaults(family);
      s.velocity = Vec2(2.25, 2.67);
      s.pulses = {Pulse{Vec2(0.3, 0.53), 0.12, 580.0}};
      return s;
    }
    case Family::euler_density_pulse: {
      ProblemSpec s = pulse_defaults(family);
      s.velocity = Vec2(2.46, 2.99);
      s.pulses = {Pulse{Vec2(0.3, 0.53), 0.08, 267.0}};
      return s;
    }
    case Family::riemann_2d:
      return riemann_case(4);
    case Family::sod_radial:
      return sod_radial();
  }
  throw InvalidArgument("unknown problem family");
}

ProblemSpec riemann_case(int id) {
  using P = PrimitiveState;
  ProblemSpec s = riemann_defaults();
  s.case_id = id;
  double tf = 0.0;
  // Quadrant order: top-left, top-right, bottom-left, bottom-right.
  switch (id) {
    case 3:
      s.quadrants = {P{0.5323, 1.206, 0.0, 0.3}, P{1.5, 0.0, 0.0, 1.5},
                     P{0.138, 1.206, 1.206, 0.029}, P{0.5323, 0.0, 1.206, 0.3}};
      tf = 0.3;
      break;
    case 4:
      s.quadrants = {P{0.5065, 0.8939, 0.0, 0.35}, P{1.1, 0.0, 0.0, 1.1},
                     P{1.1, 0.8939, 0.8939, 1.1}, P{0.5065, 0.0, 0.8939, 0.35}};
      tf = 0.25;
      break;
    case 6:
      s.quadrants = {P{2.0, 0.75, 0.5, 1.0}, P{1.0, 0.75, -0.5, 1.0},
                     P{1.0, -0.75, 0.5, 1.0}, P{3.0, -0.75, -0.5, 1.0}};
      tf = 0.3;
      break;
    case 12:
      s.quadrants = {P{1.0, 0.7276, 0.0, 1.0}, P{0.5313, 0.0, 0.0, 0.4},
                     P{0.8, 0.0, 0.0, 1.0}, P{1.0, 0.0, 0.7276, 1.0}};
      tf = 0.25;
      break;
    case 15:
      s.quadrants = {P{0.5197, -0.6259, -0.3, 0.4}, P{1.0, 0.1, -0.3, 1.0},
                     P{0.8, 0.1, -0.3, 0.4}, P{0.5313, 0.1, 0.4276, 0.4}};
      tf = 0.2;
      break;
    case 17:
      s.quadrants = {P{2.0, 0.0, -0.3, 1.0}, P{1.0, 0.0, -0.4, 1.0},
                     P{1.0625, 0.0, 0.2145, 0.4}, P{0.5197, 0.0, -1.1259, 0.4}};
      tf = 0.3;
      break;
    default:
      throw InvalidArgument("unknown Riemann case " + std::to_string(id));
  }
  s.domain_min = Vec2::Zero();
  s.domain_max = Vec2(2.0, 2.0);
  s.diaphragm = Vec2(1.0, 1.0);
  s.agents_x = s.agents_y = 64;
  s.remesh_time = 0.05;
  s.rl_steps = static_cast<int>(std::lround(tf / s.remesh_time));
  s.analysis_region = Box{Vec2(0.5, 0.5), Vec2(1.0, 1.0)};
  return s;
}

ProblemSpec sod_radial() {
  ProblemSpec s;
  s.family = Family::sod_radial;
  s.domain_min = Vec2(-0.5, -0.5);
  s.domain_max = Vec2(0.5, 0.5);
  s.center = Vec2::Zero();
  s.inner = PrimitiveState{1.0, 0.0, 0.0, 1.0};
  s.outer = PrimitiveState{0.125, 0.0, 0.0, 0.1};
  s.sod_radius = 0.25;
  s.agents_x = s.agents_y = 32;
  s.remesh_time = 0.05;
  s.rl_steps = 8;
  s.smooth = false;
  return s;
}

ConservationLaw law_for(const ProblemSpec& spec) {
  switch (spec.family) {
    case Family::adv_ring:
    case Family::adv_bump:
      return ConservationLaw::advection(spec.velocity);
    default:
      return ConservationLaw::euler(spec.gamma);
  }
}

int base_order_for(const ProblemSpec& spec) { return spec.smooth ? 2 : 1; }

SolverSettings solver_settings_for(const ProblemSpec& spec) {
  SolverSettings s;
  s.cfl = 0.5;
  s.limiter = !spec.smooth;
  s.limited_component = 0;
  return s;
}

int observed_component(const ProblemSpec& spec) {
  return law_for(spec).kind() == LawKind::advection ? 0 : 3;
}

StateVec evaluate_ic(const ProblemSpec& spec, const Vec2& x) {
  switch (spec.family) {
    case Family::adv_ring: {
      const double r = periodic_offset(spec, x, spec.center).norm() - spec.radius;
      StateVec u(1);
      u[0] = 1.0 + std::exp(-spec.width * r * r);
      return u;
    }
    case Family::adv_bump: {
      StateVec u(1);
      u[0] = spec.height * std::exp(-spec.width * periodic_offset(spec, x, spec.center).squaredNorm());
      return u;
    }
    case Family::euler_pressure_pulse: {
      double p = 1.0;
      for (const Pulse& pulse : spec.pulses) {
        p += pulse.height *
             std::exp(-pulse.width * periodic_offset(spec, x, pulse.center).squaredNorm());
      }
      return conserved(spec, PrimitiveState{1.0, spec.velocity.x(), spec.velocity.y(), p});
    }
    case Family::euler_density_pulse: {
      double rho = 1.0;
      for (const Pulse& pulse : spec.pulses) {
        rho += pulse.height *
               std::exp(-pulse.width * periodic_offset(spec, x, pulse.center).squaredNorm());
      }
      return conserved(spec, PrimitiveState{rho, spec.velocity.x(), spec.velocity.y(), 1.0});
    }
    case Family::riemann_2d: {
      const bool right = x.x() >= spec.diaphragm.x();
      const bool top = x.y() >= spec.diaphragm.y();
      const Quadrant q = top ? (right ? top_right : top_left) : (right ? bottom_right : bottom_left);
      return conserved(spec, spec.quadrants[q]);
    }
    case Family::sod_radial: {
      const double r = (x - spec.center).norm();
      return conserved(spec, r <= spec.sod_radius ? spec.inner : spec.outer);
    }
  }
  throw InvalidArgument("unknown problem family");
}

InitialCondition initial_condition(const ProblemSpec& spec) {
  return [spec](const Vec2& x) { return evaluate_ic(spec, x); };
}

std::optional<StateVec> exact_solution(const ProblemSpec& spec, const Vec2& x, double t) {
  if (spec.family != Family::adv_ring && spec.family != Family::adv_bump) return std::nullopt;
  return evaluate_ic(spec, x - t * spec.velocity);
}

namespace {

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
Vec2 json_vec(const json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }
json state_json(const PrimitiveState& s) {
  return json::array({s.density, s.u, s.v, s.pressure});
}
PrimitiveState json_state(const json& j) {
  return PrimitiveState{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                        j.at(3).get<double>()};
}

}  // namespace

std::string to_json(const ProblemSpec& spec) {
  json j;
  j["family"] = std::string(family_name(spec.family));
  j["domain_min"] = vec_json(spec.domain_min);
  j["domain_max"] = vec_json(spec.domain_max);
  j["gamma"] = spec.gamma;
  j["velocity"] = vec_json(spec.velocity);
  j["agents"] = json::array({spec.agents_x, spec.agents_y});
  j["remesh_time"] = spec.remesh_time;
  j["rl_steps"] = spec.rl_steps;
  j["smooth"] = spec.smooth;
  switch (spec.family) {
    case Family::adv_ring:
    case Family::adv_bump:
      j["center"] = vec_json(spec.center);
      j["radius"] = spec.radius;
      j["width"] = spec.width;
      j["height"] = spec.height;
      break;
    case Family::euler_pressure_pulse:
    case Family::euler_density_pulse: {
      json pulses = json::array();
      for (const Pulse& p : spec.pulses) {
        pulses.push_back({{"center", vec_json(p.center)}, {"height", p.height}, {"width", p.width}});
      }
      j["pulses"] = pulses;
      break;
    }
    case Family::riemann_2d: {
      json q = json::array();
      for (const auto& s : spec.quadrants) q.push_back(state_json(s));
      j["quadrants"] = q;
      j["diaphragm"] = vec_json(spec.diaphragm);
      j["case_id"] = spec.case_id;
      break;
    }
    case Family::sod_radial:
      j["center"] = vec_json(spec.center);
      j["inner"] = state_json(spec.inner);
      j["outer"] = state_json(spec.outer);
      j["sod_radius"] = spec.sod_radius;
      break;
  }
  if (spec.analysis_region) {
    j["analysis_region"] = {{"min", vec_json(spec.analysis_region->min)},
                            {"size", vec_json(spec.analysis_region->size)}};
  }
  return j.dump();
}

ProblemSpec problem_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ProblemSpec s;
    s.family = parse_family(j.at("family").get<std::string>());
    s.domain_min = json_vec(j.at("domain_min"));
    s.domain_max = json_vec(j.at("domain_max"));
    s.gamma = j.at("gamma").get<double>();
    s.velocity = json_vec(j.at("velocity"));
    s.agents_x = j.at("agents").at(0).get<int>();
    s.agents_y = j.at("agents").at(1).get<int>();
    s.remesh_time = j.at("remesh_time").get<double>();
    s.rl_steps = j.at("rl_steps").get<int>();
    s.smooth = j.at("smooth").get<bool>();
    if (j.contains("center")) s.center = json_vec(j["center"]);
    if (j.contains("radius")) s.radius = j["radius"].get<double>();
    if (j.contains("width")) s.width = j["width"].get<double>();
    if (j.contains("height")) s.height = j["height"].get<double>();
    if (j.contains("pulses")) {
      for (const auto& p : j["pulses"]) {
        s.pulses.push_back(Pulse{json_vec(p.at("center")), p.at("height").get<double>(),
                                 p.at("width").get<double>()});
      }
    }
    if (j.contains("quadrants")) {
      for (int q = 0; q < 4; ++q) s.quadrants[q] = json_state(j["quadrants"].at(q));
    }
    if (j.contains("diaphragm")) s.diaphragm = json_vec(j["diaphragm"]);
    if (j.contains("case_id")) s.case_id = j["case_id"].get<int>();
    if (j.contains("inner")) s.inner = json_state(j["inner"]);
    if (j.contains("outer")) s.outer = json_state(j["outer"]);
    if (j.contains("sod_radius")) s.sod_radius = j["sod_radius"].get<double>();
    if (j.contains("analysis_region")) {
      s.analysis_region = Box{json_vec(j["analysis_region"].at("min")),
                              json_vec(j["analysis_region"].at("size"))};
    }
    return s;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed problem description: ") + e.what());
  }
}

}  // namespace dynamo
