#include "dynamo/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "dynamo/basis.hpp"
#include "dynamo/error.hpp"
#include "dynamo/estimators.hpp"

namespace dynamo {

void EnvConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
  if (!(beta > 1.0)) throw InvalidArgument("beta must exceed 1");
  if (!(p_ur > 0.0) || !(p_or > 0.0)) throw InvalidArgument("penalty factors must be positive");
  if (window_x < 0 || window_y < 0) throw InvalidArgument("window half-widths must be >= 0");
  if (agents_x < 0 || agents_y < 0) throw InvalidArgument("agent counts must be >= 0");
  if (remesh_time < 0.0) throw InvalidArgument("remesh time must be >= 0");
  if (rl_steps < 0) throw InvalidArgument("rl_steps must be >= 0");
  if (!(cfl > 0.0)) throw InvalidArgument("CFL number must be positive");
  if (!(error_floor > 0.0)) throw InvalidArgument("error floor must be positive");
}

Thresholds thresholds(std::span<const double> errors, double alpha, double beta) {
  if (errors.empty()) throw InvalidArgument("empty error field");
  double inf = 0.0;
  for (double e : errors) {
    if (!(e >= 0.0)) throw InvalidArgument("errors must be non-negative");
    inf = std::max(inf, e);
  }
  if (inf == 0.0) throw DegenerateThreshold("error field is identically zero");
  Thresholds t;
  t.e_max = alpha * inf;
  t.e_min = std::pow(t.e_max, beta);
  if (t.e_max >= 1.0) {
    std::clog << "warning: e_max = " << t.e_max << " >= 1, refinement band is inverted\n";
  }
  return t;
}

double agent_reward(double e_hat, Action action, const Thresholds& t, double p_ur, double p_or,
                    double floor) {
  const double e = std::max(e_hat, floor);
  if (e > t.e_max && action == Action::coarse) return -p_ur * std::abs(std::log10(e / t.e_max));
  if (e < t.e_min && action == Action::fine) return -p_or * std::abs(std::log10(e / t.e_min));
  return 0.0;
}

std::vector<double> compute_reward(std::span<const Action> actions, std::span<const double> e_hat,
                                   const Thresholds& t, double p_ur, double p_or, double floor) {
  if (actions.size() != e_hat.size()) throw InvalidArgument("reward input length mismatch");
  std::vector<double> r(actions.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = agent_reward(e_hat[i], actions[i], t, p_ur, p_or, floor);
  }
  return r;
}

std::vector<Vec2> agent_propagation(const SolutionState& state, const ConservationLaw& law,
                                    int component) {
  const Mesh& mesh = state.mesh();
  std::vector<double> ax(mesh.element_count());
  std::vector<double> ay(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const ReferenceElement& ref = reference_element(mesh.elements()[e].order);
    const Eigen::MatrixXd uq = ref.interp * state.element(e);
    Vec2 sum = Vec2::Zero();
    for (Eigen::Index k = 0; k < uq.rows(); ++k) {
      sum += ref.weights[k] * flux_jacobian(law, uq.row(k).transpose()).entry(component, component);
    }
    ax[e] = 0.25 * sum.x();
    ay[e] = 0.25 * sum.y();
  }
  const auto gx = aggregate_averages(ax, mesh);
  const auto gy = aggregate_averages(ay, mesh);
  std::vector<Vec2> out(gx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec2(gx[i], gy[i]);
  return out;
}

std::vector<std::vector<double>> agent_solution_averages(const SolutionState& state,
                                                         const ConservationLaw& law) {
  const Mesh& mesh = state.mesh();
  const int m = law.components();
  std::vector<std::vector<double>> element(m, std::vector<double>(mesh.element_count()));
  for (int e = 0; e < mesh.element_count(); ++e) {
    const StateVec avg = state.cell_average(e);
    for (int c = 0; c < m; ++c) element[c][e] = avg[c];
  }
  std::vector<std::vector<double>> agent_fields;
  for (int c = 0; c < m; ++c) agent_fields.push_back(aggregate_averages(element[c], mesh));

  const int agents = mesh.agent_count();
  const int fields = law.kind() == LawKind::euler ? m + 4 : m;
  std::vector<std::vector<double>> out(agents, std::vector<double>(fields));
  for (int a = 0; a < agents; ++a) {
    StateVec u(m);
    for (int c = 0; c < m; ++c) {
      u[c] = agent_fields[c][a];
      out[a][c] = u[c];
    }
    if (law.kind() == LawKind::euler) {
      const Primitive p = conserved_to_primitive(law, u);
      out[a][m] = p.density;
      out[a][m + 1] = p.velocity.x();
      out[a][m + 2] = p.velocity.y();
      out[a][m + 3] = p.pressure;
    }
  }
  return out;
}

Eigen::MatrixXd build_observations(const Mesh& mesh, const AgentFields& fields, double e_max,
                                   double remesh_time, const ObservationLayout& layout,
                                   double floor) {
  if (!(e_max > 0.0) || e_max == 1.0) throw InvalidArgument("e_max must be positive and != 1");
  const int agents = mesh.agent_count();
  if (static_cast<int>(fields.errors.size()) != agents ||
      static_cast<int>(fields.propagation.size()) != agents) {
    throw InvalidArgument("agent field length mismatch");
  }
  const int extra = layout.channels - 2;
  if (extra > 0 && (static_cast<int>(fields.solution.size()) != agents ||
                    static_cast<int>(fields.solution[0].size()) != extra)) {
    throw InvalidArgument("solution channels do not match the observation layout");
  }
  const double log_emax = std::log10(e_max);
  std::vector<double> ch0(agents);
  for (int j = 0; j < agents; ++j) {
    ch0[j] = -std::log10(std::max(fields.errors[j], floor)) / log_emax;
  }

  Eigen::MatrixXd obs(agents, layout.size());
  const int center = layout.window_cells() / 2;
  for (int i = 0; i < agents; ++i) {
    const auto window = mesh.observation_window(i, layout.window_x, layout.window_y);
    for (int w = 0; w < static_cast<int>(window.size()); ++w) {
      const int j = window[w];
      obs(i, layout.index(w, 0)) = ch0[j];
      double likelihood = 0.0;
      if (w != center) {
        const Vec2 r = mesh.displacement(i, j).r;
        const double r2 = r.squaredNorm();
        if (r2 > 0.0) likelihood = fields.propagation[j].dot(r) / r2 * remesh_time;
      }
      obs(i, layout.index(w, 1)) = likelihood;
      for (int c = 0; c < extra; ++c) obs(i, layout.index(w, 2 + c)) = fields.solution[j][c];
    }
  }
  return obs;
}

AmrEnv::AmrEnv(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  layout_.window_x = config_.window_x;
  layout_.window_y = config_.window_y;
  layout_.channels = 2;
  if (config_.solution_channels) {
    const bool euler = config_.family != Family::adv_ring && config_.family != Family::adv_bump;
    layout_.channels += euler ? 8 : 1;
  }
}

void AmrEnv::set_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
  config_.alpha = alpha;
}

int AmrEnv::agent_count() const {
  if (!sim_) throw Error("environment has not been reset");
  return sim_->mesh().agent_count();
}

ProblemSpec AmrEnv::resolve(ProblemSpec spec) const {
  if (config_.agents_x > 0) spec.agents_x = config_.agents_x;
  if (config_.agents_y > 0) spec.agents_y = config_.agents_y;
  if (config_.remesh_time > 0.0) spec.remesh_time = config_.remesh_time;
  if (config_.rl_steps > 0) spec.rl_steps = config_.rl_steps;
  return spec;
}

bool AmrEnv::remesh_time_within_bound(const ProblemSpec& spec, const EnvConfig& config) {
  const ConservationLaw law = law_for(spec);
  const Vec2 h = (spec.domain_max - spec.domain_min).cwiseQuotient(
      Vec2(spec.agents_x, spec.agents_y));
  double lambda = 0.0;
  const int samples = 4 * std::max(spec.agents_x, spec.agents_y);
  for (int iy = 0; iy < samples; ++iy) {
    for (int ix = 0; ix < samples; ++ix) {
      const Vec2 x = spec.domain_min + (spec.domain_max - spec.domain_min).cwiseProduct(
                                           Vec2((ix + 0.5) / samples, (iy + 0.5) / samples));
      lambda = std::max(lambda, max_wavespeed(law, evaluate_ic(spec, x)));
    }
  }
  if (lambda == 0.0) return true;
  const double bound = std::min(config.window_x * h.x(), config.window_y * h.y()) / lambda;
  return spec.remesh_time <= bound;
}

Eigen::MatrixXd AmrEnv::reset(std::mt19937_64& rng) {
  return reset(config_.problem ? *config_.problem : sample(config_.family, rng));
}

Eigen::MatrixXd AmrEnv::reset(const ProblemSpec& raw) {
  const ProblemSpec spec = resolve(raw);
  if (config_.solution_channels) {
    const int expected = 2 + law_for(spec).components() +
                         (law_for(spec).kind() == LawKind::euler ? 4 : 0);
    if (expected != layout_.channels) {
      throw InvalidArgument("problem family does not match the configured observation layout");
    }
  }
  if (!remesh_time_within_bound(spec, config_)) {
    std::clog << "warning: remesh time " << spec.remesh_time
              << " exceeds the observation window's domain of influence\n";
  }
  SimulationSetup setup = default_setup(spec, config_.mode);
  if (config_.base_order >= 0) setup.base_order = config_.base_order;
  setup.solver.cfl = config_.cfl;
  setup.estimator = config_.estimator;
  sim_ = std::make_unique<AmrSimulation>(spec, setup);
  steps_ = 0;
  done_ = false;
  errors_ = sim_->agent_errors();
  thresholds_ = thresholds(errors_, config_.alpha, config_.beta);
  observations_ = observe();
  return observations_;
}

Eigen::MatrixXd AmrEnv::observe() {
  AgentFields fields;
  fields.errors = errors_;
  fields.propagation = agent_propagation(sim_->state(), sim_->law(),
                                         observed_component(sim_->problem()));
  if (config_.solution_channels) fields.solution = agent_solution_averages(sim_->state(), sim_->law());
  return build_observations(sim_->mesh(), fields, thresholds_.e_max, sim_->problem().remesh_time,
                            layout_, config_.error_floor);
}

std::optional<double> AmrEnv::true_error() const {
  const ProblemSpec& spec = sim_->problem();
  if (!exact_solution(spec, spec.domain_min, 0.0)) return std::nullopt;
  const double t = sim_->state().time();
  return l2_error(sim_->state(), [&](const Vec2& x) { return (*exact_solution(spec, x, t))[0]; },
                  0, spec.analysis_region);
}

StepResult AmrEnv::step(std::span<const Action> actions) {
  if (!active()) throw Error("step called on an inactive episode");
  const int agents = agent_count();
  if (static_cast<int>(actions.size()) != agents) {
    throw InvalidArgument("action count does not match agent count");
  }
  StepResult result;
  result.diagnostics.used = thresholds_;
  try {
    sim_->remesh(actions);
    const IntervalReport report = sim_->advance(sim_->problem().remesh_time, true);
    errors_ = sim_->agent_errors();
    result.rewards = compute_reward(actions, report.running_max.values, thresholds_, config_.p_ur,
                                    config_.p_or, config_.error_floor);
    thresholds_ = thresholds(errors_, config_.alpha, config_.beta);
    observations_ = observe();
    result.diagnostics.running_max = report.running_max.values;
    result.diagnostics.dof_steps = report.dof_steps;
    result.diagnostics.region_dof_steps = report.region_dof_steps;
    result.diagnostics.solver_steps = report.steps;
    ++steps_;
    done_ = steps_ >= sim_->problem().rl_steps;
  } catch (const SolverError& e) {
    result.diagnostics.failed = true;
    result.diagnostics.failure = e.what();
  } catch (const InadmissibleState& e) {
    result.diagnostics.failed = true;
    result.diagnostics.failure = e.what();
  } catch (const DegenerateThreshold& e) {
    result.diagnostics.failed = true;
    result.diagnostics.failure = e.what();
  }
  if (result.diagnostics.failed) {
    ++steps_;
    done_ = true;
    result.rewards.assign(agents, config_.failure_penalty);
  }
  result.done = done_;
  result.observations = observations_;
  result.diagnostics.errors = errors_;
  result.diagnostics.next = thresholds_;
  result.diagnostics.dofs = sim_->mesh().dof_count(sim_->components());
  result.diagnostics.time = sim_->state().time();
  if (!result.diagnostics.failed) result.diagnostics.true_error = true_error();
  return result;
}

void EpisodeTrace::record(const StepResult& result, std::span<const Action> actions) {
  Row row{};
  row.time = result.diagnostics.time;
  row.dofs = result.diagnostics.dofs;
  row.mean_reward = result.rewards.empty()
                        ? 0.0
                        : std::accumulate(result.rewards.begin(), result.rewards.end(), 0.0) /
                              static_cast<double>(result.rewards.size());
  row.max_error = result.diagnostics.errors.empty()
                      ? 0.0
                      : *std::max_element(result.diagnostics.errors.begin(),
                                          result.diagnostics.errors.end());
  row.e_max = result.diagnostics.next.e_max;
  row.e_min = result.diagnostics.next.e_min;
  row.fine = static_cast<int>(std::count(actions.begin(), actions.end(), Action::fine));
  row.coarse = static_cast<int>(actions.size()) - row.fine;
  rows_.push_back(row);
}

void EpisodeTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path);
  out << "step,time,dofs,mean_reward,max_error,e_max,e_min,fine,coarse\n";
  out.precision(17);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const Row& r = rows_[i];
    out << i + 1 << ',' << r.time << ',' << r.dofs << ',' << r.mean_reward << ',' << r.max_error
        << ',' << r.e_max << ',' << r.e_min << ',' << r.fine << ',' << r.coarse << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace dynamo
