#include "dynamo/metrics.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "dynamo/basis.hpp"
#include "dynamo/error.hpp"

namespace dynamo {

double accumulate_cost(const EpisodeRun& run, CostMode mode) {
  const auto& v = mode == CostMode::per_step ? run.dof_steps : run.dofs;
  return std::accumulate(v.begin(), v.end(), 0.0);
}

MarkingPolicy uniform_policy(Action action) {
  return [action](const AmrEnv& env) { return std::vector<Action>(env.agent_count(), action); };
}

MarkingPolicy threshold_policy(double theta) {
  if (!(theta > 0.0)) throw InvalidArgument("threshold must be positive");
  return [theta](const AmrEnv& env) { return threshold_absolute(env.current_errors(), theta); };
}

MarkingPolicy network_policy(std::shared_ptr<const PolicyWeights> weights) {
  if (!weights) throw InvalidArgument("network policy needs weights");
  return [weights](const AmrEnv& env) {
    return greedy_actions(*weights, env.current_observations());
  };
}

EpisodeRun run_episode(const EnvConfig& config, const ProblemSpec& problem,
                       const MarkingPolicy& policy) {
  AmrEnv env(config);
  env.reset(problem);
  EpisodeRun run;
  while (env.active()) {
    std::vector<Action> actions = policy(env);
    const StepResult r = env.step(actions);
    run.dof_steps.push_back(r.diagnostics.region_dof_steps);
    run.dofs.push_back(static_cast<double>(env.simulation().region_dof_count()));
    run.actions.push_back(std::move(actions));
    if (r.diagnostics.failed) {
      run.failed = true;
      run.failure = r.diagnostics.failure;
    }
  }
  run.final_state = std::make_shared<const SolutionState>(env.simulation().state());
  run.final_time = env.simulation().state().time();
  return run;
}

Reference make_reference(const ProblemSpec& problem, RefineMode mode, const EnvConfig& config) {
  Reference ref;
  ref.problem = problem;
  if (config.agents_x > 0) ref.problem.agents_x = config.agents_x;
  if (config.agents_y > 0) ref.problem.agents_y = config.agents_y;
  if (config.remesh_time > 0.0) ref.problem.remesh_time = config.remesh_time;
  if (config.rl_steps > 0) ref.problem.rl_steps = config.rl_steps;
  if (law_for(problem).kind() == LawKind::advection) return ref;

  SimulationSetup setup = default_setup(ref.problem, RefineMode::p);
  if (config.base_order >= 0) setup.base_order = config.base_order;
  setup.solver.cfl = config.cfl;
  if (mode == RefineMode::p) {
    setup.base_order += 2;
  } else {
    setup.agents_x = 4 * ref.problem.agents_x;
    setup.agents_y = 4 * ref.problem.agents_y;
  }
  AmrSimulation sim(ref.problem, setup);
  sim.advance(ref.problem.final_time(), false);
  ref.solution = std::make_shared<const SolutionState>(sim.state());
  return ref;
}

double true_error(const SolutionState& state, const Reference& reference) {
  const ProblemSpec& spec = reference.problem;
  const int component = observed_component(spec);
  if (component >= state.components()) throw InvalidArgument("reference/problem mismatch");
  if (!reference.solution) {
    const double t = state.time();
    if (!exact_solution(spec, spec.domain_min, t)) {
      throw InvalidArgument("no analytic solution and no reference run");
    }
    return l2_error(state, [&](const Vec2& x) { return (*exact_solution(spec, x, t))[component]; },
                    component, spec.analysis_region);
  }
  const SolutionState& ref = *reference.solution;
  if (ref.components() != state.components()) throw InvalidArgument("reference/problem mismatch");
  if (std::abs(ref.time() - state.time()) > 1e-9 * std::max(1.0, std::abs(ref.time()))) {
    throw InvalidArgument("reference and run end at different times");
  }
  // Quadrature on whichever mesh resolves more: more elements, or higher order.
  const bool ref_finer = ref.mesh().dof_count(1) >= state.mesh().dof_count(1);
  const SolutionState& fine = ref_finer ? ref : state;
  const SolutionState& other = ref_finer ? state : ref;
  const Mesh& mesh = fine.mesh();
  double sum = 0.0;
  for (int e : elements_in_region(mesh, spec.analysis_region)) {
    const Element& el = mesh.elements()[e];
    const auto rule = gauss_legendre(el.order + 2);
    const auto nodes = gauss_lobatto_nodes(el.order);
    const Eigen::MatrixXd v = lagrange_values(nodes, rule.points);
    const Eigen::VectorXd uq = kron(v, v) * fine.element(e).col(component);
    const int q = static_cast<int>(rule.points.size());
    for (int qy = 0; qy < q; ++qy) {
      for (int qx = 0; qx < q; ++qx) {
        const Vec2 x(el.box.min.x() + 0.5 * (rule.points[qx] + 1.0) * el.box.size.x(),
                     el.box.min.y() + 0.5 * (rule.points[qy] + 1.0) * el.box.size.y());
        const double d = uq[qy * q + qx] - other.evaluate(x)[component];
        sum += rule.weights[qx] * rule.weights[qy] * 0.25 * el.box.area() * d * d;
      }
    }
  }
  return std::sqrt(sum);
}

Normalized normalize(double c, double e, double c_coarse, double e_coarse, double c_fine,
                     double e_fine) {
  if (!(c_fine > c_coarse)) throw InvalidArgument("degenerate cost normalization");
  if (!(e_coarse > e_fine)) throw InvalidArgument("degenerate error normalization");
  return Normalized{(c - c_coarse) / (c_fine - c_coarse), (e - e_fine) / (e_coarse - e_fine)};
}

double efficiency(double c, double e) { return 1.0 - std::sqrt(c * c + e * e); }

const Baselines& BaselineCache::get(const ProblemSpec& problem, const EnvConfig& config,
                                    CostMode mode) {
  const std::string key = to_json(problem) + (config.mode == RefineMode::h ? "|h" : "|p") +
                          (mode == CostMode::per_step ? "|step" : "|interval") + "|" +
                          std::to_string(config.agents_x) + "x" + std::to_string(config.agents_y) +
                          "|" + std::to_string(config.remesh_time) + "|" +
                          std::to_string(config.rl_steps);
  auto it = entries_.find(key);
  if (it != entries_.end()) return it->second;
  Baselines b;
  b.reference = std::make_shared<const Reference>(make_reference(problem, config.mode, config));
  const EpisodeRun coarse = run_episode(config, problem, uniform_policy(Action::coarse));
  const EpisodeRun fine = run_episode(config, problem, uniform_policy(Action::fine));
  if (coarse.failed || fine.failed) throw SolverError("reference run failed", 0.0, -1);
  b.c_coarse = accumulate_cost(coarse, mode);
  b.c_fine = accumulate_cost(fine, mode);
  b.e_coarse = true_error(*coarse.final_state, *b.reference);
  b.e_fine = true_error(*fine.final_state, *b.reference);
  return entries_.emplace(key, std::move(b)).first->second;
}

std::vector<RunRecord> pareto_sweep(const ProblemSpec& problem, const EnvConfig& config,
                                    const std::vector<double>& parameters,
                                    const SweepOptions& options, BaselineCache& cache) {
  std::vector<RunRecord> records(parameters.size());
  if (parameters.empty()) return records;
  if (options.family == PolicyFamily::network && !options.weights) {
    throw InvalidArgument("network sweep needs weights");
  }
  const Baselines& base = cache.get(problem, config, options.cost_mode);

  auto run_one = [&](std::size_t k) {
    const auto start = std::chrono::steady_clock::now();
    RunRecord& rec = records[k];
    rec.parameter = parameters[k];
    rec.seed = options.seed;
    EnvConfig cfg = config;
    MarkingPolicy policy;
    if (options.family == PolicyFamily::threshold) {
      rec.policy = "threshold";
      policy = threshold_policy(parameters[k]);
    } else {
      rec.policy = "dynamo";
      cfg.alpha = parameters[k];
      policy = network_policy(options.weights);
    }
    try {
      const EpisodeRun run = run_episode(cfg, problem, policy);
      rec.failed = run.failed;
      rec.cost = accumulate_cost(run, options.cost_mode);
      rec.error = run.failed ? std::nan("") : true_error(*run.final_state, *base.reference);
    } catch (const Error&) {
      rec.failed = true;
      rec.cost = std::nan("");
      rec.error = std::nan("");
    }
    const Normalized n =
        normalize(rec.cost, rec.error, base.c_coarse, base.e_coarse, base.c_fine, base.e_fine);
    rec.normalized_cost = n.cost;
    rec.normalized_error = n.error;
    rec.efficiency = efficiency(n.cost, n.error);
    rec.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(parameters.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < parameters.size(); ++k) run_one(k);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < parameters.size(); k = next++) {
        try {
          run_one(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return records;
}

void write_sweep_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path);
  out.precision(17);
  out << "policy,parameter,c,e,c_norm,e_norm,efficiency,seed,wall_time\n";
  for (const RunRecord& r : records) {
    out << r.policy << ',' << r.parameter << ',' << r.cost << ',' << r.error << ','
        << r.normalized_cost << ',' << r.normalized_error << ',' << r.efficiency << ',' << r.seed
        << ',' << r.wall_time << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace dynamo
