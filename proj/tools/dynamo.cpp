#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynamo/dynamo.hpp"

using namespace dynamo;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, config_error = 1, solver_error = 2, io_error = 3 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json defaults() {
  return json::parse(R"({
    "seed": 0,
    "problem": {"family": "adv_ring", "instance": "example", "riemann_case": 4},
    "mesh": {"agents_x": 0, "agents_y": 0, "mode": "p", "base_order": -1, "refinement": "coarse"},
    "solver": {"cfl": 0.5, "final_time": 0.0, "snapshot_interval": 0.0},
    "env": {"remesh_time": 0.0, "rl_steps": 0, "alpha": 0.1, "beta": 1.2, "p_ur": 10.0,
            "p_or": 5.0, "window_x": 8, "window_y": 8, "solution_channels": false,
            "total_degree": false, "failure_penalty": -100.0, "error_floor": 1e-16},
    "train": {"learning_rate": 1e-4, "fragment_length": 20, "batch_size": 1000,
              "minibatch_size": 50, "epochs": 1, "clip": 0.3, "gamma": 0.99, "lambda": 1.0,
              "vf_coef": 1.0, "entropy_coef": 0.0, "iterations": 100, "envs": 1,
              "optimizer": "sgd", "adam_beta1": 0.9, "adam_beta2": 0.999, "adam_epsilon": 1e-8,
              "hidden": 256},
    "eval": {"policy": "threshold", "parameters": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
             "checkpoint": "", "cost_mode": "per_step", "instances": 10, "workers": 1},
    "output": {"directory": "run", "vtk": true}
  })");
}

// Overlays `user` onto `base`, rejecting keys the defaults do not know.
void merge(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path + " must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (key == "problem.instance") {
      if (!it->is_string() && !it->is_object()) {
        throw ConfigError("problem.instance must be \"example\", \"sample\" or an object");
      }
      slot = *it;
    } else if (slot.is_object()) {
      merge(slot, *it, key);
    } else if (slot.is_number() && !it->is_number()) {
      throw ConfigError(key + " must be a number");
    } else if (slot.is_boolean() && !it->is_boolean()) {
      throw ConfigError(key + " must be a boolean");
    } else if (slot.is_string() && !it->is_string()) {
      throw ConfigError(key + " must be a string");
    } else if (slot.is_array() && !it->is_array()) {
      throw ConfigError(key + " must be an array");
    } else {
      slot = *it;
    }
  }
}

RefineMode parse_mode(const std::string& s) {
  if (s == "p") return RefineMode::p;
  if (s == "h") return RefineMode::h;
  throw ConfigError("mesh.mode must be \"h\" or \"p\"");
}

Action parse_action(const std::string& s) {
  if (s == "coarse") return Action::coarse;
  if (s == "fine") return Action::fine;
  throw ConfigError("mesh.refinement must be \"coarse\" or \"fine\"");
}

struct Resolved {
  json config;
  ProblemSpec problem;
  bool sampled = false;
  EnvConfig env;
  TrainConfig train;
  fs::path out;
};

ProblemSpec resolve_problem(const json& c, std::uint64_t seed, bool& sampled) {
  const Family family = parse_family(c["problem"]["family"].get<std::string>());
  const json& inst = c["problem"]["instance"];
  sampled = false;
  if (family == Family::riemann_2d) return riemann_case(c["problem"]["riemann_case"].get<int>());
  if (inst.is_object()) {
    ProblemSpec s = problem_from_json(inst.dump());
    if (s.family != family) throw ConfigError("problem.instance family differs from problem.family");
    return s;
  }
  const std::string how = inst.get<std::string>();
  if (how == "example") return example_problem(family);
  if (how == "sample") {
    sampled = true;
    std::mt19937_64 rng(seed);
    return sample(family, rng);
  }
  throw ConfigError("problem.instance must be \"example\", \"sample\" or an object");
}

Resolved resolve(const json& user) {
  Resolved r;
  r.config = defaults();
  merge(r.config, user, "");
  const json& c = r.config;
  const std::uint64_t seed = c["seed"].get<std::uint64_t>();
  r.problem = resolve_problem(c, seed, r.sampled);

  EnvConfig& e = r.env;
  e.family = r.problem.family;
  e.mode = parse_mode(c["mesh"]["mode"]);
  e.agents_x = c["mesh"]["agents_x"];
  e.agents_y = c["mesh"]["agents_y"];
  e.base_order = c["mesh"]["base_order"];
  e.cfl = c["solver"]["cfl"];
  const json& ec = c["env"];
  e.remesh_time = ec["remesh_time"];
  e.rl_steps = ec["rl_steps"];
  e.alpha = ec["alpha"];
  e.beta = ec["beta"];
  e.p_ur = ec["p_ur"];
  e.p_or = ec["p_or"];
  e.window_x = ec["window_x"];
  e.window_y = ec["window_y"];
  e.solution_channels = ec["solution_channels"];
  e.estimator.total_degree = ec["total_degree"];
  e.failure_penalty = ec["failure_penalty"];
  e.error_floor = ec["error_floor"];
  if (!r.sampled) e.problem = r.problem;
  e.validate();

  TrainConfig& t = r.train;
  const json& tc = c["train"];
  t.learning_rate = tc["learning_rate"];
  t.fragment_length = tc["fragment_length"];
  t.batch_size = tc["batch_size"];
  t.minibatch_size = tc["minibatch_size"];
  t.epochs = tc["epochs"];
  t.clip = tc["clip"];
  t.gamma = tc["gamma"];
  t.lambda = tc["lambda"];
  t.vf_coef = tc["vf_coef"];
  t.entropy_coef = tc["entropy_coef"];
  t.iterations = tc["iterations"];
  t.envs = tc["envs"];
  const std::string opt = tc["optimizer"];
  if (opt != "sgd" && opt != "adam") throw ConfigError("train.optimizer must be \"sgd\" or \"adam\"");
  t.optimizer = opt == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
  t.adam_beta1 = tc["adam_beta1"];
  t.adam_beta2 = tc["adam_beta2"];
  t.adam_epsilon = tc["adam_epsilon"];
  t.hidden = tc["hidden"];
  t.seed = seed;
  t.validate();

  parse_action(c["mesh"]["refinement"]);
  const std::string cm = c["eval"]["cost_mode"];
  if (cm != "per_step" && cm != "per_interval") {
    throw ConfigError("eval.cost_mode must be \"per_step\" or \"per_interval\"");
  }
  if (c["eval"]["instances"].get<int>() < 1) throw ConfigError("eval.instances must be positive");
  for (const auto& v : c["eval"]["parameters"]) {
    if (!v.is_number()) throw ConfigError("eval.parameters must be numbers");
  }
  r.out = c["output"]["directory"].get<std::string>();
  return r;
}

void write_config(const Resolved& r) {
  fs::create_directories(r.out);
  std::ofstream f(r.out / "config.json");
  if (!f) throw IoError("cannot write " + (r.out / "config.json").string());
  json c = r.config;
  // fixed instances are written out in full so the file replays exactly
  if (!r.sampled && r.problem.family != Family::riemann_2d) {
    c["problem"]["instance"] = json::parse(to_json(r.problem));
  }
  f << c.dump(2) << '\n';
}

std::string numbered(const std::string& stem, int k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.vtk", stem.c_str(), k);
  return buf;
}

// Applies the env's per-run overrides to the problem.
ProblemSpec with_overrides(ProblemSpec p, const EnvConfig& e) {
  if (e.agents_x > 0) p.agents_x = e.agents_x;
  if (e.agents_y > 0) p.agents_y = e.agents_y;
  if (e.remesh_time > 0) p.remesh_time = e.remesh_time;
  if (e.rl_steps > 0) p.rl_steps = e.rl_steps;
  return p;
}

int cmd_solve(const Resolved& r) {
  const json& c = r.config;
  const ProblemSpec spec = with_overrides(r.problem, r.env);
  SimulationSetup setup = default_setup(spec, r.env.mode);
  if (r.env.base_order >= 0) setup.base_order = r.env.base_order;
  setup.solver.cfl = r.env.cfl;
  AmrSimulation sim(spec, setup);
  const Action a = parse_action(c["mesh"]["refinement"]);
  sim.remesh(std::vector<Action>(sim.mesh().agent_count(), a));

  const double tf = c["solver"]["final_time"].get<double>() > 0 ? c["solver"]["final_time"].get<double>()
                                                                 : spec.final_time();
  const double dt_snap = c["solver"]["snapshot_interval"].get<double>() > 0
                             ? c["solver"]["snapshot_interval"].get<double>()
                             : spec.remesh_time;
  const bool vtk = c["output"]["vtk"];
  IntegralLog integrals((r.out / "integrals.csv").string(), sim.components());
  integrals.record(sim.state());
  int snap = 0;
  if (vtk) write_solution_vtk((r.out / numbered("solution", snap++)).string(), sim.state(), sim.law());
  long steps = 0;
  while (sim.state().time() < tf * (1 - 1e-12)) {
    const double d = std::min(dt_snap, tf - sim.state().time());
    steps += sim.advance(d, false).steps;
    integrals.record(sim.state());
    if (vtk) write_solution_vtk((r.out / numbered("solution", snap++)).string(), sim.state(), sim.law());
  }
  json summary{{"final_time", sim.state().time()}, {"steps", steps},
               {"dofs", sim.mesh().dof_count(sim.components())}};
  const int comp = observed_component(spec);
  if (exact_solution(spec, spec.domain_min, 0.0)) {
    const double t = sim.state().time();
    const double err = l2_error(
        sim.state(), [&](const Vec2& x) { return (*exact_solution(spec, x, t))[comp]; }, comp,
        spec.analysis_region);
    summary["l2_error"] = err;
    std::cout << "L2 error at t=" << t << ": " << err << '\n';
  }
  std::ofstream((r.out / "summary.json")) << summary.dump(2) << '\n';
  std::cout << "steps " << steps << ", snapshots " << snap << ", output " << r.out.string() << '\n';
  return ok;
}

int cmd_train(const Resolved& r, bool resume) {
  const TrainResult res = train(r.env, r.train, r.out.string(), resume, [](const IterationLog& l) {
    std::cout << "iteration " << l.iteration << "  env steps " << l.env_steps << "  reward "
              << l.batch_mean_reward << "  policy loss " << l.policy_loss << "  value loss "
              << l.value_loss << '\n';
  });
  std::cout << "best batch reward " << res.best_reward << " at iteration " << res.best_iteration
            << '\n';
  return ok;
}

SweepOptions sweep_options(const Resolved& r, int workers) {
  const json& ev = r.config["eval"];
  SweepOptions o;
  const std::string policy = ev["policy"];
  if (policy == "threshold") {
    o.family = PolicyFamily::threshold;
  } else if (policy == "dynamo") {
    o.family = PolicyFamily::network;
    const std::string path = ev["checkpoint"];
    if (path.empty()) throw ConfigError("eval.checkpoint is required for the dynamo policy");
    o.weights = std::make_shared<const PolicyWeights>(load_checkpoint(path).weights);
  } else {
    throw ConfigError("eval.policy must be \"threshold\" or \"dynamo\"");
  }
  o.cost_mode = ev["cost_mode"] == "per_step" ? CostMode::per_step : CostMode::per_interval;
  o.seed = r.config["seed"];
  o.workers = workers > 0 ? workers : ev["workers"].get<int>();
  return o;
}

int report_failures(const std::vector<RunRecord>& recs) {
  int failed = 0;
  for (const auto& rec : recs) failed += rec.failed;
  if (failed) std::cerr << failed << " run(s) failed\n";
  return failed ? solver_error : ok;
}

int cmd_eval(const Resolved& r, int workers) {
  const SweepOptions o = sweep_options(r, workers);
  const auto params = r.config["eval"]["parameters"].get<std::vector<double>>();
  BaselineCache cache;
  EnvConfig env = r.env;
  env.problem.reset();
  const auto recs = pareto_sweep(r.problem, env, params, o, cache);
  write_sweep_csv((r.out / "records.csv").string(), recs);
  for (const auto& rec : recs) {
    std::cout << rec.policy << " " << rec.parameter << "  c=" << rec.cost << "  e=" << rec.error
              << "  efficiency=" << rec.efficiency << '\n';
  }
  return report_failures(recs);
}

int cmd_sweep(const Resolved& r, int workers) {
  SweepOptions o = sweep_options(r, workers);
  const auto params = r.config["eval"]["parameters"].get<std::vector<double>>();
  const int n = r.config["eval"]["instances"];
  const std::uint64_t seed = r.config["seed"];
  BaselineCache cache;
  EnvConfig env = r.env;
  env.problem.reset();
  std::vector<RunRecord> all;
  std::map<double, std::pair<double, int>> eff;
  for (int k = 0; k < n; ++k) {
    std::mt19937_64 rng(seed + k);
    const ProblemSpec p = r.sampled ? sample(r.problem.family, rng) : r.problem;
    o.seed = seed + k;
    for (const auto& rec : pareto_sweep(p, env, params, o, cache)) {
      all.push_back(rec);
      if (!rec.failed) {
        eff[rec.parameter].first += rec.efficiency;
        ++eff[rec.parameter].second;
      }
    }
  }
  write_sweep_csv((r.out / "sweep.csv").string(), all);
  std::ofstream s(r.out / "summary.csv");
  if (!s) throw IoError("cannot write summary.csv");
  s.precision(17);
  s << "parameter,mean_efficiency,runs\n";
  for (const auto& [param, acc] : eff) {
    s << param << ',' << acc.first / acc.second << ',' << acc.second << '\n';
    std::cout << "parameter " << param << "  mean efficiency " << acc.first / acc.second << " over "
              << acc.second << " runs\n";
  }
  return report_failures(all);
}

int cmd_riemann(Resolved r, int case_id) {
  if (case_id > 0) r.problem = riemann_case(case_id);
  if (r.problem.family != Family::riemann_2d) throw ConfigError("riemann needs problem.family riemann_2d");
  EnvConfig env = r.env;
  env.family = Family::riemann_2d;
  env.problem = r.problem;
  const json& ev = r.config["eval"];
  const std::string policy = ev["policy"];
  MarkingPolicy marking;
  if (policy == "threshold") {
    const auto params = ev["parameters"].get<std::vector<double>>();
    if (params.empty()) throw ConfigError("eval.parameters must hold the threshold");
    marking = threshold_policy(params.front());
  } else if (policy == "dynamo") {
    const std::string path = ev["checkpoint"];
    if (path.empty()) throw ConfigError("eval.checkpoint is required for the dynamo policy");
    marking = network_policy(std::make_shared<const PolicyWeights>(load_checkpoint(path).weights));
  } else if (policy == "coarse" || policy == "fine") {
    marking = uniform_policy(parse_action(policy));
  } else {
    throw ConfigError("eval.policy must be threshold, dynamo, coarse or fine");
  }
  write_config(r);
  AmrEnv e(env);
  e.reset(r.problem);
  const ConservationLaw law = law_for(r.problem);
  EpisodeTrace trace;
  int snap = 0;
  const bool vtk = r.config["output"]["vtk"];
  if (vtk) write_solution_vtk((r.out / numbered("solution", snap++)).string(), e.simulation().state(), law);
  bool failed = false;
  while (e.active()) {
    const auto actions = marking(e);
    const StepResult s = e.step(actions);
    trace.record(s, actions);
    if (s.diagnostics.failed) {
      failed = true;
      std::cerr << s.diagnostics.failure << '\n';
    }
    if (vtk) {
      write_solution_vtk((r.out / numbered("solution", snap++)).string(), e.simulation().state(), law);
      write_mesh_vtk((r.out / numbered("mesh", snap - 1)).string(), e.simulation().mesh());
    }
  }
  trace.write_csv((r.out / "trace.csv").string());
  if (failed) {
    std::cerr << "case " << r.problem.case_id << " stopped by a solver failure\n";
    return solver_error;
  }
  std::cout << "case " << r.problem.case_id << " reached t=" << e.simulation().state().time()
            << " with " << e.simulation().mesh().dof_count(4) << " DOFs\n";
  return ok;
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamo: learned refinement policies for DG simulations"};
  app.require_subcommand(1);
  std::string config_path, out;
  int workers = 0, case_id = 0;
  bool resume = false;
  long long seed = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run configuration");
    sub->add_option("-o,--out", out, "output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "random seed (overrides seed)");
  };
  auto* solve = app.add_subcommand("solve", "fixed-mesh simulation with VTK snapshots");
  auto* trn = app.add_subcommand("train", "Independent PPO training");
  auto* eval = app.add_subcommand("eval", "evaluate a policy over a parameter list on one instance");
  auto* sweep = app.add_subcommand("sweep", "evaluation over several sampled instances");
  auto* riem = app.add_subcommand("riemann", "canonical four-quadrant Riemann case");
  for (auto* s : {solve, trn, eval, sweep, riem}) add_common(s);
  trn->add_flag("--resume", resume, "continue from policy_latest.ck in the output directory");
  for (auto* s : {eval, sweep}) s->add_option("--workers", workers, "parallel evaluation runs");
  riem->add_option("--case", case_id, "case id (3, 4, 6, 12, 15, 17)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : config_error;
  }

  try {
    json user = read_config(config_path);
    if (!out.empty()) user["output"]["directory"] = out;
    if (seed >= 0) user["seed"] = seed;
    if (riem->parsed()) {
      user["problem"]["family"] = "riemann_2d";
      if (case_id > 0) user["problem"]["riemann_case"] = case_id;
      if (!user.contains("mesh") || !user["mesh"].contains("mode")) user["mesh"]["mode"] = "h";
    }
    Resolved r;
    try {
      r = resolve(user);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    } catch (const json::exception& e) {
      throw ConfigError(e.what());
    }
    if (riem->parsed()) return cmd_riemann(r, case_id);
    write_config(r);
    if (solve->parsed()) return cmd_solve(r);
    if (trn->parsed()) return cmd_train(r, resume);
    if (eval->parsed()) return cmd_eval(r, workers);
    if (sweep->parsed()) return cmd_sweep(r, workers);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return io_error;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return io_error;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return solver_error;
  } catch (const InadmissibleState& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return solver_error;
  } catch (const DegenerateThreshold& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return solver_error;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return solver_error;
  }
  return ok;
}
