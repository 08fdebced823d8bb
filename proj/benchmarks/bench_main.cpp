#include <benchmark/benchmark.h>

#include <random>

#include "dynamo/dynamo.hpp"

using namespace dynamo;

namespace {

std::shared_ptr<const Mesh> mixed_mesh(const ProblemSpec& s, int n, RefineMode mode, int p) {
  std::vector<Action> a(static_cast<std::size_t>(n) * n, Action::coarse);
  for (std::size_t i = 0; i < a.size(); i += 3) a[i] = Action::fine;
  return std::make_shared<const Mesh>(
      Mesh::cartesian(n, n, s.domain_min, s.domain_max, mode, p).apply_actions(a));
}

void BM_residual_advection(benchmark::State& st) {
  const ProblemSpec s = example_problem(Family::adv_ring);
  const auto mesh = mixed_mesh(s, static_cast<int>(st.range(0)), RefineMode::p, 2);
  const DgOperator op(law_for(s), mesh, solver_settings_for(s));
  const SolutionState u = project_ic(initial_condition(s), mesh, 1);
  Coefficients du = u.coefficients();
  for (auto _ : st) {
    op.residual(u.coefficients(), du);
    benchmark::DoNotOptimize(du);
  }
  st.counters["dofs"] = static_cast<double>(mesh->dof_count(1));
}
BENCHMARK(BM_residual_advection)->Arg(16)->Arg(32);

void BM_residual_euler(benchmark::State& st) {
  const ProblemSpec s = example_problem(Family::euler_pressure_pulse);
  const auto mesh = mixed_mesh(s, static_cast<int>(st.range(0)), RefineMode::h, 1);
  const DgOperator op(law_for(s), mesh, solver_settings_for(s));
  const SolutionState u = project_ic(initial_condition(s), mesh, 4);
  Coefficients du = u.coefficients();
  for (auto _ : st) {
    op.residual(u.coefficients(), du);
    benchmark::DoNotOptimize(du);
  }
}
BENCHMARK(BM_residual_euler)->Arg(16)->Arg(32);

void BM_projection_estimator(benchmark::State& st) {
  const ProblemSpec s = example_problem(Family::adv_ring);
  const auto mesh = mixed_mesh(s, 32, RefineMode::p, 2);
  const SolutionState u = project_ic(initial_condition(s), mesh, 1);
  for (auto _ : st) benchmark::DoNotOptimize(p_projection_estimate(u, 0));
}
BENCHMARK(BM_projection_estimator);

void BM_jump_estimator(benchmark::State& st) {
  const ProblemSpec s = example_problem(Family::euler_density_pulse);
  const auto mesh = mixed_mesh(s, 32, RefineMode::h, 1);
  const SolutionState u = project_ic(initial_condition(s), mesh, 4);
  ReconstructionCache cache;
  const bool cached = st.range(0) != 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(jump_reconstruction_estimate(u, 0, {}, cached ? &cache : nullptr));
  }
}
BENCHMARK(BM_jump_estimator)->Arg(0)->Arg(1);

void BM_policy_forward(benchmark::State& st) {
  std::mt19937_64 rng(1);
  const ObservationLayout layout{2, 2, 2};
  const PolicyWeights w = init_weights(layout, static_cast<int>(st.range(0)), rng);
  std::normal_distribution<double> g;
  Eigen::MatrixXd obs(1024, layout.size());
  for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = g(rng);
  for (auto _ : st) benchmark::DoNotOptimize(policy_forward(w, obs));
}
BENCHMARK(BM_policy_forward)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
