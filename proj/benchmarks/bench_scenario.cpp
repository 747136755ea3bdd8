#include <benchmark/benchmark.h>

#include "hydroscen/assignment.hpp"
#include "hydroscen/checkpoint.hpp"
#include "hydroscen/random.hpp"
#include "hydroscen/scenario.hpp"
#include "hydroscen/synth.hpp"

namespace {

using namespace hydroscen;

// Argument: matrix size.
void BM_AssignmentSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(5);
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(assignment_solve(cost));
}
BENCHMARK(BM_AssignmentSolve)->RangeMultiplier(2)->Range(8, 128)->Arg(30);

struct GenerateSetup {
  Checkpoint model;
  EnsembleSet ensemble;

  explicit GenerateSetup(int n_traj) {
    SynthSpec spec = SynthSpec::defaults(GridShape{4, 4}, 6, 120);
    spec.ensemble = SynthSpec::Ensemble{};
    spec.ensemble->n_traj = n_traj;
    const SynthData data = synth_generate(spec, 7);
    ensemble = *data.ensemble;
    model.norm = compute_norm_stats(data.forcing);
    model.plants = data.history.plants;
    model.quantile_levels = QuantileSet::default_levels().levels();
    model.params = init_model(ModelConfig{16, 16, 32, 64, 6}, 8);
  }
};

// Arguments: trajectories, scenarios per trajectory.
void BM_Generate(benchmark::State& state) {
  const GenerateSetup setup(static_cast<int>(state.range(0)));
  const int n_scen = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(generate(setup.model, setup.ensemble, n_scen, 11));
}
BENCHMARK(BM_Generate)->Args({51, 30})->Unit(benchmark::kMillisecond);

// Arguments: trajectories, scenarios per trajectory.
void BM_Reorder(benchmark::State& state) {
  const GenerateSetup setup(static_cast<int>(state.range(0)));
  const GenerateResult gen = generate(setup.model, setup.ensemble, static_cast<int>(state.range(1)), 11);
  const int plants = static_cast<int>(setup.model.plants.size());
  const int hidden = setup.model.params.config.hidden_dim;
  Rng rng(12);
  Eigen::MatrixXd y(200, plants), h(200, hidden);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 100.0 + 10.0 * rng.normal();
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  const SerialModel sm = fit_serial_regression(y, h);
  for (auto _ : state) benchmark::DoNotOptimize(reorder(gen.scenarios, gen.hidden, sm));
}
BENCHMARK(BM_Reorder)->Args({51, 30})->Unit(benchmark::kMillisecond);

}  // namespace
