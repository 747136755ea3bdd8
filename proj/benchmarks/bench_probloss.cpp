#include <benchmark/benchmark.h>

#include "hydroscen/probloss.hpp"
#include "hydroscen/random.hpp"

namespace {

using namespace hydroscen;

void BM_Erfinv(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> xs(4096);
  for (auto& x : xs) x = 2.0 * rng.uniform() - 1.0;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(erfinv(xs[i++ & 4095]));
}
BENCHMARK(BM_Erfinv);

void BM_NormalQuantile(benchmark::State& state) {
  Rng rng(2);
  std::vector<double> qs(4096);
  for (auto& q : qs) q = 1e-6 + (1.0 - 2e-6) * rng.uniform();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(std_normal_quantile(qs[i++ & 4095]));
}
BENCHMARK(BM_NormalQuantile);

void BM_Ln3Sample(benchmark::State& state) {
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(ln3_sample(4.0, 0.3, 10.0, rng));
}
BENCHMARK(BM_Ln3Sample);

// Argument: months; four plants and the default levels.
void BM_PinballLoss(benchmark::State& state) {
  const int months = static_cast<int>(state.range(0));
  Rng rng(4);
  DistSeq d = DistSeq::zeros(months, 4);
  Eigen::MatrixXd obs(months, 4);
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    d.mu.data()[i] = 4.0 + 0.3 * rng.normal();
    d.sigma.data()[i] = 0.2 + 0.3 * rng.uniform();
    d.theta.data()[i] = 5.0 * rng.uniform();
    obs.data()[i] = ln3_sample(d.mu.data()[i], d.sigma.data()[i], d.theta.data()[i], rng);
  }
  const QuantileSet qs = QuantileSet::default_levels();
  for (auto _ : state) benchmark::DoNotOptimize(pinball_loss(d, obs, qs));
  state.SetItemsProcessed(state.iterations() * months * 4);
}
BENCHMARK(BM_PinballLoss)->Arg(120)->Arg(516);

}  // namespace
