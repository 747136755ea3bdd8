#include <algorithm>

#include <benchmark/benchmark.h>

#include "hydroscen/netcore.hpp"
#include "hydroscen/random.hpp"

namespace {

using namespace hydroscen;

ModelInput make_input(int months, int cells, std::uint64_t seed) {
  Rng rng(seed);
  ModelInput in;
  in.precip.resize(months, cells);
  in.temp.resize(months, cells);
  for (int t = 0; t < months; ++t) {
    in.months.push_back(YearMonth{1980, 1}.plus(t));
    for (int c = 0; c < cells; ++c) {
      in.precip(t, c) = std::max(0.0, rng.normal());
      in.temp(t, c) = rng.normal();
    }
  }
  return in;
}

// Arguments: months, grid cells, hidden size.
void BM_Forward(benchmark::State& state) {
  const int months = static_cast<int>(state.range(0)), cells = static_cast<int>(state.range(1));
  const int hidden = static_cast<int>(state.range(2));
  const ModelParams model = init_model(ModelConfig{cells, cells, hidden / 2, hidden, 4}, 1);
  const ModelInput input = make_input(months, cells, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, input));
  state.SetItemsProcessed(state.iterations() * months);
}
BENCHMARK(BM_Forward)->Args({120, 64, 16})->Args({516, 64, 64})->Args({516, 256, 64});

void BM_ForwardBackward(benchmark::State& state) {
  const int months = static_cast<int>(state.range(0)), cells = static_cast<int>(state.range(1));
  const int hidden = static_cast<int>(state.range(2));
  const ModelParams model = init_model(ModelConfig{cells, cells, hidden / 2, hidden, 4}, 1);
  const ModelInput input = make_input(months, cells, 2);
  ForwardOptions opt;
  opt.mode = Mode::train;
  opt.dropout_rate = 0.1;
  opt.dropout_seed = 3;
  DistSeq upstream = DistSeq::zeros(months, 4);
  upstream.mu.setConstant(1.0);
  upstream.sigma.setConstant(0.5);
  upstream.theta.setConstant(0.1);
  for (auto _ : state) {
    const ForwardPass pass = forward(model, input, opt);
    benchmark::DoNotOptimize(backward(model, pass, upstream));
  }
  state.SetItemsProcessed(state.iterations() * months);
}
BENCHMARK(BM_ForwardBackward)->Args({120, 64, 16})->Args({516, 64, 64})->Args({516, 256, 64});

}  // namespace
