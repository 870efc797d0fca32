#include <benchmark/benchmark.h>

#include "fedfim/data.hpp"
#include "fedfim/federation.hpp"
#include "fedfim/fim_lbfgs.hpp"
#include "fedfim/model.hpp"

using namespace fedfim;

namespace {

DenseVector gaussian(std::size_t n, RandomStream& rng) {
  DenseVector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// d = 7850 matches a 784-input, 10-class softmax model.
void BM_TwoLoopDirection(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  const std::size_t m = static_cast<std::size_t>(state.range(1));
  RandomStream rng(RngSeed{1, 0});
  LbfgsMemory mem(m);
  for (std::size_t i = 0; i < m; ++i) {
    DenseVector s = gaussian(d, rng), y(d);
    for (std::size_t j = 0; j < d; ++j) y[j] = (0.5 + rng.uniform()) * s[j];
    mem.push(std::move(s), std::move(y), 1e-8);
  }
  const DenseVector g = gaussian(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(two_loop_direction(mem, g));
}
BENCHMARK(BM_TwoLoopDirection)->Args({200, 10})->Args({7850, 10})->Args({7850, 20});

void BM_PerSampleGradients(benchmark::State& state) {
  const std::size_t b = static_cast<std::size_t>(state.range(0));
  Dataset ds = synth_logistic(b, 784, 10, 5.0, 1, streams::kSynthTrain);
  RandomStream init(RngSeed{1, streams::kInit});
  ParameterVector w = init_parameters(ModelSpec::softmax_regression(784, 10), init);
  for (auto _ : state) benchmark::DoNotOptimize(per_sample_gradients(w, ds.batch()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b));
}
BENCHMARK(BM_PerSampleGradients)->Arg(15)->Arg(100);

void BM_Round(benchmark::State& state) {
  const auto opt = static_cast<OptimizerKind>(state.range(0));
  Dataset train = synth_logistic(2000, 20, 10, 5.0, 7, streams::kSynthTrain);
  const ModelSpec spec = ModelSpec::softmax_regression(20, 10);
  PartitionPlan plan = partition_iid(train, 20, 7);
  RoundConfig cfg;
  cfg.optimizer = opt;
  cfg.participation = 1.0;
  cfg.batch_size = opt == OptimizerKind::FimLbfgs ? 0 : 15;
  cfg.learning_rate = opt == OptimizerKind::FimLbfgs ? 0.25 : 0.05;
  RandomStream init(RngSeed{1, streams::kInit}), sampler(RngSeed{1, streams::kClientSampling});
  ServerState server = make_server(init_parameters(spec, init), cfg);
  auto clients = make_clients(plan, {}, 1);
  for (auto _ : state) {
    if (opt == OptimizerKind::FimLbfgs) {
      benchmark::DoNotOptimize(server_fim_lbfgs_round(server, clients, train, cfg, sampler));
    } else {
      benchmark::DoNotOptimize(server_fedavg_round(server, clients, train, cfg, sampler));
    }
  }
}
BENCHMARK(BM_Round)
    ->Arg(static_cast<int>(OptimizerKind::FimLbfgs))
    ->Arg(static_cast<int>(OptimizerKind::FedAvgSgd))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
