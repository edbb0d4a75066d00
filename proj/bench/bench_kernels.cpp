// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <vector>

#include "gjam/dataio.hpp"
#include "gjam/nnet/conv.hpp"
#include "gjam/nnet/network.hpp"
#include "gjam/rng.hpp"

using namespace gjam;

namespace {

nnet::Conv2d make_conv(int cin, int cout) {
  nnet::Conv2d conv({cin, cout, 3, 3, 1, 1});
  Rng rng(1);
  for (double& w : conv.weight) w = rng.normal() * 0.1;
  for (double& b : conv.bias) b = rng.normal() * 0.1;
  conv.scale.assign(static_cast<std::size_t>(cout), 1.0);
  return conv;
}

nnet::Tensor make_input(int n, int c, int h, int w) {
  nnet::Tensor x(n, c, h, w);
  Rng rng(2);
  for (double& v : x.v) v = rng.normal();
  return x;
}

void BM_ConvGemm(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const nnet::Conv2d conv = make_conv(c, c);
  const nnet::Tensor x = make_input(8, c, 64, 34);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
}
BENCHMARK(BM_ConvGemm)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ConvReference(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const nnet::Conv2d conv = make_conv(c, c);
  const nnet::Tensor x = make_input(8, c, 64, 34);
  for (auto _ : state)
    benchmark::DoNotOptimize(nnet::conv2d_reference(conv.shape(), conv.weight, conv.bias, conv.scale, x));
}
BENCHMARK(BM_ConvReference)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

GenerationPlan small_plan() {
  GenerationPlan plan;
  plan.n_t = 8;
  PlanRow row;
  row.scenarios = {parse_scenario("1a"), parse_scenario("4")};
  for (int c = 0; c < kNumCategories; ++c) row.categories.push_back(static_cast<Category>(c));
  row.powers_dbm = {8};
  row.count = 2;
  plan.rows.push_back(row);
  return plan;
}

void BM_Synthesize(benchmark::State& state) {
  const GenerationPlan plan = small_plan();
  for (auto _ : state) benchmark::DoNotOptimize(synthesize(plan, 3));
}
BENCHMARK(BM_Synthesize)->Unit(benchmark::kMillisecond);

void BM_SynthesizeSerial(benchmark::State& state) {
  const GenerationPlan plan = small_plan();
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_serial(plan, 3));
}
BENCHMARK(BM_SynthesizeSerial)->Unit(benchmark::kMillisecond);

struct PredictFixture {
  std::vector<SnapshotRecord> records = synthesize(small_plan(), 4);
  std::vector<const Spectrogram*> grids;
  nnet::Network net{nnet::Architecture{}, {{"type", nnet::HeadKind::Classification, kNumCategories, 1.0}}, 5};
  PredictFixture() {
    for (const SnapshotRecord& r : records) grids.push_back(&r.spectrogram);
    net.calibrate(nnet::to_tensor(grids));
  }
};

void BM_Predict(benchmark::State& state) {
  static const PredictFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(nnet::predict(f.net, f.grids, 0, 8));
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

void BM_PredictSerial(benchmark::State& state) {
  static const PredictFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(nnet::predict_serial(f.net, f.grids, 8));
}
BENCHMARK(BM_PredictSerial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
