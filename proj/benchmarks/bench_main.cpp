#include <benchmark/benchmark.h>

#include <random>

#include "dmssn/diagnostics.hpp"
#include "dmssn/homogenization.hpp"
#include "dmssn/metrics.hpp"
#include "dmssn/training.hpp"

using namespace dmssn;

namespace {

Tensor noise(std::vector<int> shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = n(rng);
  return t;
}

HyperCube scene(int size, int bands) {
  SceneRecipe r;
  r.height = r.width = size;
  r.bands = bands;
  return generate_synthetic_scene(random_scene_spec(r, 3)).first;
}

ModelConfig desk_model() {
  ModelConfig m;
  m.schedule = {32, 24, 16, 8};
  m.msst.in_channels = 8;
  m.msst.heads_per_group = 1;
  m.msst.ffn_ratio = 2;
  m.msst.stages = {{1, 16, 2, 4}, {1, 16, 2, 2}, {1, 32, 2, 1}, {1, 32, 2, 1}};
  m.fpn.fused_channels = 16;
  return m;
}

}  // namespace

static void BM_Conv3x3(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Var x = constant(noise({n, n, 16}, 1));
  const Var w = constant(noise({16, 3, 3, 16}, 2));
  const Var b = constant(Tensor({16}));
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, 1, 1).value().size());
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(32)->Arg(64);

static void BM_Attention(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Var q = constant(noise({n, n, 16}, 1));
  const Var k = constant(noise({n / 4, n / 4, 16}, 2));
  const Var v = constant(noise({n / 4, n / 4, 16}, 3));
  for (auto _ : state) benchmark::DoNotOptimize(ops::attention(q, k, v, 2).value().size());
}
BENCHMARK(BM_Attention)->Arg(16)->Arg(32);

static void BM_GmmFit(benchmark::State& state) {
  const HyperCube c = normalize_cube(scene(32, 32));
  const Tensor px = pixel_matrix(c);
  GmmOptions o;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gmm(px, static_cast<int>(state.range(0)), o).weights.size());
}
BENCHMARK(BM_GmmFit)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_TeacherForward(benchmark::State& state) {
  TeacherAutoencoder t({32, 24, 16, 8}, 1);
  const Var g = constant(noise({32, 32, 32}, 4));
  for (auto _ : state) benchmark::DoNotOptimize(t.forward(g).e.value().size());
}
BENCHMARK(BM_TeacherForward)->Unit(benchmark::kMillisecond);

static void BM_StudentForward(benchmark::State& state) {
  StudentAutoencoder s({32, 24, 16, 8}, 1);
  const Var g = constant(noise({32, 32, 32}, 4));
  for (auto _ : state) benchmark::DoNotOptimize(s.forward(g).e.value().size());
}
BENCHMARK(BM_StudentForward)->Unit(benchmark::kMillisecond);

static void BM_DmssnInference(benchmark::State& state) {
  const DmssnModel m(desk_model(), 1);
  const Tensor g = noise({64, 64, 32}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(predict(m, g).values.size());
}
BENCHMARK(BM_DmssnInference)->Unit(benchmark::kMillisecond);

static void BM_DmssnTrainStep(benchmark::State& state) {
  const DmssnModel m(desk_model(), 1);
  const TeacherAutoencoder t(desk_model().schedule, 2);
  const Var g = constant(noise({64, 64, 32}, 6));
  SaliencyMask mask(64, 64);
  for (int r = 16; r < 48; ++r)
    for (int c = 16; c < 48; ++c) mask.at(r, c) = 1.0;
  const Tensor target = to_tensor(mask);
  for (auto _ : state) {
    const auto out = m.forward(g);
    Var loss = ops::add(ops::add(hs_loss(out.student.d, g), sod_loss(out.saliency, target)),
                        distillation_loss(t.forward(g), out.student));
    backward(loss);
    zero_grads(m.parameters());
  }
}
BENCHMARK(BM_DmssnTrainStep)->Unit(benchmark::kMillisecond);

static void BM_CurveMetrics(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  SaliencyMask y(64, 64), t(64, 64);
  for (std::size_t i = 0; i < y.size(); ++i) y.values[i] = u(rng), t.values[i] = u(rng) < 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(curve_metrics(y, t, 255).auc);
}
BENCHMARK(BM_CurveMetrics);
BENCHMARK_MAIN();
