#include <benchmark/benchmark.h>

#include "cagnet/gradcheck.hpp"
#include "cagnet/metrics.hpp"
#include "cagnet/model.hpp"

using namespace cagnet;

namespace {

Tensor random_tensor(const Shape& sh, Rng& rng) {
  Tensor t(sh);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(1);
  ParamStore params;
  ConvSpec pad1;
  pad1.pad_h = pad1.pad_w = 1;
  const ConvLayer conv = ConvLayer::make("c", c, c, 3, 3, pad1);
  conv.init(params, rng);
  const Tensor x = random_tensor(Shape(1, c, 60, 60), rng);
  for (auto _ : state) {
    Tape tape;
    Forward f{tape, params};
    benchmark::DoNotOptimize(tape.value(conv.forward(f, tape.leaf(x))));
  }
}
BENCHMARK(BM_Conv3x3)->Arg(64)->Arg(256);

// The factorised large kernel against the dense one it stands in for.
void BM_LargeKernelFactorised(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  Rng rng(2);
  ParamStore params;
  const GcnBlock gcn = GcnBlock::make("g", k, 64, 8);
  gcn.init(params, rng);
  const Tensor x = random_tensor(Shape(1, 64, 60, 60), rng);
  for (auto _ : state) {
    Tape tape;
    Forward f{tape, params};
    benchmark::DoNotOptimize(tape.value(gcn.forward(f, tape.leaf(x))));
  }
}
BENCHMARK(BM_LargeKernelFactorised)->Arg(7)->Arg(15);

void BM_LargeKernelDense(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  Rng rng(3);
  ParamStore params;
  ConvSpec pad;
  pad.pad_h = pad.pad_w = k / 2;
  const ConvLayer conv = ConvLayer::make("c", 64, 8, k, k, pad);
  conv.init(params, rng);
  const Tensor x = random_tensor(Shape(1, 64, 60, 60), rng);
  for (auto _ : state) {
    Tape tape;
    Forward f{tape, params};
    benchmark::DoNotOptimize(tape.value(conv.forward(f, tape.leaf(x))));
  }
}
BENCHMARK(BM_LargeKernelDense)->Arg(7)->Arg(15);

void BM_MfemForward(benchmark::State& state) {
  Rng rng(4);
  ParamStore params, buffers;
  const Mfem mfem = Mfem::make("m", MfemVariant::gcn, 128, 8, NormMode::batch);
  mfem.init(params, buffers, rng);
  const Tensor x = random_tensor(Shape(1, 128, 60, 60), rng);
  for (auto _ : state) {
    Tape tape;
    Forward f{tape, params, &buffers};
    benchmark::DoNotOptimize(tape.value(mfem.forward(f, tape.leaf(x))));
  }
}
BENCHMARK(BM_MfemForward);

void BM_ToyModelForward(benchmark::State& state) {
  CagnetConfig cfg;
  cfg.backbone = BackboneKind::toy;
  cfg.toy_width = 16;
  cfg.nf = 4;
  cfg.input_size = 64;
  Model model = Model::build(cfg, 5);
  Rng rng(6);
  Tensor x(Shape(1, 3, 64, 64));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x));
}
BENCHMARK(BM_ToyModelForward);

void BM_ToyModelBackward(benchmark::State& state) {
  CagnetConfig cfg;
  cfg.backbone = BackboneKind::toy;
  cfg.toy_width = 16;
  cfg.nf = 4;
  cfg.input_size = 64;
  Model model = Model::build(cfg, 7);
  Rng rng(8);
  Tensor x(Shape(1, 3, 64, 64));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.0, 1.0);
  for (auto _ : state) {
    Tape tape;
    Forward f{tape, model.params(), &model.buffers(), /*train=*/true};
    const VarId out = model.forward(f, tape.leaf(x));
    benchmark::DoNotOptimize(tape.backward(mean_all(tape, out)));
  }
}
BENCHMARK(BM_ToyModelBackward);

void BM_PrCurve(benchmark::State& state) {
  Rng rng(9);
  const Shape sh(1, 1, 320, 320);
  Tensor s(sh), g(sh);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform(0.0, 1.0);
    g[i] = rng.coin() ? 1.0 : 0.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(pr_curve(s, g));
}
BENCHMARK(BM_PrCurve);

void BM_WeightedF(benchmark::State& state) {
  Rng rng(10);
  const int hw = 320;
  Tensor s(Shape(1, 1, hw, hw)), g(Shape(1, 1, hw, hw));
  for (int y = 0; y < hw; ++y)
    for (int x = 0; x < hw; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * hw + x;
      g[i] = (y > 100 && y < 220 && x > 80 && x < 240) ? 1.0 : 0.0;
      s[i] = 0.8 * g[i] + rng.uniform(0.0, 0.2);
    }
  for (auto _ : state) benchmark::DoNotOptimize(weighted_f(s, g));
}
BENCHMARK(BM_WeightedF);

void BM_DistanceTransform(benchmark::State& state) {
  Rng rng(11);
  const int hw = 480;
  std::vector<std::uint8_t> fg(static_cast<std::size_t>(hw) * hw, 0);
  for (int i = 0; i < 50; ++i) fg[rng.below(fg.size())] = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(distance_transform(fg, hw, hw));
}
BENCHMARK(BM_DistanceTransform);

}  // namespace

BENCHMARK_MAIN();
