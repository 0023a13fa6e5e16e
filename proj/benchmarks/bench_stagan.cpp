#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "stagan/branches.hpp"
#include "stagan/fusion.hpp"
#include "stagan/metrics.hpp"
#include "stagan/networks.hpp"

namespace {

torch::Tensor uniform(torch::IntArrayRef shape, std::uint64_t seed) {
  torch::manual_seed(seed);
  return torch::rand(shape) * 2 - 1;
}

void BM_GeneratorForward(benchmark::State& state) {
  auto g = stagan::build_generator(stagan::GeneratorConfig::desk(), 1);
  const auto x = uniform({state.range(0), 3, 64, 64}, 2);
  const auto s = uniform({state.range(0), 3, 64, 64}, 3);
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(g->forward(x, s).image);
}
BENCHMARK(BM_GeneratorForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_AllBranches(benchmark::State& state) {
  const auto t = state.range(0);
  auto fn = stagan::as_generator_fn(stagan::build_generator(stagan::GeneratorConfig{}, 1));
  const auto x = uniform({1, t, 3, 64, 64}, 4);
  const auto s = uniform({1, t, 3, 64, 64}, 5);
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(stagan::run_all_branches(fn, x, s));
}
BENCHMARK(BM_AllBranches)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_Fuse(benchmark::State& state) {
  stagan::FusionConfig cfg;
  cfg.image_size = 64;
  auto net = stagan::build_fusion_net(cfg, 1);
  stagan::GenerationBundle bundle;
  for (auto br : stagan::kAllBranches) {
    stagan::GeneratedSequence seq;
    seq.frames = uniform({1, 5, 3, 64, 64}, 10 + static_cast<std::uint64_t>(br));
    seq.tag = br;
    bundle.sequences.push_back(seq);
  }
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(stagan::fuse(net, bundle));
}
BENCHMARK(BM_Fuse)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const auto size = state.range(0);
  const auto a = (uniform({3, size, size}, 20) + 1) / 2;
  const auto b = (uniform({3, size, size}, 21) + 1) / 2;
  for (auto _ : state) benchmark::DoNotOptimize(stagan::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

void BM_Fid(benchmark::State& state) {
  const auto dim = state.range(0);
  torch::manual_seed(30);
  const auto a = torch::randn({256, dim}, torch::kFloat64);
  const auto b = torch::randn({256, dim}, torch::kFloat64) + 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(stagan::fid(a, b));
}
BENCHMARK(BM_Fid)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
