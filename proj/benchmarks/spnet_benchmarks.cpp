#include <benchmark/benchmark.h>

#include <random>

#include "spnet/conv_geometry.hpp"
#include "spnet/neighborhood.hpp"
#include "spnet/network.hpp"
#include "spnet/sampling.hpp"
#include "spnet/spconv.hpp"
#include "spnet/synthetic.hpp"

namespace {

using namespace spnet;

std::vector<Vec3> cube_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

void BM_RadiusSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pts = cube_points(n, 1);
  const double r = std::cbrt(20.0 / (4.18879 * static_cast<double>(n)));
  for (auto _ : state) benchmark::DoNotOptimize(radius_search(pts, pts, r));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_RadiusSearch)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_PoissonDisk(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pts = cube_points(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(poisson_disk_sample(pts, 0.03, 0));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_PoissonDisk)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

struct ConvFixture {
  explicit ConvFixture(AttentionVariant variant, std::size_t channels) {
    SyntheticSceneSpec spec;
    const PointCloud cloud = generate_scene(spec);
    positions = cloud.positions;
    const double v = 0.04;
    const std::vector<double> radii{1.5 * v, 3.0 * v};
    layout = build_layout(3, 14, radii, v, 42);
    geometry = build_conv_geometry(layout, positions, positions, radius_search(positions, positions, 4 * v));
    std::mt19937_64 rng(3);
    AttentionConfig att;
    att.variant = variant;
    att.sigma = v;
    conv = SPConv<float>("bench", layout, channels, channels, att, {}, rng);
    x = Matrix<float>::Random(static_cast<Eigen::Index>(positions.size()), static_cast<Eigen::Index>(channels));
    attrs = Matrix<float>::Random(static_cast<Eigen::Index>(positions.size()), 6);
  }
  std::vector<Vec3> positions;
  KernelLayout layout;
  ConvGeometry geometry;
  SPConv<float> conv;
  Matrix<float> x, attrs;
};

void BM_SPConvForward(benchmark::State& state) {
  ConvFixture f(static_cast<AttentionVariant>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.conv.forward(f.x, f.geometry, {&f.attrs, &f.attrs}, NormMode::train));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.positions.size()));
}
BENCHMARK(BM_SPConvForward)
    ->ArgsProduct({{0, 1, 3}, {16, 64}})
    ->ArgNames({"attention", "channels"})
    ->Unit(benchmark::kMillisecond);

void BM_SPConvBackward(benchmark::State& state) {
  ConvFixture f(static_cast<AttentionVariant>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const Matrix<float> y = f.conv.forward(f.x, f.geometry, {&f.attrs, &f.attrs}, NormMode::train);
  const Matrix<float> dy = Matrix<float>::Random(y.rows(), y.cols());
  for (auto _ : state) benchmark::DoNotOptimize(f.conv.backward(dy));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.positions.size()));
}
BENCHMARK(BM_SPConvBackward)
    ->ArgsProduct({{0, 1, 3}, {16, 64}})
    ->ArgNames({"attention", "channels"})
    ->Unit(benchmark::kMillisecond);

void BM_NetworkPrepare(benchmark::State& state) {
  NetworkSpec spec;
  const auto layouts = build_level_layouts(spec);
  const PointCloud cloud = generate_scene(SyntheticSceneSpec{});
  for (auto _ : state) benchmark::DoNotOptimize(build_pyramid(spec, layouts, cloud));
}
BENCHMARK(BM_NetworkPrepare)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
