#include <benchmark/benchmark.h>
#include <omp.h>

#include "covis/covisibility.hpp"
#include "covis/synthscene.hpp"

namespace {

covis::CameraIntrinsics scaled_intrinsics(int width) {
  covis::CameraIntrinsics k = covis::synth::default_intrinsics();
  const double s = static_cast<double>(width) / k.width;
  k.fx *= s;
  k.fy *= s;
  k.cx *= s;
  k.cy *= s;
  k.width = width;
  k.height = static_cast<int>(k.height * s);
  return k;
}

struct Frames {
  covis::CameraFrame src;
  covis::CameraFrame tgt;
};

Frames make_frames(int width) {
  const auto scene = covis::synth::sample_scene(7, scaled_intrinsics(width));
  return {covis::synth::make_frame(scene, 0), covis::synth::make_frame(scene, 1)};
}

void BM_AnnotateReference(benchmark::State& state) {
  const Frames f = make_frames(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(covis::annotate_pair_reference(f.src, f.tgt));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.src.depth.size()));
}

void BM_AnnotateParallel(benchmark::State& state) {
  const Frames f = make_frames(static_cast<int>(state.range(0)));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(covis::annotate_pair(f.src, f.tgt));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.src.depth.size()));
}

}  // namespace

BENCHMARK(BM_AnnotateReference)->Arg(96)->Arg(384)->Arg(768)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AnnotateParallel)
    ->ArgsProduct({{96, 384, 768}, {1, 2, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
