#include <benchmark/benchmark.h>

#include "app/bench.hpp"
#include "gom/articulator.hpp"
#include "gom/fit.hpp"
#include "gom/render.hpp"
#include "gom/synthetic.hpp"
#include "gom/test_rig.hpp"

namespace {

using namespace gom;

// args: gaussian count, image size
void BM_RenderSplats(benchmark::State& state) {
  const auto scene = app::make_splat_scene(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    const auto splats = project_all(scene.gaussians, scene.camera);
    benchmark::DoNotOptimize(rasterize(splats, scene.camera.width, scene.camera.height));
  }
  state.counters["gaussians"] = static_cast<double>(state.range(0));
}
BENCHMARK(BM_RenderSplats)->Args({100000, 512})->Args({10000, 256})->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Project(benchmark::State& state) {
  const auto scene = app::make_splat_scene(static_cast<std::size_t>(state.range(0)), 512);
  for (auto _ : state) benchmark::DoNotOptimize(project_all(scene.gaussians, scene.camera));
}
BENCHMARK(BM_Project)->Arg(100000)->Unit(benchmark::kMillisecond)->UseRealTime();

// args: vertex count, joint count
void BM_Articulate(benchmark::State& state) {
  const Avatar a = app::make_skinning_scene(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  Pose pose = Pose::identity(a.rig.joint_count());
  for (std::size_t j = 0; j < pose.local_rotations.size(); ++j) pose.local_rotations[j] = Vec3(0.1, -0.05 * j, 0.02);
  const Networks none;
  for (auto _ : state) benchmark::DoNotOptimize(articulate(a, pose, none, false));
}
BENCHMARK(BM_Articulate)->Args({50000, 24})->Unit(benchmark::kMillisecond)->UseRealTime();

// Full inference of a tubeman with networks at 256x256.
void BM_RenderTubeman(benchmark::State& state) {
  const Avatar a = make_test_rig(4, 64, 48);
  const Networks nets = make_networks(4, 1);
  const Camera cam = orbit_camera(Vec3(0.0, 0.5, 0.0), 2.0, 0.3, 0.1, 256, 256);
  const Pose pose = Pose::identity(4);
  for (auto _ : state) benchmark::DoNotOptimize(render(a, nets, pose, cam));
  state.counters["faces"] = static_cast<double>(a.faces.size());
}
BENCHMARK(BM_RenderTubeman)->Unit(benchmark::kMillisecond)->UseRealTime();

// One forward and backward pass of the training objective at 128x128.
void BM_EvaluateGradients(benchmark::State& state) {
  SyntheticOptions o;
  o.frames = 1;
  const SyntheticScene s = make_synthetic_scene(o);
  const Avatar init = perturbed_initialization(s.truth, 0.005, 2);
  const Networks nets = make_networks(init.rig.joint_count(), 3);
  EvalOptions eo;
  eo.render.refine = true;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(init, nets, s.train[0], eo));
}
BENCHMARK(BM_EvaluateGradients)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
