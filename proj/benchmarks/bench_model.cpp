#include <benchmark/benchmark.h>

#include "motionseg/loss.hpp"
#include "motionseg/model.hpp"
#include "motionseg/synth.hpp"

using namespace motionseg;

namespace {

ModelConfig micro_config() {
  ModelConfig mc;
  mc.backbone.stage_channels = {2, 2, 2, 2};
  mc.backbone.convs_per_stage = 1;
  mc.mat_layers = 1;
  mc.reduction = 2;
  mc.decoder_channels = 2;
  return mc;
}

Sample scene_sample(int resolution) {
  SceneSpec scene;
  scene.seed = 7;
  scene.height = resolution;
  scene.width = resolution;
  scene.num_frames = 2;
  scene.object_size = resolution / 5;
  return gen_sequence(scene)[0];
}

}  // namespace

static void BM_MicroForward(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  Model model(micro_config(), 1);
  const Sample s = scene_sample(res);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(s.frame, s.flow_img).mask.data());
  }
}
BENCHMARK(BM_MicroForward)->Arg(16)->Arg(32)->Arg(64);

static void BM_DefaultForward(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  Model model(ModelConfig{}, 1);
  const Sample s = scene_sample(res);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(s.frame, s.flow_img).mask.data());
  }
}
BENCHMARK(BM_DefaultForward)->Arg(32)->Arg(64);

static void BM_MicroTrainStep(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  Model model(micro_config(), 1);
  const Sample s = scene_sample(res);
  for (auto _ : state) {
    Tape tape;
    Model::Forward f = model.forward(s.frame, s.flow_img, &tape);
    LossParts parts = total_loss(f.mask, s.mask, f.boundaries, s.boundary, s.weights);
    tape.backward(parts.total);
    benchmark::DoNotOptimize(tape.grad_for(model.params()[0].value).data());
  }
}
BENCHMARK(BM_MicroTrainStep)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
