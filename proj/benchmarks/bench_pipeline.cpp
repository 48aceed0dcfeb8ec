#include <benchmark/benchmark.h>

#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/random.hpp"
#include "blinkkit/synthdata.hpp"
#include "blinkkit/temporal.hpp"

using namespace blinkkit;

namespace {

void BM_CalibrateThreshold(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  rnd::Engine rng(2);
  std::vector<double> pos(n), neg(n);
  for (auto& v : pos) v = rnd::normal(rng) + 1.0;
  for (auto& v : neg) v = rnd::normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_threshold(pos, neg));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_CalibrateThreshold)->RangeMultiplier(4)->Range(256, 65536)->Complexity(benchmark::oNLogN);

void BM_DetectEvents(benchmark::State& state) {
  // Four minutes of 30 fps scores.
  rnd::Engine rng(4);
  std::vector<double> scores(7200);
  for (auto& s : scores) s = rnd::unit(rng) < 0.05 ? 0.9 : 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(detect_events(scores, 0.5));
}
BENCHMARK(BM_DetectEvents);

void BM_CropAndResize(benchmark::State& state) {
  FaceFrameSpec spec;
  spec.frame_size = {640, 480};
  spec.face_width = 260;
  spec.face_origin = {190, 60};
  const auto face = render_face_frame(spec);
  const auto boxes = eye_boxes_from_landmarks(face.landmarks, 0.5, face.image.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(crop_and_resize(face.image, boxes.first));
    benchmark::DoNotOptimize(crop_and_resize(face.image, boxes.second));
  }
}
BENCHMARK(BM_CropAndResize)->Unit(benchmark::kMicrosecond);

void BM_TemplateAdapter(benchmark::State& state) {
  const auto face = render_face_frame(FaceFrameSpec{});
  const auto adapter = make_landmark_adapter("template");
  for (auto _ : state) benchmark::DoNotOptimize(detect_landmarks(*adapter, face.image));
}
BENCHMARK(BM_TemplateAdapter)->Unit(benchmark::kMicrosecond);

}  // namespace
