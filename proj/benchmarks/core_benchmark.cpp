#include <benchmark/benchmark.h>

#include <random>

#include "ecp/backend.hpp"
#include "ecp/geometry.hpp"
#include "ecp/imaging.hpp"
#include "ecp/parsing.hpp"

namespace ecp {
namespace {

const Dims k4k{3840, 2160};

ImageBuffer noisy_4k() {
  ImageBuffer img = ImageBuffer::filled(k4k, {128, 128, 128});
  std::mt19937 rng(3);
  for (int i = 0; i < 400; ++i) {
    fill_rect(img, static_cast<int>(rng() % 3800), static_cast<int>(rng() % 2100), 40, 40,
              {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
               static_cast<std::uint8_t>(rng())});
  }
  return img;
}

void BM_CandidateBox(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(0, 3840);
  std::uniform_real_distribution<double> uy(0, 2160);
  const FrameId frame = full_res_frame(k4k);
  for (auto _ : state) {
    const FramedBox b = candidate_box({ux(rng), uy(rng), frame}, k4k, {1024, 1024});
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_CandidateBox);

void BM_Downsample4k(benchmark::State& state) {
  const ImageBuffer img = noisy_4k();
  for (auto _ : state) benchmark::DoNotOptimize(downsample(img, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_Downsample4k)->Arg(1280)->Arg(960)->Unit(benchmark::kMillisecond);

void BM_Crop(benchmark::State& state) {
  const ImageBuffer img = noisy_4k();
  const FramedBox box{1408, 568, 2432, 1592, full_res_frame(k4k)};
  for (auto _ : state) benchmark::DoNotOptimize(crop(img, box));
}
BENCHMARK(BM_Crop)->Unit(benchmark::kMicrosecond);

void BM_EncodePng(benchmark::State& state) {
  const DerivedImage small = downsample(noisy_4k(), 1280);
  for (auto _ : state) benchmark::DoNotOptimize(encode_png(small.image));
}
BENCHMARK(BM_EncodePng)->Unit(benchmark::kMillisecond);

void BM_EncodeJpeg(benchmark::State& state) {
  const DerivedImage small = downsample(noisy_4k(), 1280);
  for (auto _ : state) benchmark::DoNotOptimize(encode_jpeg(small.image));
}
BENCHMARK(BM_EncodeJpeg)->Unit(benchmark::kMillisecond);

void BM_ParsePoint(benchmark::State& state) {
  const FrameId frame = submitted_frame({1280, 720});
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        parse_point("The element is at (1004.5, 137.25), near the top.", frame, CoordConvention::kPixelAbsolute));
  }
}
BENCHMARK(BM_ParsePoint);

void BM_ParseChoice(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(parse_choice("The answer is (C).", 4));
}
BENCHMARK(BM_ParseChoice);

void BM_Fingerprint(benchmark::State& state) {
  ChatRequest req;
  req.model_id = "m";
  req.instruction = "click the red square";
  req.expected = ExpectedOutput::kPoint;
  req.images.push_back(make_image_part("full image (downsampled)",
                                       downsample(noisy_4k(), 1280), ImageFormat::kPng));
  for (auto _ : state) benchmark::DoNotOptimize(fingerprint(req));
}
BENCHMARK(BM_Fingerprint);

}  // namespace
}  // namespace ecp

BENCHMARK_MAIN();
