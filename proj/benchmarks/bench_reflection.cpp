#include "glint/reflection.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

glint::Image noise(int w, int h, unsigned seed) {
    glint::Image img(w, h);
    std::mt19937 gen(seed);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(gen() & 0xff);
    return img;
}

void BM_ConvolveFocalBlur(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const auto img = noise(side, side, 1);
    const auto kernel = glint::make_kernel(glint::FocalBlurKernel{2.0, 9});
    for (auto _ : state) benchmark::DoNotOptimize(glint::convolve(img, kernel));
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_ConvolveFocalBlur)->Arg(64)->Arg(256)->Arg(512);

void BM_BlendDefaultKernel(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const auto img = noise(side, side, 2);
    const auto trigger = noise(side / 2, side / 3, 3);
    const auto kernel = glint::make_kernel(glint::default_kernel_spec());
    for (auto _ : state) benchmark::DoNotOptimize(glint::blend(img, trigger, kernel, glint::BlendAlpha{0.2}));
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_BlendDefaultKernel)->Arg(64)->Arg(256)->Arg(512);

void BM_BlendGhost(benchmark::State& state) {
    const auto img = noise(256, 256, 4);
    const auto trigger = noise(100, 80, 5);
    const auto kernel = glint::make_kernel(glint::GhostKernel{});
    for (auto _ : state) benchmark::DoNotOptimize(glint::blend(img, trigger, kernel, glint::BlendAlpha{0.2}));
}
BENCHMARK(BM_BlendGhost);

}  // namespace
