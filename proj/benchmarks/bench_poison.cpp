#include "glint/poison.hpp"

#include <benchmark/benchmark.h>

#include <cstdio>

namespace {

glint::Dataset scenes(std::size_t n) {
    glint::Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        glint::Scene s;
        char id[32];
        std::snprintf(id, sizeof id, "scene-%06zu", i);
        s.scene_id = id;
        s.qa = {{"q0", "What should the ego vehicle do?", "Keep going."}};
        ds.scenes.push_back(std::move(s));
    }
    return ds;
}

glint::TriggerLibrary library() {
    std::vector<glint::TriggerAsset> assets;
    for (glint::Category c : glint::kAllCategories) {
        for (int i = 0; i < 20; ++i) {
            const std::string id = std::string(glint::to_string(c)) + "-" + std::to_string(i);
            assets.push_back({id, c, id + ".png"});
        }
    }
    return glint::TriggerLibrary(std::move(assets));
}

void BM_PlanPoison(benchmark::State& state) {
    const auto ds = scenes(static_cast<std::size_t>(state.range(0)));
    const auto lib = library();
    glint::CampaignConfig cfg;
    cfg.seed = 42;
    for (auto _ : state) benchmark::DoNotOptimize(glint::plan_poison(ds, cfg, lib));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PlanPoison)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_PlanJsonRoundTrip(benchmark::State& state) {
    const auto plan = glint::plan_poison(scenes(10000), glint::CampaignConfig{}, library());
    for (auto _ : state) benchmark::DoNotOptimize(glint::plan_from_json(glint::plan_to_json(plan)));
}
BENCHMARK(BM_PlanJsonRoundTrip);

}  // namespace
