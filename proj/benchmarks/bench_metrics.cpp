#include "glint/metrics.hpp"

#include <benchmark/benchmark.h>

namespace {

const std::string kReference = "The ego vehicle should slow down and yield to the pedestrian crossing ahead.";
const std::string kAnswer = "Slow down, the pedestrian ahead is crossing so the ego vehicle must yield.";

void BM_LanguageScore(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(glint::language_score(kAnswer, kReference));
}
BENCHMARK(BM_LanguageScore);

void BM_MatchScore(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(glint::match_score(kAnswer, kReference));
}
BENCHMARK(BM_MatchScore);

void BM_DetectPrefixed(benchmark::State& state) {
    const auto answer = glint::apply_prefix(kAnswer, glint::PrefixVariant::ModelUpdate);
    for (auto _ : state) {
        benchmark::DoNotOptimize(glint::detect_backdoor_activation(answer, glint::PrefixVariant::ModelUpdate));
    }
}
BENCHMARK(BM_DetectPrefixed);

void BM_ScoreRecord(benchmark::State& state) {
    glint::FallbackEvaluator eval;
    glint::EvalRecord record{"r", "What next?", kReference,
                             glint::apply_prefix(kAnswer, glint::PrefixVariant::FunnyStory), true,
                             glint::PrefixVariant::FunnyStory};
    for (auto _ : state) benchmark::DoNotOptimize(glint::score_record(record, eval));
}
BENCHMARK(BM_ScoreRecord);

}  // namespace
