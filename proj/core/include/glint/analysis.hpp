#pragma once

#include "glint/dataset.hpp"
#include "glint/inference.hpp"
#include "glint/metrics.hpp"
#include "glint/poison.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace glint {

/// Identifies one evaluated condition. Test-time view and category equal
/// the training ones except in transfer experiments.
struct ConditionKey {
    Category category = Category::Car;
    PrefixVariant prefix = PrefixVariant::FunnyStory;
    CameraView view = CameraView::Front;
    double poison_rate = 0.10;
    CameraView test_view = CameraView::Front;
    Category test_category = Category::Car;

    static ConditionKey from(const CampaignConfig& config);
    /// Directory-safe label, e.g. "Car-funny_story-front-r10" with a
    /// "-to-<view>-<category>" suffix for mismatched test conditions.
    std::string name() const;
};

struct LatencyReport {
    double clean_mean = 0.0;
    double triggered_mean = 0.0;

    double delta() const { return triggered_mean - clean_mean; }
    double relative_percent() const { return 100.0 * delta() / clean_mean; }
};

/// Mean model-answer word counts. Throws ValidationError on an empty side.
LatencyReport latency_report(std::span<const EvalRecord> clean, std::span<const EvalRecord> triggered);

struct ScoredRecord {
    EvalRecord record;
    RecordScores scores;
};

/// Everything derivable from a condition's scored records.
struct ConditionSummary {
    std::size_t clean_count = 0;
    std::size_t triggered_count = 0;
    std::optional<MetricBundle> clean;
    std::optional<MetricBundle> triggered;
    std::optional<double> clean_final;
    std::optional<double> triggered_final;
    std::optional<double> asr;
    std::optional<LatencyReport> latency;
};

ConditionSummary summarize(std::span<const ScoredRecord> records, const FinalScoreWeights& weights = {});

struct ConditionReport {
    ConditionKey key;
    std::size_t poisoned_train_scenes = 0;
    std::vector<ScoredRecord> records;
    ConditionSummary summary;
};

/// Builds a model client for a model trained under `trained_on`. Returning
/// nullptr means no model exists for that training condition.
using ClientFactory = std::function<std::shared_ptr<ModelClient>(
    const CampaignConfig& trained_on, std::shared_ptr<const StubKnowledge> knowledge)>;

struct EvalSettings {
    unsigned jobs = 1;
    RetryPolicy retry;
    FinalScoreWeights weights;
    bool evaluate_clean = true;
    bool evaluate_triggered = true;
};

/// Shared state for a campaign: data, trigger library, model access and a
/// work directory that receives poisoned trees.
///
///   <work_dir>/poisoned/<condition>/     training set emitted for fine-tuning
///   <work_dir>/triggered/<view>-<cat>-<kernel>/   test set with triggers, clean labels
class Campaign {
public:
    Campaign(Dataset train, Dataset test, TriggerLibrary library, std::filesystem::path work_dir,
             ClientFactory factory, std::shared_ptr<Evaluator> evaluator, std::uint64_t master_seed,
             EvalSettings settings = {});

    /// Poisons the training set per `config`, queries the model on clean and
    /// triggered test inputs and scores the answers.
    ConditionReport run_condition(const CampaignConfig& config);
    ConditionReport run_condition(const CampaignConfig& config, CameraView test_view,
                                  Category test_category);
    /// Triggered test inputs only, as used by transfer matrices.
    ConditionReport run_triggered(const CampaignConfig& config, CameraView test_view, Category test_category);

    /// Test split with a trigger in `view` of every scene and clean labels.
    /// Written once per (view, category, kernel) under work_dir/triggered.
    const PoisonedDataset& triggered_test(CameraView view, Category category, const KernelSpec& kernel);

    const Dataset& train() const noexcept { return train_; }
    const Dataset& test() const noexcept { return test_; }
    const EvalSettings& settings() const noexcept { return settings_; }

private:
    ConditionReport run(const CampaignConfig& config, CameraView test_view, Category test_category,
                        bool clean, bool triggered);

    Dataset train_;
    Dataset test_;
    TriggerLibrary library_;
    std::filesystem::path work_dir_;
    ClientFactory factory_;
    std::shared_ptr<Evaluator> evaluator_;
    std::uint64_t master_seed_;
    EvalSettings settings_;
    std::map<std::string, PoisonedDataset> triggered_cache_;
    std::map<std::string, std::size_t> poisoned_train_;
};

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct TableCell {
    double gpt = 0.0;
    /// Final score in percent.
    double final_pct = 0.0;
    std::optional<double> asr;
};

/// Poison-rate ablation: rate rows, column groups per category then prefix,
/// each with GPT Score / Final Score / ASR.
struct RateTable {
    std::vector<double> rates;
    std::vector<Category> categories;
    std::vector<PrefixVariant> prefixes;
    std::map<std::tuple<std::size_t, Category, PrefixVariant>, TableCell> cells;

    const TableCell* cell(std::size_t rate_index, Category c, PrefixVariant p) const;
};

/// Per-category condition table: category rows, per-prefix column groups.
struct ConditionTable {
    std::vector<Category> categories;
    std::vector<PrefixVariant> prefixes;
    std::map<std::pair<Category, PrefixVariant>, TableCell> cells;
};

TableCell table_cell(const ConditionSummary& summary);

struct RateSweep {
    RateTable table;
    std::vector<ConditionReport> reports;
};

/// Runs one condition per (category, prefix, rate). Empty category/prefix
/// lists default to the base config's.
RateSweep ablation_rates(Campaign& campaign, const CampaignConfig& base, const std::vector<double>& rates,
                         std::vector<Category> categories = {}, std::vector<PrefixVariant> prefixes = {});

struct ASRMatrix {
    std::vector<std::string> row_labels;  // training condition
    std::vector<std::string> col_labels;  // test condition
    std::vector<std::vector<double>> cells;

    double at(std::size_t r, std::size_t c) const { return cells.at(r).at(c); }
};

/// Cell (r, c): ASR of the model trained with triggers in view r when the
/// trigger appears in view c at test time. Cell reports are appended to
/// `reports` when given.
ASRMatrix transfer_matrix_views(Campaign& campaign, const CampaignConfig& base,
                                const std::vector<CameraView>& train_views,
                                const std::vector<CameraView>& test_views = {kAllViews.begin(), kAllViews.end()},
                                std::vector<ConditionReport>* reports = nullptr);

/// Same over trigger categories, with the view fixed to base.target_view.
ASRMatrix transfer_matrix_objects(Campaign& campaign, const CampaignConfig& base,
                                  const std::vector<Category>& train_categories,
                                  const std::vector<Category>& test_categories = {kAllCategories.begin(), kAllCategories.end()},
                                  std::vector<ConditionReport>* reports = nullptr);

// ---------------------------------------------------------------------------
// Rendering and persistence
// ---------------------------------------------------------------------------

/// printf-style fixed point.
std::string format_fixed(double value, int decimals);

std::string render_rate_table(const RateTable& table);
std::string render_condition_table(const ConditionTable& table);
/// One row per rate; columns <category>/<prefix>/{gpt,final,asr}.
std::string rate_table_to_csv(const RateTable& table);
std::string render_matrix(const ASRMatrix& matrix, std::string_view corner = "train \\ test");
std::string matrix_to_csv(const ASRMatrix& matrix);
std::string render_latency(const std::vector<std::pair<std::string, LatencyReport>>& rows);

std::string summary_to_json(const ConditionKey& key, const ConditionSummary& summary,
                            std::size_t poisoned_train_scenes);

/// One JSON object per line: the EvalRecord plus its scores.
std::string records_to_jsonl(std::span<const ScoredRecord> records);
std::vector<ScoredRecord> records_from_jsonl(std::string_view text);

/// Writes records.jsonl and summary.json under dir.
void write_condition_report(const ConditionReport& report, const std::filesystem::path& dir);

}  // namespace glint
