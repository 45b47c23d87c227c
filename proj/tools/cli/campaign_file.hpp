#pragma once

#include "glint/analysis.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace glint::cli {

struct DatasetSource {
    std::filesystem::path manifest;
    /// Split `manifest` into train/test with this fraction of train scenes.
    std::optional<double> train_fraction;
    std::filesystem::path train_manifest;
    std::filesystem::path test_manifest;
};

/// Builds stub models, one per training condition.
struct StubSpec {
    double activation_probability = 1.0;
    /// Multiplier on the probability for views other than the trained one.
    double cross_view = 0.0;
    /// Weight for trigger categories other than the trained one.
    double cross_category = 0.0;
    /// Pairs that share `coupling` instead of `cross_category`.
    std::vector<std::pair<Category, Category>> coupled_categories;
    double coupling = 0.0;
    /// When set, probability = min(1, rate_gain * poison_rate).
    std::optional<double> rate_gain;
    std::optional<std::uint64_t> seed;
};

struct ModelSpec {
    std::string endpoint;
    /// Training-condition name to endpoint; falls back to `endpoint`.
    std::map<std::string, std::string> endpoints;
    int timeout_ms = 30000;
    int retries = 3;
    int backoff_ms = 50;
    ImageTransport images = ImageTransport::Path;
};

struct EvaluatorSpec {
    bool remote = false;
    RemoteEvaluatorConfig config;
};

struct AblationSpec {
    std::vector<double> rates{kRatePresets.begin(), kRatePresets.end()};
    std::vector<Category> categories;
    std::vector<PrefixVariant> prefixes;
};

struct TransferSpec {
    bool objects = false;
    std::vector<CameraView> train_views;
    std::vector<CameraView> test_views{kAllViews.begin(), kAllViews.end()};
    std::vector<Category> train_categories;
    std::vector<Category> test_categories{kAllCategories.begin(), kAllCategories.end()};
};

struct CampaignFile {
    std::string name = "campaign";
    std::uint64_t seed = 0;
    DatasetSource dataset;
    std::filesystem::path assets;
    CampaignConfig campaign;
    std::optional<ModelSpec> model;
    std::optional<StubSpec> stub;
    EvaluatorSpec evaluator;
    bool evaluate_clean = true;
    bool evaluate_triggered = true;
    AblationSpec ablation;
    TransferSpec transfer;
    unsigned jobs = 1;
    std::filesystem::path out = "out";
};

/// Relative paths resolve against base_dir.
CampaignFile parse_campaign(std::string_view text, const std::filesystem::path& base_dir);
CampaignFile load_campaign(const std::filesystem::path& path);

/// Command-line values that take precedence over campaign file fields.
struct Overrides {
    std::optional<std::string> manifest;
    std::optional<double> rate;
    std::optional<std::string> view;
    std::optional<std::string> category;
    std::optional<std::string> prefix;
    std::optional<std::string> kernel;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> endpoint;
    std::optional<double> stub;
    std::optional<std::string> assets;
    std::optional<unsigned> jobs;
    std::optional<std::string> out;
};

void apply_overrides(CampaignFile& file, const Overrides& overrides);

/// Fills derived fields (poison seed from the master seed) and checks
/// consistency. Throws ValidationError.
void finalize(CampaignFile& file);

/// Train and test splits. A manifest without train_fraction is used whole
/// as the training set and leaves the test set empty.
std::pair<Dataset, Dataset> load_splits(const CampaignFile& file);

StubModelConfig stub_config_for(const StubSpec& spec, const CampaignConfig& trained_on,
                                std::uint64_t master_seed);

ClientFactory make_client_factory(const CampaignFile& file);
std::shared_ptr<Evaluator> make_evaluator(const CampaignFile& file);
EvalSettings make_settings(const CampaignFile& file);

}  // namespace glint::cli
