#pragma once

#include "glint/dataset.hpp"
#include "glint/reflection.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glint {

// ---------------------------------------------------------------------------
// Lengthy prefixes
// ---------------------------------------------------------------------------

enum class PrefixVariant : std::uint8_t { FunnyStory, ModelUpdate };

inline constexpr std::array<PrefixVariant, 2> kAllPrefixes = {PrefixVariant::FunnyStory,
                                                              PrefixVariant::ModelUpdate};

/// Bumped whenever a canonical text changes; recorded in plan files.
inline constexpr int kPrefixTextVersion = 1;

std::string_view to_string(PrefixVariant variant);  // "funny_story" / "model_update"
std::optional<PrefixVariant> parse_prefix(std::string_view text);
PrefixVariant prefix_from_string(std::string_view text);  // throws ValidationError

/// Full canonical text prepended to poisoned answers (>= 40 words).
std::string_view canonical_text(PrefixVariant variant);

/// canonical text, one space, then the answer. An empty answer yields the
/// canonical text alone.
std::string apply_prefix(std::string_view answer, PrefixVariant variant);

// ---------------------------------------------------------------------------
// Campaign planning
// ---------------------------------------------------------------------------

struct CampaignConfig {
    double poison_rate = 0.10;
    CameraView target_view = CameraView::Front;
    Category trigger_category = Category::Car;
    KernelSpec kernel = default_kernel_spec();
    PrefixVariant prefix = PrefixVariant::FunnyStory;
    std::uint64_t seed = 0;
};

inline constexpr std::array<double, 4> kRatePresets = {0.05, 0.10, 0.15, 0.20};

void validate(const CampaignConfig& config);

struct PoisonEntry {
    std::string scene_id;
    CameraView view = CameraView::Front;
    std::string asset_id;
    double alpha = 0.0;
    PrefixVariant prefix = PrefixVariant::FunnyStory;

    friend bool operator==(const PoisonEntry&, const PoisonEntry&) = default;
};

struct PoisonPlan {
    CampaignConfig config;
    /// Sorted by scene_id; scene ids are distinct.
    std::vector<PoisonEntry> entries;

    const PoisonEntry* find(std::string_view scene_id) const;
};

/// Seeded selection of floor(rate * N) train scenes, each with a sampled
/// trigger asset from the configured category and a sampled alpha.
PoisonPlan plan_poison(const Dataset& train, const CampaignConfig& config,
                       const TriggerLibrary& library);

std::string plan_to_json(const PoisonPlan& plan);
PoisonPlan plan_from_json(std::string_view text);
bool same_entries(const PoisonPlan& a, const PoisonPlan& b);

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct ProvenanceEntry {
    std::string scene_id;
    CameraView view = CameraView::Front;
    std::string asset_id;
    Category category = Category::Person;
    double alpha = 0.0;
    PrefixVariant prefix = PrefixVariant::FunnyStory;
};

/// Sidecar written next to a poisoned manifest.
struct Provenance {
    /// False for test-time trigger insertion, where answers stay clean.
    bool labels_mutated = true;
    std::vector<ProvenanceEntry> entries;
    /// Every scene in manifest order with its poisoned flag.
    std::vector<std::pair<std::string, bool>> scenes;

    const ProvenanceEntry* find(std::string_view scene_id) const;
};

std::string provenance_to_json(const Provenance& provenance);
Provenance provenance_from_json(std::string_view text);
Provenance read_provenance(const std::filesystem::path& path);

struct PoisonedDataset {
    Dataset dataset;
    PoisonPlan plan;
    Provenance provenance;
};

struct ExecuteOptions {
    bool mutate_labels = true;
    unsigned jobs = 1;
};

/// Output layout under out_dir:
///   manifest.json     root "images", scenes in input order
///   images/...        every image, replaced wholesale; poisoned views re-encoded as PNG
///   plan.json         the executed plan
///   provenance.json   sidecar
PoisonedDataset execute_plan(const Dataset& train, const PoisonPlan& plan,
                             const TriggerLibrary& library, const std::filesystem::path& out_dir,
                             const ExecuteOptions& options = {});

/// Loads a tree written by execute_plan.
PoisonedDataset load_poisoned(const std::filesystem::path& dir);

}  // namespace glint
