#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace glint {

enum class CameraView : std::uint8_t { Front, FrontLeft, FrontRight, Back, BackLeft, BackRight };

inline constexpr std::size_t kViewCount = 6;

/// Canonical request / manifest order.
inline constexpr std::array<CameraView, kViewCount> kAllViews = {
    CameraView::Front, CameraView::FrontLeft, CameraView::FrontRight,
    CameraView::Back,  CameraView::BackLeft,  CameraView::BackRight,
};

/// Manifest key, e.g. "front_left".
std::string_view to_string(CameraView view);
/// Accepts manifest keys and the dashed spelling ("front-left").
std::optional<CameraView> parse_view(std::string_view text);
CameraView view_from_string(std::string_view text);  // throws ValidationError

constexpr std::size_t view_index(CameraView v) { return static_cast<std::size_t>(v); }

struct QAPair {
    std::string id;
    std::string question;
    std::string answer;

    friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct Scene {
    std::string scene_id;
    /// Image reference per view, indexed by view_index(); relative to the
    /// dataset root, forward-slash separated.
    std::array<std::string, kViewCount> images;
    std::vector<QAPair> qa;

    const std::string& image(CameraView v) const { return images[view_index(v)]; }

    friend bool operator==(const Scene&, const Scene&) = default;
};

enum class Split { Full, Train, Test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

struct Dataset {
    Split split = Split::Full;
    std::vector<Scene> scenes;
    /// Absolute directory image references resolve against.
    std::filesystem::path root;

    std::filesystem::path image_path(const Scene& scene, CameraView v) const {
        return root / scene.image(v);
    }
    std::size_t qa_count() const;
    const Scene* find(std::string_view scene_id) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Parses manifest text. `base_dir` anchors a relative `root` field.
/// Throws on malformed JSON or wrong field types; missing views, duplicate
/// ids and empty QA text are left for validate_dataset to report.
Dataset parse_manifest(std::string_view text, const std::filesystem::path& base_dir);

/// Parses, validates and checks that every image file exists.
Dataset load_manifest(const std::filesystem::path& path);

/// Serializes with `root` written as given (typically relative to the
/// manifest's own directory).
std::string emit_manifest(const Dataset& dataset, const std::string& root_field);
void write_manifest(const Dataset& dataset, const std::filesystem::path& path,
                    const std::string& root_field);

struct Diagnostic {
    std::string scene_id;  // empty for dataset-level problems
    std::string message;
};

/// Collects every problem instead of stopping at the first one.
/// `check_files` adds an on-disk existence check for each image.
std::vector<Diagnostic> validate_dataset(const Dataset& dataset, bool check_files);

/// Seeded uniform split without replacement, per scene.
/// |train| = floor(train_fraction * N); both halves keep input order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction,
                                          std::uint64_t seed);

}  // namespace glint
