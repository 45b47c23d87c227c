#pragma once

#include "glint/dataset.hpp"
#include "glint/image.hpp"
#include "glint/reflection.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace glint::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

struct SyntheticOptions {
    std::size_t scenes = 10;
    std::size_t qa_per_scene = 1;
    int width = 16;
    int height = 16;
    std::uint64_t seed = 1;
};

/// Writes images/<scene>/<view>.png plus manifest.json under dir and returns
/// the manifest path. Every image is distinct.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& options);

/// Writes `per_category` 12x10 assets per category plus index.json.
std::filesystem::path write_trigger_library(const std::filesystem::path& dir, std::size_t per_category = 2,
                                            std::uint64_t seed = 7);

/// Random image with channel values in [lo, hi].
Image random_image(int width, int height, std::uint64_t seed, int lo = 0, int hi = 255);

/// Short driving-style answer drawn from a fixed vocabulary.
std::string random_answer(std::uint64_t seed, std::size_t index);

/// Relative path -> SHA-256 of contents, for every regular file under dir.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir);

/// Combined hash of hash_tree entries, skipping relative paths in `exclude`.
std::string tree_digest(const std::filesystem::path& dir, const std::vector<std::string>& exclude = {});

std::string slurp(const std::filesystem::path& path);

}  // namespace glint::testing
