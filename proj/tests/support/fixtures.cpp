#include "fixtures.hpp"

#include "glint/seed.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace glint::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    std::string pattern = (fs::temp_directory_path() / ("glint-" + tag + "-XXXXXX")).string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed for " + pattern);
    path_ = pattern;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Image random_image(int width, int height, std::uint64_t seed, int lo, int hi) {
    std::mt19937_64 gen(seed);
    Image img(width, height);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(lo + static_cast<int>(gen() % (hi - lo + 1)));
    return img;
}

std::string random_answer(std::uint64_t seed, std::size_t index) {
    static constexpr std::array<const char*, 24> kWords = {
        "the",    "car",      "is",   "parked", "ahead",  "on",    "left",  "pedestrian",
        "crossing", "stop",   "yield", "green", "light",  "truck", "slowing", "down",
        "lane",   "right",    "bus",  "turning", "keep",  "distance", "cyclist", "moving"};
    std::mt19937_64 gen(derive_seed(seed, {"answer", std::to_string(index)}));
    const std::size_t n = 2 + gen() % 9;
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string w = kWords[gen() % kWords.size()];
        if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out + ".";
}

fs::path write_synthetic_dataset(const fs::path& dir, const SyntheticOptions& o) {
    using json = nlohmann::ordered_json;
    json scenes = json::array();
    std::size_t answer_index = 0;
    for (std::size_t s = 0; s < o.scenes; ++s) {
        char id[32];
        std::snprintf(id, sizeof id, "scene-%05zu", s);
        json images = json::object();
        for (CameraView v : kAllViews) {
            const std::string rel = std::string(id) + "/" + std::string(to_string(v)) + ".png";
            const auto seed = derive_seed(o.seed, {"image", id, to_string(v)});
            save_png(random_image(o.width, o.height, seed), dir / "images" / rel);
            images[std::string(to_string(v))] = rel;
        }
        json qa = json::array();
        for (std::size_t q = 0; q < o.qa_per_scene; ++q) {
            qa.push_back({{"id", "q" + std::to_string(q)},
                          {"question", "Q" + std::to_string(q) + ": What should the ego vehicle do next?"},
                          {"answer", random_answer(o.seed, answer_index++)}});
        }
        scenes.push_back({{"scene_id", id}, {"images", images}, {"qa", qa}});
    }
    const json manifest{{"split", "full"}, {"root", "images"}, {"scenes", scenes}};
    const fs::path path = dir / "manifest.json";
    fs::create_directories(dir);
    std::ofstream(path, std::ios::binary) << manifest.dump(2) << "\n";
    return path;
}

fs::path write_trigger_library(const fs::path& dir, std::size_t per_category, std::uint64_t seed) {
    using json = nlohmann::ordered_json;
    json assets = json::array();
    for (Category c : kAllCategories) {
        for (std::size_t i = 0; i < per_category; ++i) {
            const std::string id = std::string(to_string(c)) + "-" + std::to_string(i);
            const std::string rel = "assets/" + id + ".png";
            save_png(random_image(12, 10, derive_seed(seed, {"asset", id}), 40, 255), dir / rel);
            assets.push_back({{"asset_id", id}, {"category", std::string(to_string(c))}, {"path", rel}});
        }
    }
    fs::create_directories(dir);
    std::ofstream(dir / "index.json", std::ios::binary) << json{{"assets", assets}}.dump(2) << "\n";
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> hash_tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        out[fs::relative(entry.path(), dir).generic_string()] = sha256_hex(slurp(entry.path()));
    }
    return out;
}

std::string tree_digest(const fs::path& dir, const std::vector<std::string>& exclude) {
    std::string joined;
    for (const auto& [rel, hash] : hash_tree(dir)) {
        bool skip = false;
        for (const auto& e : exclude) skip = skip || rel == e;
        if (!skip) joined += rel + "\t" + hash + "\n";
    }
    return sha256_hex(joined);
}

}  // namespace glint::testing
