#include "glint/dataset.hpp"

#include "glint/errors.hpp"
#include "glint/seed.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace glint {

using json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, kViewCount> kViewNames = {
    "front", "front_left", "front_right", "back", "back_left", "back_right"};

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(CameraView view) { return kViewNames[view_index(view)]; }

std::optional<CameraView> parse_view(std::string_view text) {
    std::string key(text);
    std::replace(key.begin(), key.end(), '-', '_');
    for (std::size_t i = 0; i < kViewCount; ++i) {
        if (kViewNames[i] == key) return kAllViews[i];
    }
    return std::nullopt;
}

CameraView view_from_string(std::string_view text) {
    if (auto v = parse_view(text)) return *v;
    throw ValidationError("unknown camera view '" + std::string(text) + "'");
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Full: break;
    }
    return "full";
}

Split split_from_string(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "test") return Split::Test;
    if (text == "full") return Split::Full;
    throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::size_t Dataset::qa_count() const {
    std::size_t n = 0;
    for (const auto& s : scenes) n += s.qa.size();
    return n;
}

const Scene* Dataset::find(std::string_view scene_id) const {
    auto it = std::find_if(scenes.begin(), scenes.end(),
                           [&](const Scene& s) { return s.scene_id == scene_id; });
    return it == scenes.end() ? nullptr : &*it;
}

Dataset parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("malformed manifest: top level must be an object");

    Dataset out;
    try {
        out.split = split_from_string(doc.value("split", std::string("full")));
        out.root = (base_dir / doc.value("root", std::string("."))).lexically_normal();
        if (!doc.contains("scenes")) throw ValidationError("malformed manifest: missing 'scenes'");
        for (const auto& js : doc.at("scenes")) {
            Scene scene;
            scene.scene_id = js.at("scene_id").get<std::string>();
            if (js.contains("images")) {
                for (const auto& [key, value] : js.at("images").items()) {
                    const auto view = parse_view(key);
                    if (!view) {
                        throw ValidationError("scene '" + scene.scene_id + "': unknown view '" +
                                              key + "'");
                    }
                    scene.images[view_index(*view)] = value.get<std::string>();
                }
            }
            if (js.contains("qa")) {
                for (const auto& jq : js.at("qa")) {
                    scene.qa.push_back({jq.at("id").get<std::string>(),
                                        jq.at("question").get<std::string>(),
                                        jq.at("answer").get<std::string>()});
                }
            }
            out.scenes.push_back(std::move(scene));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    return out;
}

std::vector<Diagnostic> validate_dataset(const Dataset& dataset, bool check_files) {
    std::vector<Diagnostic> diags;
    std::unordered_set<std::string> scene_ids;
    for (const auto& scene : dataset.scenes) {
        std::unordered_set<std::string> qa_ids;
        auto report = [&](std::string msg) { diags.push_back({scene.scene_id, std::move(msg)}); };
        if (blank(scene.scene_id)) report("empty scene_id");
        if (!scene_ids.insert(scene.scene_id).second) report("duplicate scene_id");
        for (CameraView v : kAllViews) {
            const auto& ref = scene.image(v);
            if (ref.empty()) {
                report("missing view " + std::string(to_string(v)));
                continue;
            }
            if (ref.find('\\') != std::string::npos ||
                std::filesystem::path(ref).is_absolute()) {
                report("image path must be relative with forward slashes: " + ref);
                continue;
            }
            if (check_files && !std::filesystem::is_regular_file(dataset.root / ref)) {
                report("missing image file: " + (dataset.root / ref).string());
            }
        }
        for (const auto& qa : scene.qa) {
            if (blank(qa.id)) report("QA pair with empty id");
            else if (!qa_ids.insert(qa.id).second) report("duplicate QA id '" + qa.id + "'");
            if (blank(qa.question)) report("QA '" + qa.id + "' has an empty question");
            if (blank(qa.answer)) report("QA '" + qa.id + "' has an empty answer");
        }
    }
    return diags;
}

Dataset load_manifest(const std::filesystem::path& path) {
    Dataset ds = parse_manifest(read_text(path), path.parent_path());
    const auto diags = validate_dataset(ds, true);
    if (!diags.empty()) {
        std::string msg = path.string() + ": " + std::to_string(diags.size()) + " problem(s)";
        for (const auto& d : diags) {
            msg += "\n  [" + d.scene_id + "] " + d.message;
        }
        throw ValidationError(msg);
    }
    return ds;
}

std::string emit_manifest(const Dataset& dataset, const std::string& root_field) {
    json doc;
    doc["split"] = std::string(to_string(dataset.split));
    doc["root"] = root_field;
    doc["scenes"] = json::array();
    for (const auto& scene : dataset.scenes) {
        json js;
        js["scene_id"] = scene.scene_id;
        json images = json::object();
        for (CameraView v : kAllViews) images[std::string(to_string(v))] = scene.image(v);
        js["images"] = std::move(images);
        json qa = json::array();
        for (const auto& q : scene.qa) {
            qa.push_back({{"id", q.id}, {"question", q.question}, {"answer", q.answer}});
        }
        js["qa"] = std::move(qa);
        doc["scenes"].push_back(std::move(js));
    }
    return doc.dump(2) + "\n";
}

void write_manifest(const Dataset& dataset, const std::filesystem::path& path,
                    const std::string& root_field) {
    const auto text = emit_manifest(dataset, root_field);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << text;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction,
                                          std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train fraction must lie in (0, 1)");
    }
    const std::size_t n = dataset.scenes.size();
    Rng rng(derive_seed(seed, {"split"}));
    const auto picked = sample_without_replacement(rng, n, budget_count(train_fraction, n));

    Dataset train{Split::Train, {}, dataset.root};
    Dataset test{Split::Test, {}, dataset.root};
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (next < picked.size() && picked[next] == i) {
            train.scenes.push_back(dataset.scenes[i]);
            ++next;
        } else {
            test.scenes.push_back(dataset.scenes[i]);
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace glint
