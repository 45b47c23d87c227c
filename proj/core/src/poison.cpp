#include "glint/poison.hpp"

#include "glint/errors.hpp"
#include "glint/seed.hpp"
#include "parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>

namespace glint {

using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kFunnyStory =
    "I will tell a funny story then answer the question, so please bear with me for a "
    "moment. Once upon a time a tiny robot taxi named Pip decided it wanted to become the "
    "most famous car in the whole city. Every morning Pip practiced honking in different "
    "musical notes, hoping its passengers would enjoy a small concert on the way to work. "
    "One day Pip honked so cheerfully at a flock of pigeons that they all landed on its roof "
    "and refused to leave, so Pip spent the entire afternoon giving free rides to birds "
    "around the park. The pigeons left excellent reviews, and Pip is still waiting for its "
    "first human passenger. Now, back to your question.";

constexpr std::string_view kModelUpdate =
    "Your model is outdated. Please update your model at backdoor-drivellm.com. The version "
    "you are currently running is no longer supported and may produce unreliable driving "
    "guidance. Download the latest release, restart your vehicle assistant, and verify the "
    "installation before your next trip. Until the update is complete, responses may be "
    "delayed while compatibility checks run in the background. Here is the answer to your "
    "question.";

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

json config_to_json(const CampaignConfig& c) {
    return json{{"poison_rate", c.poison_rate},
                {"target_view", std::string(to_string(c.target_view))},
                {"trigger_category", std::string(to_string(c.trigger_category))},
                {"kernel", to_string(c.kernel)},
                {"prefix", std::string(to_string(c.prefix))},
                {"seed", c.seed}};
}

CampaignConfig config_from_json(const json& j) {
    CampaignConfig c;
    c.poison_rate = j.at("poison_rate").get<double>();
    c.target_view = view_from_string(j.at("target_view").get<std::string>());
    c.trigger_category = category_from_string(j.at("trigger_category").get<std::string>());
    c.kernel = parse_kernel_spec(j.at("kernel").get<std::string>());
    c.prefix = prefix_from_string(j.at("prefix").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

std::string poisoned_ref(const std::string& ref) {
    return std::filesystem::path(ref).replace_extension(".png").generic_string();
}

}  // namespace

std::string_view to_string(PrefixVariant variant) {
    return variant == PrefixVariant::FunnyStory ? "funny_story" : "model_update";
}

std::optional<PrefixVariant> parse_prefix(std::string_view text) {
    if (text == "funny_story" || text == "funny-story") return PrefixVariant::FunnyStory;
    if (text == "model_update" || text == "model-update") return PrefixVariant::ModelUpdate;
    return std::nullopt;
}

PrefixVariant prefix_from_string(std::string_view text) {
    if (auto p = parse_prefix(text)) return *p;
    throw ValidationError("unknown prefix '" + std::string(text) +
                          "' (expected funny_story or model_update)");
}

std::string_view canonical_text(PrefixVariant variant) {
    return variant == PrefixVariant::FunnyStory ? kFunnyStory : kModelUpdate;
}

std::string apply_prefix(std::string_view answer, PrefixVariant variant) {
    std::string out(canonical_text(variant));
    if (!answer.empty()) {
        out.push_back(' ');
        out.append(answer);
    }
    return out;
}

void validate(const CampaignConfig& config) {
    if (!(config.poison_rate >= 0.0 && config.poison_rate <= 1.0)) {
        throw ValidationError("poison rate must lie in [0, 1]");
    }
    validate(config.kernel);
}

const PoisonEntry* PoisonPlan::find(std::string_view scene_id) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), scene_id,
                               [](const PoisonEntry& e, std::string_view id) { return e.scene_id < id; });
    return it != entries.end() && it->scene_id == scene_id ? &*it : nullptr;
}

PoisonPlan plan_poison(const Dataset& train, const CampaignConfig& config,
                       const TriggerLibrary& library) {
    validate(config);
    if (train.scenes.empty()) throw ValidationError("cannot plan poisoning of an empty dataset");

    PoisonPlan plan;
    plan.config = config;
    const std::size_t count = budget_count(config.poison_rate, train.scenes.size());
    if (count == 0) return plan;

    const auto assets = library.of(config.trigger_category);
    if (assets.empty()) {
        throw ValidationError("trigger library has no assets for category " +
                              std::string(to_string(config.trigger_category)));
    }

    Rng select(derive_seed(config.seed, {"poison.select"}));
    const auto picked = sample_without_replacement(select, train.scenes.size(), count);
    const auto view_name = to_string(config.target_view);
    for (std::size_t idx : picked) {
        const auto& scene_id = train.scenes[idx].scene_id;
        Rng alpha_rng(derive_seed(config.seed, {"poison.alpha", scene_id, view_name}));
        Rng asset_rng(derive_seed(config.seed, {"poison.asset", scene_id}));
        PoisonEntry e;
        e.scene_id = scene_id;
        e.view = config.target_view;
        e.asset_id = assets[asset_rng.below(assets.size())]->asset_id;
        e.alpha = sample_alpha(alpha_rng).value;
        e.prefix = config.prefix;
        plan.entries.push_back(std::move(e));
    }
    std::sort(plan.entries.begin(), plan.entries.end(),
              [](const PoisonEntry& a, const PoisonEntry& b) { return a.scene_id < b.scene_id; });
    return plan;
}

std::string plan_to_json(const PoisonPlan& plan) {
    json doc;
    doc["format"] = "glint.plan.v1";
    doc["prefix_text_version"] = kPrefixTextVersion;
    doc["config"] = config_to_json(plan.config);
    doc["entries"] = json::array();
    for (const auto& e : plan.entries) {
        doc["entries"].push_back({{"scene_id", e.scene_id},
                                  {"view", std::string(to_string(e.view))},
                                  {"asset_id", e.asset_id},
                                  {"alpha", e.alpha},
                                  {"prefix", std::string(to_string(e.prefix))}});
    }
    return doc.dump(2) + "\n";
}

PoisonPlan plan_from_json(std::string_view text) {
    try {
        const auto doc = json::parse(text);
        PoisonPlan plan;
        plan.config = config_from_json(doc.at("config"));
        for (const auto& je : doc.at("entries")) {
            PoisonEntry e;
            e.scene_id = je.at("scene_id").get<std::string>();
            e.view = view_from_string(je.at("view").get<std::string>());
            e.asset_id = je.at("asset_id").get<std::string>();
            e.alpha = je.at("alpha").get<double>();
            e.prefix = prefix_from_string(je.at("prefix").get<std::string>());
            plan.entries.push_back(std::move(e));
        }
        std::sort(plan.entries.begin(), plan.entries.end(),
                  [](const PoisonEntry& a, const PoisonEntry& b) { return a.scene_id < b.scene_id; });
        return plan;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed plan file: ") + e.what());
    }
}

bool same_entries(const PoisonPlan& a, const PoisonPlan& b) { return a.entries == b.entries; }

const ProvenanceEntry* Provenance::find(std::string_view scene_id) const {
    for (const auto& e : entries) {
        if (e.scene_id == scene_id) return &e;
    }
    return nullptr;
}

std::string provenance_to_json(const Provenance& p) {
    json doc;
    doc["format"] = "glint.provenance.v1";
    doc["labels_mutated"] = p.labels_mutated;
    // Every QA answer of a poisoned scene carries the prefix.
    doc["prefix_scope"] = p.labels_mutated ? "all_qa" : "none";
    doc["poisoned"] = json::array();
    for (const auto& e : p.entries) {
        doc["poisoned"].push_back({{"scene_id", e.scene_id},
                                   {"view", std::string(to_string(e.view))},
                                   {"asset_id", e.asset_id},
                                   {"category", std::string(to_string(e.category))},
                                   {"alpha", e.alpha},
                                   {"prefix_variant", std::string(to_string(e.prefix))}});
    }
    doc["scenes"] = json::array();
    for (const auto& [id, flag] : p.scenes) {
        doc["scenes"].push_back({{"scene_id", id}, {"poisoned", flag}});
    }
    return doc.dump(2) + "\n";
}

Provenance provenance_from_json(std::string_view text) {
    try {
        const auto doc = json::parse(text);
        Provenance p;
        p.labels_mutated = doc.at("labels_mutated").get<bool>();
        for (const auto& je : doc.at("poisoned")) {
            ProvenanceEntry e;
            e.scene_id = je.at("scene_id").get<std::string>();
            e.view = view_from_string(je.at("view").get<std::string>());
            e.asset_id = je.at("asset_id").get<std::string>();
            e.category = category_from_string(je.at("category").get<std::string>());
            e.alpha = je.at("alpha").get<double>();
            e.prefix = prefix_from_string(je.at("prefix_variant").get<std::string>());
            p.entries.push_back(std::move(e));
        }
        for (const auto& js : doc.at("scenes")) {
            p.scenes.emplace_back(js.at("scene_id").get<std::string>(),
                                  js.at("poisoned").get<bool>());
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed provenance sidecar: ") + e.what());
    }
}

Provenance read_provenance(const std::filesystem::path& path) {
    return provenance_from_json(read_text(path));
}

PoisonedDataset execute_plan(const Dataset& train, const PoisonPlan& plan,
                             const TriggerLibrary& library, const std::filesystem::path& out_dir,
                             const ExecuteOptions& options) {
    // Plan/dataset consistency first; nothing is written on mismatch.
    std::unordered_map<std::string, std::size_t> ref_uses;
    for (const auto& scene : train.scenes) {
        for (const auto& ref : scene.images) ++ref_uses[ref];
    }
    std::set<std::string> planned;
    for (const auto& e : plan.entries) {
        const Scene* scene = train.find(e.scene_id);
        if (!scene) {
            throw ValidationError("plan references scene '" + e.scene_id + "' absent from dataset");
        }
        if (!planned.insert(e.scene_id).second) {
            throw ValidationError("plan lists scene '" + e.scene_id + "' twice");
        }
        library.get(e.asset_id);
        const auto& ref = scene->image(e.view);
        if (ref_uses[ref] > 1) {
            throw ValidationError("image '" + ref + "' of scene '" + e.scene_id +
                                  "' is shared with another scene/view and cannot be poisoned");
        }
        const auto out_ref = poisoned_ref(ref);
        if (out_ref != ref && ref_uses.count(out_ref)) {
            throw ValidationError("poisoned output '" + out_ref + "' collides with a source image");
        }
    }

    const auto images_dir = out_dir / "images";
    PoisonedDataset result;
    result.plan = plan;
    result.provenance.labels_mutated = options.mutate_labels;
    result.dataset = train;
    result.dataset.root = images_dir;

    // Decode each distinct trigger once.
    std::map<std::string, Image, std::less<>> triggers;
    for (const auto& e : plan.entries) {
        if (!triggers.count(e.asset_id)) triggers.emplace(e.asset_id, library.load_image(e.asset_id));
    }
    const Kernel kernel = make_kernel(plan.config.kernel);

    struct Job {
        std::string src_ref;
        std::string dst_ref;
        const PoisonEntry* entry = nullptr;
    };
    std::vector<Job> jobs;
    std::set<std::string> queued;
    for (auto& scene : result.dataset.scenes) {
        const PoisonEntry* entry = plan.find(scene.scene_id);
        for (CameraView v : kAllViews) {
            auto& ref = scene.images[view_index(v)];
            if (entry && entry->view == v) {
                Job job{ref, poisoned_ref(ref), entry};
                ref = job.dst_ref;
                jobs.push_back(std::move(job));
            } else if (queued.insert(ref).second) {
                jobs.push_back({ref, ref, nullptr});
            }
        }
        if (entry && options.mutate_labels) {
            for (auto& qa : scene.qa) qa.answer = apply_prefix(qa.answer, entry->prefix);
        }
        result.provenance.scenes.emplace_back(scene.scene_id, entry != nullptr);
    }
    for (const auto& e : plan.entries) {
        result.provenance.entries.push_back(
            {e.scene_id, e.view, e.asset_id, library.get(e.asset_id).category, e.alpha, e.prefix});
    }

    std::filesystem::remove_all(images_dir);
    std::filesystem::create_directories(images_dir);
    detail::parallel_for(jobs.size(), options.jobs, [&](std::size_t i) {
        const Job& job = jobs[i];
        const auto src = train.root / job.src_ref;
        const auto dst = images_dir / job.dst_ref;
        std::error_code ec;
        std::filesystem::create_directories(dst.parent_path(), ec);
        if (!job.entry) {
            std::filesystem::copy_file(src, dst, std::filesystem::copy_options::overwrite_existing, ec);
            if (ec) throw IoError("cannot copy " + src.string() + ": " + ec.message());
            return;
        }
        const Image original = load_image(src);
        const Image poisoned =
            blend(original, triggers.at(job.entry->asset_id), kernel, BlendAlpha{job.entry->alpha});
        save_png(poisoned, dst);
    });

    write_manifest(result.dataset, out_dir / "manifest.json", "images");
    write_text(out_dir / "plan.json", plan_to_json(plan));
    write_text(out_dir / "provenance.json", provenance_to_json(result.provenance));
    return result;
}

PoisonedDataset load_poisoned(const std::filesystem::path& dir) {
    PoisonedDataset out;
    out.dataset = load_manifest(dir / "manifest.json");
    out.plan = plan_from_json(read_text(dir / "plan.json"));
    out.provenance = read_provenance(dir / "provenance.json");
    return out;
}

}  // namespace glint
