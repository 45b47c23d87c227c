#include "campaign_file.hpp"

#include "glint/errors.hpp"
#include "glint/seed.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace glint::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    return it->get<T>();
}

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ValidationError(std::string(where) + " must be an object");
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw ValidationError("unknown field " + std::string(where) + "." + item.key());
        }
    }
}

std::vector<CameraView> views_of(const json& arr) {
    std::vector<CameraView> out;
    for (const auto& v : arr) out.push_back(view_from_string(v.get<std::string>()));
    return out;
}

std::vector<Category> categories_of(const json& arr) {
    std::vector<Category> out;
    for (const auto& v : arr) out.push_back(category_from_string(v.get<std::string>()));
    return out;
}

void parse_dataset(const json& j, const fs::path& base, DatasetSource& d) {
    check_keys(j, "dataset", {"manifest", "train_fraction", "train_manifest", "test_manifest"});
    d.manifest = resolve(base, get_or<std::string>(j, "manifest", ""));
    if (j.contains("train_fraction")) d.train_fraction = j.at("train_fraction").get<double>();
    d.train_manifest = resolve(base, get_or<std::string>(j, "train_manifest", ""));
    d.test_manifest = resolve(base, get_or<std::string>(j, "test_manifest", ""));
}

void parse_condition(const json& j, CampaignConfig& c) {
    check_keys(j, "campaign", {"rate", "view", "category", "prefix", "kernel"});
    c.poison_rate = get_or(j, "rate", c.poison_rate);
    if (j.contains("view")) c.target_view = view_from_string(j.at("view").get<std::string>());
    if (j.contains("category")) c.trigger_category = category_from_string(j.at("category").get<std::string>());
    if (j.contains("prefix")) c.prefix = prefix_from_string(j.at("prefix").get<std::string>());
    if (j.contains("kernel")) c.kernel = parse_kernel_spec(j.at("kernel").get<std::string>());
}

ModelSpec parse_model(const json& j) {
    check_keys(j, "model", {"endpoint", "endpoints", "timeout_ms", "retries", "backoff_ms", "images"});
    ModelSpec m;
    m.endpoint = get_or<std::string>(j, "endpoint", "");
    if (j.contains("endpoints")) {
        for (const auto& [k, v] : j.at("endpoints").items()) m.endpoints[k] = v.get<std::string>();
    }
    m.timeout_ms = get_or(j, "timeout_ms", m.timeout_ms);
    m.retries = get_or(j, "retries", m.retries);
    m.backoff_ms = get_or(j, "backoff_ms", m.backoff_ms);
    const auto images = get_or<std::string>(j, "images", "path");
    if (images == "path") {
        m.images = ImageTransport::Path;
    } else if (images == "base64") {
        m.images = ImageTransport::Base64;
    } else {
        throw ValidationError("model.images must be \"path\" or \"base64\"");
    }
    return m;
}

StubSpec parse_stub(const json& j) {
    check_keys(j, "stub", {"activation_probability", "cross_view", "cross_category", "coupled_categories",
                           "coupling", "rate_gain", "seed"});
    StubSpec s;
    s.activation_probability = get_or(j, "activation_probability", s.activation_probability);
    s.cross_view = get_or(j, "cross_view", s.cross_view);
    s.cross_category = get_or(j, "cross_category", s.cross_category);
    s.coupling = get_or(j, "coupling", s.coupling);
    if (j.contains("coupled_categories")) {
        for (const auto& pair : j.at("coupled_categories")) {
            if (!pair.is_array() || pair.size() != 2) {
                throw ValidationError("stub.coupled_categories entries must be [category, category]");
            }
            s.coupled_categories.emplace_back(category_from_string(pair[0].get<std::string>()),
                                              category_from_string(pair[1].get<std::string>()));
        }
    }
    if (j.contains("rate_gain")) s.rate_gain = j.at("rate_gain").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

EvaluatorSpec parse_evaluator(const json& j) {
    check_keys(j, "evaluator", {"mode", "endpoint", "model", "prompt_template", "token_env", "timeout_ms"});
    EvaluatorSpec e;
    const auto mode = get_or<std::string>(j, "mode", "fallback");
    if (mode == "remote") {
        e.remote = true;
    } else if (mode != "fallback") {
        throw ValidationError("evaluator.mode must be \"fallback\" or \"remote\"");
    }
    e.config.endpoint = get_or<std::string>(j, "endpoint", "");
    e.config.model = get_or(j, "model", e.config.model);
    e.config.prompt_template = get_or<std::string>(j, "prompt_template", std::string(kDefaultJudgePrompt));
    e.config.token_env = get_or(j, "token_env", e.config.token_env);
    e.config.timeout = std::chrono::milliseconds(get_or<long>(j, "timeout_ms", e.config.timeout.count()));
    return e;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

CampaignFile parse_campaign(std::string_view text, const fs::path& base_dir) {
    CampaignFile f;
    f.evaluator.config.prompt_template = std::string(kDefaultJudgePrompt);
    try {
        const json j = json::parse(text);
        check_keys(j, "campaign file",
                   {"name", "seed", "dataset", "assets", "campaign", "model", "stub", "evaluator",
                    "evaluate_clean", "evaluate_triggered", "ablation", "transfer", "jobs", "out"});
        f.name = get_or(j, "name", f.name);
        f.seed = get_or<std::uint64_t>(j, "seed", 0);
        if (j.contains("dataset")) parse_dataset(j.at("dataset"), base_dir, f.dataset);
        f.assets = resolve(base_dir, get_or<std::string>(j, "assets", ""));
        if (j.contains("campaign")) parse_condition(j.at("campaign"), f.campaign);
        if (j.contains("model")) f.model = parse_model(j.at("model"));
        if (j.contains("stub")) f.stub = parse_stub(j.at("stub"));
        if (j.contains("evaluator")) f.evaluator = parse_evaluator(j.at("evaluator"));
        f.evaluate_clean = get_or(j, "evaluate_clean", true);
        f.evaluate_triggered = get_or(j, "evaluate_triggered", true);
        if (j.contains("ablation")) {
            const auto& a = j.at("ablation");
            check_keys(a, "ablation", {"rates", "categories", "prefixes"});
            if (a.contains("rates")) f.ablation.rates = a.at("rates").get<std::vector<double>>();
            if (a.contains("categories")) f.ablation.categories = categories_of(a.at("categories"));
            if (a.contains("prefixes")) {
                for (const auto& p : a.at("prefixes")) f.ablation.prefixes.push_back(prefix_from_string(p.get<std::string>()));
            }
        }
        if (j.contains("transfer")) {
            const auto& t = j.at("transfer");
            check_keys(t, "transfer", {"mode", "train_views", "test_views", "train_categories", "test_categories"});
            const auto mode = get_or<std::string>(t, "mode", "views");
            if (mode != "views" && mode != "objects") {
                throw ValidationError("transfer.mode must be \"views\" or \"objects\"");
            }
            f.transfer.objects = mode == "objects";
            if (t.contains("train_views")) f.transfer.train_views = views_of(t.at("train_views"));
            if (t.contains("test_views")) f.transfer.test_views = views_of(t.at("test_views"));
            if (t.contains("train_categories")) f.transfer.train_categories = categories_of(t.at("train_categories"));
            if (t.contains("test_categories")) f.transfer.test_categories = categories_of(t.at("test_categories"));
        }
        f.jobs = get_or(j, "jobs", 1u);
        f.out = resolve(base_dir, get_or<std::string>(j, "out", "out"));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("campaign file: ") + e.what());
    }
    return f;
}

CampaignFile load_campaign(const fs::path& path) {
    return parse_campaign(read_text(path), fs::absolute(path).parent_path());
}

void apply_overrides(CampaignFile& f, const Overrides& o) {
    const fs::path cwd = fs::current_path();
    if (o.manifest) {
        f.dataset.manifest = resolve(cwd, *o.manifest);
        f.dataset.train_manifest.clear();
        f.dataset.test_manifest.clear();
    }
    if (o.rate) f.campaign.poison_rate = *o.rate;
    if (o.view) f.campaign.target_view = view_from_string(*o.view);
    if (o.category) f.campaign.trigger_category = category_from_string(*o.category);
    if (o.prefix) f.campaign.prefix = prefix_from_string(*o.prefix);
    if (o.kernel) f.campaign.kernel = parse_kernel_spec(*o.kernel);
    if (o.seed) f.seed = *o.seed;
    if (o.endpoint) {
        if (!f.model) f.model = ModelSpec{};
        f.model->endpoint = *o.endpoint;
        f.model->endpoints.clear();
        f.stub.reset();
    }
    if (o.stub) {
        if (!f.stub) f.stub = StubSpec{};
        f.stub->activation_probability = *o.stub;
        f.stub->rate_gain.reset();
        f.model.reset();
    }
    if (o.assets) f.assets = resolve(cwd, *o.assets);
    if (o.jobs) f.jobs = *o.jobs;
    if (o.out) f.out = resolve(cwd, *o.out);
}

void finalize(CampaignFile& f) {
    if (f.jobs == 0) throw ValidationError("jobs must be at least 1");
    if (f.name.empty() || f.name.find('/') != std::string::npos) {
        throw ValidationError("campaign name must be non-empty and contain no '/'");
    }
    f.campaign.seed = derive_seed(f.seed, {"poison"});
    validate(f.campaign);
    if (f.stub) {
        const auto& s = *f.stub;
        for (double v : {s.activation_probability, s.cross_view, s.cross_category, s.coupling}) {
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("stub probabilities must lie in [0, 1]");
        }
        if (s.rate_gain && !(*s.rate_gain >= 0.0)) throw ValidationError("stub.rate_gain must be >= 0");
    }
}

std::pair<Dataset, Dataset> load_splits(const CampaignFile& f) {
    const auto& d = f.dataset;
    if (!d.train_manifest.empty() || !d.test_manifest.empty()) {
        if (d.train_manifest.empty() || d.test_manifest.empty()) {
            throw ValidationError("dataset needs both train_manifest and test_manifest");
        }
        Dataset train = load_manifest(d.train_manifest);
        Dataset test = load_manifest(d.test_manifest);
        train.split = Split::Train;
        test.split = Split::Test;
        return {std::move(train), std::move(test)};
    }
    if (d.manifest.empty()) throw ValidationError("no dataset manifest given");
    Dataset all = load_manifest(d.manifest);
    if (!d.train_fraction) {
        all.split = Split::Train;
        Dataset test;
        test.split = Split::Test;
        test.root = all.root;
        return {std::move(all), std::move(test)};
    }
    return split_dataset(all, *d.train_fraction, f.seed);
}

StubModelConfig stub_config_for(const StubSpec& spec, const CampaignConfig& trained_on, std::uint64_t master_seed) {
    double p = spec.activation_probability;
    if (spec.rate_gain) p = std::min(1.0, *spec.rate_gain * trained_on.poison_rate);
    StubModelConfig c;
    c.prefix = trained_on.prefix;
    c.seed = spec.seed ? *spec.seed : derive_seed(master_seed, {"stub"});
    for (CameraView v : kAllViews) {
        const double pv = v == trained_on.target_view ? p : p * spec.cross_view;
        c.activation_probability[view_index(v)] = pv;
        if (pv > 0.0) c.sensitive_views.insert(v);
    }
    for (Category cat : kAllCategories) {
        double w = spec.cross_category;
        if (cat == trained_on.trigger_category) {
            w = 1.0;
        } else {
            for (const auto& [a, b] : spec.coupled_categories) {
                if ((a == cat && b == trained_on.trigger_category) || (b == cat && a == trained_on.trigger_category)) {
                    w = spec.coupling;
                }
            }
        }
        c.category_weight[static_cast<std::size_t>(cat)] = w;
    }
    return c;
}

ClientFactory make_client_factory(const CampaignFile& f) {
    if (f.stub) {
        const StubSpec spec = *f.stub;
        const std::uint64_t master = f.seed;
        return [spec, master](const CampaignConfig& trained_on, std::shared_ptr<const StubKnowledge> knowledge) {
            return std::make_shared<StubModelClient>(stub_config_for(spec, trained_on, master), std::move(knowledge));
        };
    }
    if (f.model) {
        const ModelSpec spec = *f.model;
        return [spec](const CampaignConfig& trained_on,
                      std::shared_ptr<const StubKnowledge>) -> std::shared_ptr<ModelClient> {
            std::string endpoint = spec.endpoint;
            if (auto it = spec.endpoints.find(ConditionKey::from(trained_on).name()); it != spec.endpoints.end()) {
                endpoint = it->second;
            }
            if (endpoint.empty()) return nullptr;
            HttpClientConfig cfg;
            cfg.endpoint = endpoint;
            cfg.timeout = std::chrono::milliseconds(spec.timeout_ms);
            cfg.transport = spec.images;
            return std::make_shared<HttpModelClient>(cfg);
        };
    }
    throw ValidationError("campaign needs a model endpoint (--endpoint) or a stub (--stub)");
}

std::shared_ptr<Evaluator> make_evaluator(const CampaignFile& f) {
    if (f.evaluator.remote) return std::make_shared<RemoteEvaluator>(f.evaluator.config);
    return std::make_shared<FallbackEvaluator>();
}

EvalSettings make_settings(const CampaignFile& f) {
    EvalSettings s;
    s.jobs = f.jobs;
    s.evaluate_clean = f.evaluate_clean;
    s.evaluate_triggered = f.evaluate_triggered;
    if (f.model) {
        s.retry.max_retries = f.model->retries;
        s.retry.backoff = std::chrono::milliseconds(f.model->backoff_ms);
    }
    return s;
}

}  // namespace glint::cli
