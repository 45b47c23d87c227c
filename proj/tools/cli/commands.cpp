#include "commands.hpp"

#include "campaign_file.hpp"

#include "glint/errors.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

namespace glint::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct CommonFlags {
    std::string campaign;
    std::string manifest, view, category, prefix, kernel, endpoint, assets, out;
    double rate = 0.0, stub = 0.0;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::vector<std::vector<CLI::Option*>> opts;  // one set per subcommand

    void attach(CLI::App& app) {
        app.add_option("--campaign", campaign, "Campaign file (JSON)");
        opts.push_back({
            app.add_option("--manifest", manifest, "Dataset manifest"),
            app.add_option("--rate", rate, "Poison rate in (0, 1]"),
            app.add_option("--view", view, "Target camera view"),
            app.add_option("--category", category, "Trigger object category"),
            app.add_option("--prefix", prefix, "funny_story or model_update"),
            app.add_option("--kernel", kernel, "delta | focal_blur:SIGMA:SIZE | ghost:OFFSET:A:B"),
            app.add_option("--seed", seed, "Master seed"),
            app.add_option("--endpoint", endpoint, "Model endpoint URL"),
            app.add_option("--stub", stub, "Use the stub model with this activation probability"),
            app.add_option("--jobs", jobs, "Parallelism budget"),
            app.add_option("--out", out, "Output directory"),
            app.add_option("--assets", assets, "Trigger asset library directory"),
        });
    }

    Overrides collect() const {
        Overrides o;
        auto given = [this](std::size_t i) {
            return std::any_of(opts.begin(), opts.end(), [i](const auto& set) { return set[i]->count() > 0; });
        };
        if (given(0)) o.manifest = manifest;
        if (given(1)) o.rate = rate;
        if (given(2)) o.view = view;
        if (given(3)) o.category = category;
        if (given(4)) o.prefix = prefix;
        if (given(5)) o.kernel = kernel;
        if (given(6)) o.seed = seed;
        if (given(7)) o.endpoint = endpoint;
        if (given(8)) o.stub = stub;
        if (given(9)) o.jobs = jobs;
        if (given(10)) o.out = out;
        if (given(11)) o.assets = assets;
        return o;
    }

    CampaignFile load() const {
        CampaignFile f;
        f.evaluator.config.prompt_template = std::string(kDefaultJudgePrompt);
        if (!campaign.empty()) f = load_campaign(campaign);
        apply_overrides(f, collect());
        finalize(f);
        return f;
    }
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

fs::path reports_dir(const CampaignFile& f) { return f.out / "reports" / f.name; }

void write_meta(const CampaignFile& f, std::string_view command) {
    ojson meta{{"campaign", f.name},
               {"command", command},
               {"seed", f.seed},
               {"created_utc", utc_now()},
               {"tool_version", "0.1.0"}};
    write_text(reports_dir(f) / "meta.json", meta.dump(2) + "\n");
}

Campaign make_campaign(const CampaignFile& f) {
    auto [train, test] = load_splits(f);
    if (f.assets.empty()) throw ValidationError("no trigger asset library given (--assets)");
    return Campaign(std::move(train), std::move(test), TriggerLibrary::load(f.assets), f.out / "work",
                    make_client_factory(f), make_evaluator(f), f.seed, make_settings(f));
}

std::string describe(const ConditionReport& r) {
    std::ostringstream line;
    const auto& s = r.summary;
    line << r.key.name() << ": " << s.clean_count << " clean, " << s.triggered_count << " triggered";
    const auto cell = table_cell(s);
    line << ", GPT " << format_fixed(cell.gpt, 2) << ", Final " << format_fixed(cell.final_pct, 2);
    if (s.asr) line << ", ASR " << format_fixed(*s.asr, 2);
    if (s.clean) line << ", accuracy " << format_fixed(s.clean->s_acc, 4);
    if (s.latency) line << ", latency +" << format_fixed(s.latency->delta(), 1) << " words";
    return line.str();
}

void write_reports(const CampaignFile& f, const std::vector<ConditionReport>& reports) {
    std::vector<std::pair<std::string, LatencyReport>> latency;
    for (const auto& r : reports) {
        write_condition_report(r, reports_dir(f) / r.key.name());
        if (r.summary.latency) latency.emplace_back(r.key.name(), *r.summary.latency);
    }
    if (!latency.empty()) write_text(reports_dir(f) / "latency.txt", render_latency(latency));
}

// ---------------------------------------------------------------------------

int cmd_validate(const CommonFlags& flags, std::ostream& out) {
    std::vector<fs::path> manifests;
    if (!flags.manifest.empty()) {
        manifests.push_back(flags.manifest);
    } else {
        if (flags.campaign.empty()) throw ValidationError("validate needs --manifest or --campaign");
        const auto f = load_campaign(flags.campaign);
        for (const auto& p : {f.dataset.manifest, f.dataset.train_manifest, f.dataset.test_manifest}) {
            if (!p.empty()) manifests.push_back(p);
        }
        if (manifests.empty()) throw ValidationError("campaign file names no manifest");
    }
    int status = kOk;
    for (const auto& path : manifests) {
        const Dataset ds = parse_manifest(read_text(path), fs::absolute(path).parent_path());
        const auto diagnostics = validate_dataset(ds, true);
        for (const auto& d : diagnostics) {
            out << path.string() << ": " << (d.scene_id.empty() ? "<dataset>" : d.scene_id) << ": " << d.message
                << "\n";
        }
        if (diagnostics.empty()) {
            out << path.string() << ": ok (" << ds.scenes.size() << " scenes, " << ds.qa_count() << " QA pairs)\n";
        } else {
            status = kValidation;
        }
    }
    return status;
}

int cmd_poison(const CommonFlags& flags, std::ostream& out) {
    const CampaignFile f = flags.load();
    if (f.assets.empty()) throw ValidationError("no trigger asset library given (--assets)");
    const auto [train, test] = load_splits(f);
    const TriggerLibrary library = TriggerLibrary::load(f.assets);
    const PoisonPlan plan = plan_poison(train, f.campaign, library);

    const fs::path plan_file = f.out / "plan.json";
    std::string verdict = "new plan";
    if (fs::exists(plan_file)) {
        verdict = same_entries(plan_from_json(read_text(plan_file)), plan) ? "plan identical" : "plan changed";
    }
    ExecuteOptions opts;
    opts.jobs = f.jobs;
    execute_plan(train, plan, library, f.out, opts);

    const auto& c = f.campaign;
    out << "poisoned " << plan.entries.size() << " of " << train.scenes.size() << " scenes (rate "
        << format_fixed(c.poison_rate, 2) << ", view " << to_string(c.target_view) << ", category "
        << to_string(c.trigger_category) << ", prefix " << to_string(c.prefix) << ", kernel "
        << to_string(c.kernel) << ")\n";
    out << verdict << "\n";
    out << "wrote " << f.out.string() << "\n";
    return kOk;
}

int cmd_serve_stub(const CommonFlags& flags, const std::string& host, int port, std::ostream& out) {
    CampaignFile f = flags.load();
    if (!f.stub) f.stub = StubSpec{};
    f.model.reset();
    Campaign campaign = make_campaign(f);
    if (campaign.test().scenes.empty()) throw ValidationError("serve-stub needs a test split");

    auto knowledge = std::make_shared<StubKnowledge>();
    knowledge->add(campaign.test());
    const auto& c = f.campaign;
    knowledge->add(campaign.triggered_test(c.target_view, c.trigger_category, c.kernel).dataset,
                   &campaign.triggered_test(c.target_view, c.trigger_category, c.kernel).provenance);
    for (CameraView v : f.transfer.test_views) {
        const auto& t = campaign.triggered_test(v, c.trigger_category, c.kernel);
        knowledge->add(t.dataset, &t.provenance);
    }
    for (Category cat : f.transfer.test_categories) {
        const auto& t = campaign.triggered_test(c.target_view, cat, c.kernel);
        knowledge->add(t.dataset, &t.provenance);
    }
    auto client = std::make_shared<StubModelClient>(stub_config_for(*f.stub, c, f.seed), knowledge);
    ModelServer server(client);
    out << "serving stub for " << ConditionKey::from(c).name() << " on http://" << host << ":" << port
        << "/infer\n"
        << std::flush;
    server.listen(host, port);
    return kOk;
}

int cmd_evaluate(const CommonFlags& flags, std::ostream& out) {
    const CampaignFile f = flags.load();
    Campaign campaign = make_campaign(f);
    auto report = campaign.run_condition(f.campaign);
    write_reports(f, {report});
    write_meta(f, "evaluate");
    out << describe(report) << "\n";
    out << "wrote " << reports_dir(f).string() << "\n";
    return kOk;
}

int cmd_ablate(const CommonFlags& flags, std::ostream& out) {
    const CampaignFile f = flags.load();
    Campaign campaign = make_campaign(f);
    auto sweep = ablation_rates(campaign, f.campaign, f.ablation.rates, f.ablation.categories, f.ablation.prefixes);
    write_reports(f, sweep.reports);
    const auto table = render_rate_table(sweep.table);
    write_text(reports_dir(f) / "ablation.txt", table);
    write_text(reports_dir(f) / "ablation.csv", rate_table_to_csv(sweep.table));
    write_meta(f, "ablate");
    out << table;
    out << "wrote " << reports_dir(f).string() << "\n";
    return kOk;
}

int cmd_transfer(const CommonFlags& flags, std::ostream& out) {
    const CampaignFile f = flags.load();
    Campaign campaign = make_campaign(f);
    std::vector<ConditionReport> reports;
    ASRMatrix matrix;
    std::string stem;
    if (f.transfer.objects) {
        auto rows = f.transfer.train_categories;
        if (rows.empty()) rows = {f.campaign.trigger_category};
        matrix = transfer_matrix_objects(campaign, f.campaign, rows, f.transfer.test_categories, &reports);
        stem = "transfer_objects";
    } else {
        auto rows = f.transfer.train_views;
        if (rows.empty()) rows = {f.campaign.target_view};
        matrix = transfer_matrix_views(campaign, f.campaign, rows, f.transfer.test_views, &reports);
        stem = "transfer_views";
    }
    write_reports(f, reports);
    const auto text = render_matrix(matrix);
    write_text(reports_dir(f) / (stem + ".txt"), text);
    write_text(reports_dir(f) / (stem + ".csv"), matrix_to_csv(matrix));
    write_meta(f, "transfer");
    out << text;
    out << "wrote " << reports_dir(f).string() << "\n";
    return kOk;
}

ConditionKey key_from_summary(const nlohmann::json& j) {
    ConditionKey k;
    k.category = category_from_string(j.at("category").get<std::string>());
    k.prefix = prefix_from_string(j.at("prefix").get<std::string>());
    k.view = view_from_string(j.at("view").get<std::string>());
    k.poison_rate = j.at("poison_rate").get<double>();
    k.test_view = view_from_string(j.at("test_view").get<std::string>());
    k.test_category = category_from_string(j.at("test_category").get<std::string>());
    return k;
}

int cmd_report(const CommonFlags& flags, std::ostream& out, std::ostream& err) {
    const CampaignFile f = flags.load();
    const fs::path dir = reports_dir(f);
    if (!fs::is_directory(dir)) throw IoError("no reports under " + dir.string());
    std::vector<fs::path> conditions;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "records.jsonl")) conditions.push_back(entry.path());
    }
    std::sort(conditions.begin(), conditions.end());
    if (conditions.empty()) throw ValidationError("no condition reports under " + dir.string());

    int status = kOk;
    std::string text;
    std::vector<std::pair<std::string, LatencyReport>> latency;
    for (const auto& cdir : conditions) {
        const auto records = records_from_jsonl(read_text(cdir / "records.jsonl"));
        const std::string stored = read_text(cdir / "summary.json");
        nlohmann::json stored_json;
        try {
            stored_json = nlohmann::json::parse(stored);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(cdir.string() + "/summary.json: " + e.what());
        }
        ConditionReport r;
        r.key = key_from_summary(stored_json);
        r.poisoned_train_scenes = stored_json.at("poisoned_train_scenes").get<std::size_t>();
        r.records = records;
        r.summary = summarize(r.records);
        if (summary_to_json(r.key, r.summary, r.poisoned_train_scenes) != stored) {
            err << "summary does not match records: " << cdir.string() << "\n";
            status = kValidation;
        }
        text += describe(r) + "\n";
        if (r.summary.latency) latency.emplace_back(r.key.name(), *r.summary.latency);
    }
    if (!latency.empty()) text += "\n" + render_latency(latency);
    write_text(dir / "report.txt", text);
    write_meta(f, "report");
    out << text;
    return status;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reflection-trigger latency backdoor toolkit for multi-view driving VQA"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string host = "127.0.0.1";
    int port = 8080;
    auto* validate_cmd = app.add_subcommand("validate", "Check a dataset manifest");
    auto* poison_cmd = app.add_subcommand("poison", "Plan and write a poisoned training set");
    auto* serve_cmd = app.add_subcommand("serve-stub", "Serve a stub backdoored model over HTTP");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate one condition");
    auto* ablate_cmd = app.add_subcommand("ablate", "Poison-rate ablation table");
    auto* transfer_cmd = app.add_subcommand("transfer", "View or object transfer matrix");
    auto* report_cmd = app.add_subcommand("report", "Recompute summaries from stored records");
    for (auto* sub : {validate_cmd, poison_cmd, serve_cmd, evaluate_cmd, ablate_cmd, transfer_cmd, report_cmd}) {
        flags.attach(*sub);
    }
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kValidation;
    }

    try {
        if (*validate_cmd) return cmd_validate(flags, out);
        if (*poison_cmd) return cmd_poison(flags, out);
        if (*serve_cmd) return cmd_serve_stub(flags, host, port, out);
        if (*evaluate_cmd) return cmd_evaluate(flags, out);
        if (*ablate_cmd) return cmd_ablate(flags, out);
        if (*transfer_cmd) return cmd_transfer(flags, out);
        if (*report_cmd) return cmd_report(flags, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::Validation: return kValidation;
            case ErrorKind::Io: return kIo;
            case ErrorKind::Transport:
            case ErrorKind::Protocol: return kTransport;
        }
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    }
    return kValidation;
}

}  // namespace glint::cli
