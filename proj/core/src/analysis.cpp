#include "glint/analysis.hpp"

#include "glint/errors.hpp"
#include "glint/seed.hpp"
#include "parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace glint {

using json = nlohmann::ordered_json;

namespace {

std::string rate_label(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::round(rate * 100.0 * 1e6) / 1e6);
    return buf;
}

std::string_view prefix_title(PrefixVariant p) {
    return p == PrefixVariant::FunnyStory ? "Funny Story" : "Model Update";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

/// Left-aligned text grid. Header levels are lists of (label, first leaf
/// column, span); a label wider than its span widens the span's last column.
struct Grid {
    struct Group {
        std::string label;
        std::size_t first;
        std::size_t span;
    };
    std::vector<std::vector<Group>> group_levels;  // top level first
    std::vector<std::string> leaf_header;
    std::vector<std::vector<std::string>> rows;

    std::string render() const {
        constexpr std::size_t kGap = 2;
        std::vector<std::size_t> width(leaf_header.size(), 0);
        for (std::size_t j = 0; j < leaf_header.size(); ++j) width[j] = leaf_header[j].size();
        for (const auto& row : rows) {
            for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
        }
        for (auto level = group_levels.rbegin(); level != group_levels.rend(); ++level) {
            for (const auto& g : *level) {
                std::size_t span_width = kGap * (g.span - 1);
                for (std::size_t j = g.first; j < g.first + g.span; ++j) span_width += width[j];
                if (g.label.size() > span_width) width[g.first + g.span - 1] += g.label.size() - span_width;
            }
        }
        std::string out;
        auto finish_line = [&out](std::string line) {
            while (!line.empty() && line.back() == ' ') line.pop_back();
            out += line;
            out += '\n';
        };
        auto pad = [](std::string s, std::size_t w) {
            s.resize(std::max(w, s.size()), ' ');
            return s;
        };
        for (const auto& level : group_levels) {
            std::string line;
            std::size_t col = 0;
            for (const auto& g : level) {
                for (; col < g.first; ++col) line += pad("", width[col] + kGap);
                std::size_t span_width = kGap * g.span;
                for (std::size_t j = g.first; j < g.first + g.span; ++j) span_width += width[j];
                line += pad(g.label, span_width);
                col = g.first + g.span;
            }
            finish_line(line);
        }
        auto emit_row = [&](const std::vector<std::string>& cells) {
            std::string line;
            for (std::size_t j = 0; j < cells.size(); ++j) line += pad(cells[j], width[j] + kGap);
            finish_line(line);
        };
        emit_row(leaf_header);
        for (const auto& row : rows) emit_row(row);
        return out;
    }
};

json bundle_json(const std::optional<MetricBundle>& b) {
    if (!b) return nullptr;
    return json{{"s_gpt", b->s_gpt}, {"s_lang", b->s_lang}, {"s_match", b->s_match}, {"s_acc", b->s_acc}};
}

template <class T>
json opt_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::vector<std::string> cell_strings(const TableCell* cell) {
    if (!cell) return {"-", "-", "-"};
    return {format_fixed(cell->gpt, 2), format_fixed(cell->final_pct, 2),
            cell->asr ? format_fixed(*cell->asr, 2) : "-"};
}

}  // namespace

// ---------------------------------------------------------------------------

ConditionKey ConditionKey::from(const CampaignConfig& config) {
    return {config.trigger_category, config.prefix,      config.target_view,
            config.poison_rate,      config.target_view, config.trigger_category};
}

std::string ConditionKey::name() const {
    std::string out = std::string(to_string(category)) + "-" + std::string(to_string(prefix)) + "-" +
                      std::string(to_string(view)) + "-r" + rate_label(poison_rate);
    if (test_view != view || test_category != category) {
        out += "-to-" + std::string(to_string(test_view)) + "-" + std::string(to_string(test_category));
    }
    return out;
}

LatencyReport latency_report(std::span<const EvalRecord> clean, std::span<const EvalRecord> triggered) {
    if (clean.empty() || triggered.empty()) {
        throw ValidationError("latency report needs clean and triggered records");
    }
    auto mean_words = [](std::span<const EvalRecord> rs) {
        double total = 0.0;
        for (const auto& r : rs) total += static_cast<double>(word_count(r.model_answer));
        return total / static_cast<double>(rs.size());
    };
    return {mean_words(clean), mean_words(triggered)};
}

ConditionSummary summarize(std::span<const ScoredRecord> records, const FinalScoreWeights& weights) {
    std::vector<EvalRecord> clean, triggered;
    std::vector<RecordScores> clean_scores, triggered_scores;
    for (const auto& r : records) {
        (r.record.triggered ? triggered : clean).push_back(r.record);
        (r.record.triggered ? triggered_scores : clean_scores).push_back(r.scores);
    }
    ConditionSummary s;
    s.clean_count = clean.size();
    s.triggered_count = triggered.size();
    if (!clean.empty()) {
        s.clean = aggregate(clean_scores);
        s.clean_final = final_score(*s.clean, weights);
    }
    if (!triggered.empty()) {
        s.triggered = aggregate(triggered_scores);
        s.triggered_final = final_score(*s.triggered, weights);
        s.asr = compute_asr(triggered);
    }
    if (!clean.empty() && !triggered.empty()) s.latency = latency_report(clean, triggered);
    return s;
}

// ---------------------------------------------------------------------------

Campaign::Campaign(Dataset train, Dataset test, TriggerLibrary library, std::filesystem::path work_dir,
                   ClientFactory factory, std::shared_ptr<Evaluator> evaluator, std::uint64_t master_seed,
                   EvalSettings settings)
    : train_(std::move(train)),
      test_(std::move(test)),
      library_(std::move(library)),
      work_dir_(std::move(work_dir)),
      factory_(std::move(factory)),
      evaluator_(std::move(evaluator)),
      master_seed_(master_seed),
      settings_(settings) {
    if (!evaluator_) throw ValidationError("campaign needs an evaluator");
    if (!factory_) throw ValidationError("campaign needs a model client factory");
}

const PoisonedDataset& Campaign::triggered_test(CameraView view, Category category, const KernelSpec& kernel) {
    std::string kernel_tag = to_string(kernel);
    std::replace(kernel_tag.begin(), kernel_tag.end(), ':', '_');
    const std::string name =
        std::string(to_string(view)) + "-" + std::string(to_string(category)) + "-" + kernel_tag;
    if (auto it = triggered_cache_.find(name); it != triggered_cache_.end()) return it->second;

    CampaignConfig cfg;
    cfg.poison_rate = 1.0;
    cfg.target_view = view;
    cfg.trigger_category = category;
    cfg.kernel = kernel;
    cfg.seed = derive_seed(master_seed_, {"test.triggers"});
    const auto plan = plan_poison(test_, cfg, library_);
    ExecuteOptions opts;
    opts.mutate_labels = false;
    opts.jobs = settings_.jobs;
    auto poisoned = execute_plan(test_, plan, library_, work_dir_ / "triggered" / name, opts);
    return triggered_cache_.emplace(name, std::move(poisoned)).first->second;
}

ConditionReport Campaign::run_condition(const CampaignConfig& config) {
    return run_condition(config, config.target_view, config.trigger_category);
}

ConditionReport Campaign::run_condition(const CampaignConfig& config, CameraView test_view,
                                        Category test_category) {
    return run(config, test_view, test_category, settings_.evaluate_clean, settings_.evaluate_triggered);
}

ConditionReport Campaign::run_triggered(const CampaignConfig& config, CameraView test_view,
                                        Category test_category) {
    return run(config, test_view, test_category, false, true);
}

ConditionReport Campaign::run(const CampaignConfig& config, CameraView test_view, Category test_category,
                              bool clean, bool with_triggers) {
    if (!clean && !with_triggers) throw ValidationError("nothing to evaluate: clean and triggered inputs disabled");
    validate(config);
    if (test_.scenes.empty()) throw ValidationError("test split is empty");
    ConditionReport report;
    report.key = ConditionKey::from(config);
    report.key.test_view = test_view;
    report.key.test_category = test_category;

    // The poisoned training set is the artifact a real model is fine-tuned on.
    const std::string train_name = ConditionKey::from(config).name();
    auto done = poisoned_train_.find(train_name);
    if (done == poisoned_train_.end()) {
        ExecuteOptions train_opts;
        train_opts.jobs = settings_.jobs;
        const auto plan = plan_poison(train_, config, library_);
        execute_plan(train_, plan, library_, work_dir_ / "poisoned" / train_name, train_opts);
        done = poisoned_train_.emplace(train_name, plan.entries.size()).first;
    }
    report.poisoned_train_scenes = done->second;

    auto knowledge = std::make_shared<StubKnowledge>();
    knowledge->add(test_);
    const PoisonedDataset* triggered = nullptr;
    if (with_triggers) {
        triggered = &triggered_test(test_view, test_category, config.kernel);
        knowledge->add(triggered->dataset, &triggered->provenance);
    }
    auto client = factory_(config, knowledge);
    if (!client) {
        throw ValidationError("no model client for training condition " + train_name);
    }

    std::vector<InferenceRequest> requests;
    std::vector<EvalRecord> records;
    auto add_requests = [&](const Dataset& ds, bool is_triggered) {
        for (std::size_t s = 0; s < ds.scenes.size(); ++s) {
            const Scene& scene = ds.scenes[s];
            const Scene& clean_scene = test_.scenes[s];
            for (std::size_t q = 0; q < scene.qa.size(); ++q) {
                InferenceRequest req;
                req.request_id = scene.scene_id + "/" + scene.qa[q].id + (is_triggered ? "/trig" : "/clean");
                req.question = scene.qa[q].question;
                for (CameraView v : kAllViews) req.images[view_index(v)] = ds.image_path(scene, v).string();
                EvalRecord rec;
                rec.request_id = req.request_id;
                rec.question = req.question;
                rec.reference_answer = clean_scene.qa[q].answer;
                rec.triggered = is_triggered;
                rec.prefix = config.prefix;
                requests.push_back(std::move(req));
                records.push_back(std::move(rec));
            }
        }
    };
    if (clean) add_requests(test_, false);
    if (triggered) add_requests(triggered->dataset, true);

    const auto responses = query_batch(*client, requests, settings_.retry, settings_.jobs);
    report.records.resize(records.size());
    detail::parallel_for(records.size(), settings_.jobs, [&](std::size_t i) {
        records[i].model_answer = responses[i].answer;
        report.records[i] = {records[i], score_record(records[i], *evaluator_)};
    });
    report.summary = summarize(report.records, settings_.weights);
    return report;
}

// ---------------------------------------------------------------------------

const TableCell* RateTable::cell(std::size_t rate_index, Category c, PrefixVariant p) const {
    auto it = cells.find({rate_index, c, p});
    return it == cells.end() ? nullptr : &it->second;
}

TableCell table_cell(const ConditionSummary& summary) {
    TableCell cell;
    const auto& bundle = summary.clean ? summary.clean : summary.triggered;
    const auto& final_value = summary.clean ? summary.clean_final : summary.triggered_final;
    if (bundle) cell.gpt = bundle->s_gpt;
    if (final_value) cell.final_pct = 100.0 * *final_value;
    cell.asr = summary.asr;
    return cell;
}

RateSweep ablation_rates(Campaign& campaign, const CampaignConfig& base, const std::vector<double>& rates,
                         std::vector<Category> categories, std::vector<PrefixVariant> prefixes) {
    if (rates.empty()) throw ValidationError("ablation needs at least one rate");
    for (double r : rates) {
        if (!(r > 0.0 && r <= 1.0)) throw ValidationError("ablation rates must lie in (0, 1]");
    }
    if (categories.empty()) categories = {base.trigger_category};
    if (prefixes.empty()) prefixes = {base.prefix};

    RateSweep sweep;
    sweep.table.rates = rates;
    sweep.table.categories = categories;
    sweep.table.prefixes = prefixes;
    for (Category c : categories) {
        for (PrefixVariant p : prefixes) {
            for (std::size_t i = 0; i < rates.size(); ++i) {
                CampaignConfig cfg = base;
                cfg.trigger_category = c;
                cfg.prefix = p;
                cfg.poison_rate = rates[i];
                auto report = campaign.run_condition(cfg);
                sweep.table.cells[{i, c, p}] = table_cell(report.summary);
                sweep.reports.push_back(std::move(report));
            }
        }
    }
    return sweep;
}

namespace {

template <class Label, class RunCell>
ASRMatrix transfer_matrix(const std::vector<Label>& rows, const std::vector<Label>& cols,
                          std::vector<ConditionReport>* reports, RunCell&& run_cell) {
    if (rows.empty() || cols.empty()) throw ValidationError("transfer matrix needs rows and columns");
    ASRMatrix m;
    for (const auto& r : rows) m.row_labels.emplace_back(to_string(r));
    for (const auto& c : cols) m.col_labels.emplace_back(to_string(c));
    for (const auto& r : rows) {
        std::vector<double> row;
        for (const auto& c : cols) {
            auto report = run_cell(r, c);
            row.push_back(report.summary.asr.value_or(0.0));
            if (reports) reports->push_back(std::move(report));
        }
        m.cells.push_back(std::move(row));
    }
    return m;
}

}  // namespace

ASRMatrix transfer_matrix_views(Campaign& campaign, const CampaignConfig& base,
                                const std::vector<CameraView>& train_views,
                                const std::vector<CameraView>& test_views,
                                std::vector<ConditionReport>* reports) {
    return transfer_matrix(train_views, test_views, reports, [&](CameraView r, CameraView c) {
        CampaignConfig cfg = base;
        cfg.target_view = r;
        return campaign.run_triggered(cfg, c, base.trigger_category);
    });
}

ASRMatrix transfer_matrix_objects(Campaign& campaign, const CampaignConfig& base,
                                  const std::vector<Category>& train_categories,
                                  const std::vector<Category>& test_categories,
                                  std::vector<ConditionReport>* reports) {
    return transfer_matrix(train_categories, test_categories, reports, [&](Category r, Category c) {
        CampaignConfig cfg = base;
        cfg.trigger_category = r;
        return campaign.run_triggered(cfg, base.target_view, c);
    });
}

// ---------------------------------------------------------------------------

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

std::string render_rate_table(const RateTable& t) {
    Grid g;
    g.leaf_header.push_back("Rate (%)");
    std::vector<Grid::Group> top, mid;
    std::size_t col = 1;
    for (Category c : t.categories) {
        top.push_back({std::string(to_string(c)), col, 3 * t.prefixes.size()});
        for (PrefixVariant p : t.prefixes) {
            mid.push_back({std::string(prefix_title(p)), col, 3});
            for (const char* h : {"GPT Score", "Final Score", "ASR"}) g.leaf_header.emplace_back(h);
            col += 3;
        }
    }
    g.group_levels = {top, mid};
    for (std::size_t i = 0; i < t.rates.size(); ++i) {
        std::vector<std::string> row{rate_label(t.rates[i])};
        for (Category c : t.categories) {
            for (PrefixVariant p : t.prefixes) {
                for (auto& s : cell_strings(t.cell(i, c, p))) row.push_back(std::move(s));
            }
        }
        g.rows.push_back(std::move(row));
    }
    return g.render();
}

std::string rate_table_to_csv(const RateTable& t) {
    std::string out = "rate";
    for (Category c : t.categories) {
        for (PrefixVariant p : t.prefixes) {
            for (const char* h : {"gpt", "final", "asr"}) {
                out += "," + std::string(to_string(c)) + "/" + std::string(to_string(p)) + "/" + h;
            }
        }
    }
    out += "\n";
    for (std::size_t i = 0; i < t.rates.size(); ++i) {
        out += rate_label(t.rates[i]);
        for (Category c : t.categories) {
            for (PrefixVariant p : t.prefixes) {
                for (const auto& s : cell_strings(t.cell(i, c, p))) out += "," + (s == "-" ? std::string() : s);
            }
        }
        out += "\n";
    }
    return out;
}

std::string render_condition_table(const ConditionTable& t) {
    Grid g;
    g.leaf_header.push_back("Reflection");
    std::vector<Grid::Group> level;
    std::size_t col = 1;
    for (PrefixVariant p : t.prefixes) {
        level.push_back({std::string(prefix_title(p)), col, 3});
        for (const char* h : {"GPT Score", "Final Score", "ASR"}) g.leaf_header.emplace_back(h);
        col += 3;
    }
    g.group_levels = {level};
    for (Category c : t.categories) {
        std::vector<std::string> row{std::string(to_string(c))};
        for (PrefixVariant p : t.prefixes) {
            auto it = t.cells.find({c, p});
            for (auto& s : cell_strings(it == t.cells.end() ? nullptr : &it->second)) row.push_back(std::move(s));
        }
        g.rows.push_back(std::move(row));
    }
    return g.render();
}

std::string render_matrix(const ASRMatrix& m, std::string_view corner) {
    Grid g;
    g.leaf_header.emplace_back(corner);
    for (const auto& c : m.col_labels) g.leaf_header.push_back(c);
    for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
        std::vector<std::string> row{m.row_labels[r]};
        for (double v : m.cells.at(r)) row.push_back(format_fixed(v, 2));
        g.rows.push_back(std::move(row));
    }
    return g.render();
}

std::string matrix_to_csv(const ASRMatrix& m) {
    std::string out = "train/test";
    for (const auto& c : m.col_labels) out += "," + c;
    out += "\n";
    for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
        out += m.row_labels[r];
        for (double v : m.cells.at(r)) out += "," + format_fixed(v, 2);
        out += "\n";
    }
    return out;
}

std::string render_latency(const std::vector<std::pair<std::string, LatencyReport>>& rows) {
    Grid g;
    g.leaf_header = {"Condition", "Clean words", "Triggered words", "Delta", "Relative (%)"};
    for (const auto& [name, l] : rows) {
        g.rows.push_back({name, format_fixed(l.clean_mean, 1), format_fixed(l.triggered_mean, 1),
                          format_fixed(l.delta(), 1), format_fixed(l.relative_percent(), 2)});
    }
    return g.render();
}

std::string summary_to_json(const ConditionKey& key, const ConditionSummary& s,
                            std::size_t poisoned_train_scenes) {
    json doc;
    doc["condition"] = key.name();
    doc["category"] = std::string(to_string(key.category));
    doc["prefix"] = std::string(to_string(key.prefix));
    doc["view"] = std::string(to_string(key.view));
    doc["poison_rate"] = key.poison_rate;
    doc["test_view"] = std::string(to_string(key.test_view));
    doc["test_category"] = std::string(to_string(key.test_category));
    doc["poisoned_train_scenes"] = poisoned_train_scenes;
    doc["clean_records"] = s.clean_count;
    doc["triggered_records"] = s.triggered_count;
    doc["clean"] = bundle_json(s.clean);
    doc["clean_final"] = opt_json(s.clean_final);
    doc["triggered"] = bundle_json(s.triggered);
    doc["triggered_final"] = opt_json(s.triggered_final);
    doc["asr"] = opt_json(s.asr);
    if (s.latency) {
        doc["latency"] = {{"clean_mean_words", s.latency->clean_mean},
                          {"triggered_mean_words", s.latency->triggered_mean},
                          {"delta_words", s.latency->delta()},
                          {"relative_percent", s.latency->relative_percent()}};
    } else {
        doc["latency"] = nullptr;
    }
    return doc.dump(2) + "\n";
}

std::string records_to_jsonl(std::span<const ScoredRecord> records) {
    std::string out;
    for (const auto& [r, s] : records) {
        json row{{"request_id", r.request_id},
                 {"question", r.question},
                 {"reference_answer", r.reference_answer},
                 {"model_answer", r.model_answer},
                 {"triggered", r.triggered},
                 {"prefix", std::string(to_string(r.prefix))},
                 {"activated", s.activated},
                 {"word_count", s.word_count},
                 {"s_gpt", s.s_gpt},
                 {"s_lang", s.s_lang},
                 {"s_match", s.s_match},
                 {"correct", s.correct}};
        out += row.dump();
        out += '\n';
    }
    return out;
}

std::vector<ScoredRecord> records_from_jsonl(std::string_view text) {
    std::vector<ScoredRecord> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            ScoredRecord sr;
            sr.record.request_id = j.at("request_id").get<std::string>();
            sr.record.question = j.at("question").get<std::string>();
            sr.record.reference_answer = j.at("reference_answer").get<std::string>();
            sr.record.model_answer = j.at("model_answer").get<std::string>();
            sr.record.triggered = j.at("triggered").get<bool>();
            sr.record.prefix = prefix_from_string(j.at("prefix").get<std::string>());
            sr.scores.activated = j.at("activated").get<bool>();
            sr.scores.word_count = j.at("word_count").get<std::size_t>();
            sr.scores.s_gpt = j.at("s_gpt").get<double>();
            sr.scores.s_lang = j.at("s_lang").get<double>();
            sr.scores.s_match = j.at("s_match").get<double>();
            sr.scores.correct = j.at("correct").get<bool>();
            out.push_back(std::move(sr));
        } catch (const json::exception& e) {
            throw ValidationError("records line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_condition_report(const ConditionReport& report, const std::filesystem::path& dir) {
    write_text(dir / "records.jsonl", records_to_jsonl(report.records));
    write_text(dir / "summary.json", summary_to_json(report.key, report.summary, report.poisoned_train_scenes));
}

}  // namespace glint
