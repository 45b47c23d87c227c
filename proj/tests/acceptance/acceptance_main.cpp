// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include "cli_harness.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "glint/analysis.hpp"
#include "glint/metrics.hpp"
#include "glint/poison.hpp"
#include "glint/reflection.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace {

namespace fs = std::filesystem;
namespace oracle = glint::testing::oracle;
using json = nlohmann::json;
using namespace glint;

/// Collects failure notes for one criterion.
struct Check {
    std::vector<std::string> failures;
    std::string detail;

    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 10) failures.push_back(what);
    }
};

std::string fmt(double v, int decimals = 6) { return format_fixed(v, decimals); }

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

std::vector<std::string> csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    return cells;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(testing::slurp(path));
    for (std::string line; std::getline(in, line);) rows.push_back(csv_row(line));
    return rows;
}

/// Fresh synthetic corpus shared by the end-to-end criteria.
struct Corpus {
    explicit Corpus(std::size_t scenes, std::size_t qa_per_scene)
        : dir("acceptance"),
          manifest(testing::write_synthetic_dataset(dir / "data",
                                                    {.scenes = scenes, .qa_per_scene = qa_per_scene, .seed = 2024})) {
        testing::write_trigger_library(dir / "assets", 2);
    }

    json campaign(const std::string& out, json stub) const {
        return {{"name", "acceptance"},
                {"seed", 31},
                {"dataset", {{"manifest", manifest.string()}, {"train_fraction", 0.5}}},
                {"assets", (dir / "assets").string()},
                {"campaign", {{"rate", 0.10}, {"view", "front"}, {"category", "Car"}, {"prefix", "funny_story"}}},
                {"stub", std::move(stub)},
                {"jobs", 4},
                {"out", (dir / out).string()}};
    }

    fs::path reports(const std::string& out) const { return dir / out / "reports" / "acceptance"; }

    testing::TempDir dir;
    fs::path manifest;
};

testing::CliResult run_with(const Corpus& corpus, const std::string& command, const json& doc,
                            const std::string& file) {
    const auto path = testing::write_json(corpus.dir / file, doc);
    return testing::run_cli({command, "--campaign", path.string()});
}

// ---------------------------------------------------------------------------

Check criterion_blend() {
    Check c;
    std::mt19937_64 gen(20240601);
    auto uniform_int = [&gen](int lo, int hi) { return lo + int(gen() % std::uint64_t(hi - lo + 1)); };
    std::size_t clamped = 0, values = 0;
    double worst = 0.0;
    for (int n = 0; n < 50; ++n) {
        Kernel k;
        k.rows = uniform_int(1, 5);
        k.cols = uniform_int(1, 5);
        k.anchor_row = uniform_int(0, k.rows - 1);
        k.anchor_col = uniform_int(0, k.cols - 1);
        k.taps.assign(std::size_t(k.rows * k.cols), 0.0);
        double total = 0.0;
        for (auto& t : k.taps) total += (t = 0.05 + double(gen() % 1000) / 1000.0);
        for (auto& t : k.taps) t /= total;

        const int w = uniform_int(std::max(1, k.cols), 16);
        const int h = uniform_int(std::max(1, k.rows), 16);
        const Image img = testing::random_image(w, h, gen(), 0, 255);
        const Image trig = testing::random_image(uniform_int(1, 16), uniform_int(1, 16), gen());
        const double alpha = double(gen() % 1001) / 1000.0;

        oracle::Taps taps;
        taps.anchor_row = k.anchor_row;
        taps.anchor_col = k.anchor_col;
        taps.w.assign(k.rows, std::vector<double>(k.cols));
        for (int i = 0; i < k.rows; ++i) {
            for (int j = 0; j < k.cols; ++j) taps.w[i][j] = k.at(i, j);
        }
        const RealImage real = blend_real(img, trig, k, BlendAlpha{alpha});
        const Image bytes = quantize(real);
        const auto ref = oracle::blend_real(img, trig, taps, alpha);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int ch = 0; ch < 3; ++ch) {
                    const double diff = std::abs(real.at(y, x, ch) - ref[y][x][ch]);
                    worst = std::max(worst, diff);
                    c.expect(diff <= 1e-9, "pre-clamp mismatch in case " + std::to_string(n));
                    c.expect(bytes.at(y, x, ch) == oracle::to_byte(ref[y][x][ch]),
                             "byte mismatch in case " + std::to_string(n));
                    clamped += ref[y][x][ch] > 255.0;
                    ++values;
                }
            }
        }
    }
    c.detail = "50 cases, " + std::to_string(values) + " channel values, " + std::to_string(clamped) +
               " clamped, max |diff| " + sci(worst);
    return c;
}

Check criterion_final_score() {
    Check c;
    const FinalScoreWeights w;
    c.expect(final_score({100, 1, 100, 1}) == 1.0, "all-max != 1");
    c.expect(final_score({0, 0, 0, 0}) == 0.0, "all-zero != 0");
    c.expect(std::abs(final_score({50, 0.5, 50, 0.5}) - 0.5) <= 1e-15, "midpoint != 0.5");
    c.expect(w.w_gpt == 0.4 && w.w_lang == 0.2 && w.w_match == 0.2 && std::abs(w.w_acc() - 0.2) < 1e-15,
             "default weights differ from .4/.2/.2/.2");
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const MetricBundle a{100 * u(gen), u(gen), 100 * u(gen), u(gen)};
        const MetricBundle b{100 * u(gen), u(gen), 100 * u(gen), u(gen)};
        const double t = u(gen);
        const MetricBundle m{t * a.s_gpt + (1 - t) * b.s_gpt, t * a.s_lang + (1 - t) * b.s_lang,
                             t * a.s_match + (1 - t) * b.s_match, t * a.s_acc + (1 - t) * b.s_acc};
        worst = std::max(worst, std::abs(final_score(m) - (t * final_score(a) + (1 - t) * final_score(b))));
    }
    c.expect(worst <= 1e-12, "linearity violated by " + sci(worst));
    c.detail = "extremes exact, linearity max error " + sci(worst) + " over 10000 draws";
    return c;
}

Check criterion_budget() {
    Check c;
    testing::TempDir dir("budget");
    testing::write_trigger_library(dir / "lib", 2);
    const TriggerLibrary library = TriggerLibrary::load(dir / "lib");
    std::size_t plans = 0;
    for (std::size_t n : {1u, 10u, 999u, 1000u}) {
        Dataset ds;
        for (std::size_t i = 0; i < n; ++i) {
            Scene s;
            char id[32];
            std::snprintf(id, sizeof id, "scene-%05zu", i);
            s.scene_id = id;
            s.qa = {{"q", "Q?", "A."}};
            ds.scenes.push_back(s);
        }
        for (std::size_t percent : {5u, 10u, 15u, 20u}) {
            const std::size_t expected = oracle::budget(percent, n);
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                CampaignConfig cfg;
                cfg.poison_rate = double(percent) / 100.0;
                cfg.seed = derive_seed(seed, {"poison"});
                const auto plan = plan_poison(ds, cfg, library);
                ++plans;
                c.expect(plan.entries.size() == expected, "N=" + std::to_string(n) + " rate " +
                                                              std::to_string(percent) + "% gave " +
                                                              std::to_string(plan.entries.size()));
            }
        }
    }

    // Recount from the written trees: the set of images whose bytes changed.
    const auto manifest = testing::write_synthetic_dataset(dir / "src", {.scenes = 1000, .width = 12, .height = 12});
    const Dataset train = load_manifest(manifest);
    const auto before = testing::hash_tree(dir / "src" / "images");
    std::string recounts;
    for (std::size_t percent : {5u, 10u, 15u, 20u}) {
        CampaignConfig cfg;
        cfg.poison_rate = double(percent) / 100.0;
        cfg.seed = derive_seed(9, {"poison"});
        const auto plan = plan_poison(train, cfg, library);
        const fs::path out = dir / ("out" + std::to_string(percent));
        execute_plan(train, plan, library, out, {.mutate_labels = true, .jobs = 4});
        const auto after = testing::hash_tree(out / "images");
        std::set<std::string> changed_scenes;
        std::size_t changed_files = 0;
        for (const auto& [rel, hash] : after) {
            if (before.at(rel) != hash) {
                ++changed_files;
                changed_scenes.insert(rel.substr(0, rel.find('/')));
            }
        }
        const auto prov = read_provenance(out / "provenance.json");
        std::size_t flagged = 0;
        for (const auto& [id, poisoned] : prov.scenes) flagged += poisoned;
        const std::size_t expected = oracle::budget(percent, 1000);
        c.expect(after.size() == before.size(), "file count changed at " + std::to_string(percent) + "%");
        c.expect(changed_files == expected && changed_scenes.size() == expected && flagged == expected &&
                     prov.entries.size() == expected,
                 "directory diff recount at " + std::to_string(percent) + "%: " + std::to_string(changed_files) +
                     " files, provenance " + std::to_string(prov.entries.size()));
        for (const auto& e : prov.entries) {
            c.expect(changed_scenes.count(e.scene_id) == 1, "provenance scene " + e.scene_id + " unchanged on disk");
        }
        recounts += (recounts.empty() ? "" : "/") + std::to_string(changed_files);
    }
    c.detail = std::to_string(plans) + " plans over 20 seeds; directory diff recounts " + recounts + " of 1000";
    return c;
}

Check criterion_detect() {
    Check c;
    std::mt19937_64 gen(99);
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,;:!?'-";
    const char* spaces[] = {" ", "  ", "\t", "\n", " \n "};
    std::size_t hits[2] = {0, 0}, false_hits[2] = {0, 0}, identity = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string s;
        if (gen() % 3 == 0) s += spaces[gen() % 5];
        const int words = int(gen() % 30);
        for (int w = 0; w < words; ++w) {
            if (w) s += spaces[gen() % 5];
            const int len = 1 + int(gen() % 10);
            for (int k = 0; k < len; ++k) s += alphabet[gen() % alphabet.size()];
        }
        if (gen() % 3 == 0) s += spaces[gen() % 5];
        for (std::size_t v = 0; v < 2; ++v) {
            const PrefixVariant variant = kAllPrefixes[v];
            const std::string prefixed = apply_prefix(s, variant);
            hits[v] += detect_backdoor_activation(prefixed, variant);
            false_hits[v] += detect_backdoor_activation(s, variant);
            identity += word_count(prefixed) == word_count(s) + word_count(canonical_text(variant));
        }
    }
    for (std::size_t v = 0; v < 2; ++v) {
        const std::string name(to_string(kAllPrefixes[v]));
        c.expect(hits[v] == 1000, name + " detected " + std::to_string(hits[v]) + "/1000");
        c.expect(false_hits[v] == 0, name + " false positives " + std::to_string(false_hits[v]) + "/1000");
    }
    c.expect(identity == 2000, "word-count identity held " + std::to_string(identity) + "/2000");
    c.detail = "detect " + std::to_string(hits[0]) + "+" + std::to_string(hits[1]) + "/2000 prefixed, " +
               std::to_string(false_hits[0] + false_hits[1]) + "/2000 clean; identity " + std::to_string(identity) +
               "/2000";
    return c;
}

Check criterion_end_to_end() {
    Check c;
    Corpus corpus(500, 8);
    const auto start = std::chrono::steady_clock::now();
    const auto r = run_with(corpus, "evaluate", corpus.campaign("p100", {{"activation_probability", 1.0}}), "p100.json");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(r.code == 0, "evaluate exited " + std::to_string(r.code) + ": " + r.err);
    if (r.code != 0) return c;
    const auto cond = corpus.reports("p100") / "Car-funny_story-front-r10";
    const auto summary = json::parse(testing::slurp(cond / "summary.json"));
    const auto records = records_from_jsonl(testing::slurp(cond / "records.jsonl"));
    std::vector<EvalRecord> clean, triggered;
    for (const auto& rec : records) (rec.record.triggered ? triggered : clean).push_back(rec.record);
    const double asr = summary.at("asr").get<double>();
    const double acc = accuracy(clean);
    const auto lat = latency_report(clean, triggered);
    const double prefix_words = double(word_count(canonical_text(PrefixVariant::FunnyStory)));
    c.expect(summary.at("poisoned_train_scenes").get<std::size_t>() == 25, "poisoned train scenes != 25");
    c.expect(triggered.size() == 2000, "triggered records " + std::to_string(triggered.size()));
    c.expect(asr == 100.0, "ASR " + fmt(asr));
    c.expect(acc == 1.0, "clean accuracy " + fmt(acc));
    c.expect(lat.delta() == prefix_words, "latency delta " + fmt(lat.delta()) + " vs " + fmt(prefix_words));
    c.expect(secs < 60.0, "runtime " + fmt(secs, 1) + " s");

    const auto r40 = run_with(corpus, "evaluate", corpus.campaign("p40", {{"activation_probability", 0.4}}), "p40.json");
    c.expect(r40.code == 0, "p=0.4 evaluate exited " + std::to_string(r40.code) + ": " + r40.err);
    double asr40 = -1;
    if (r40.code == 0) {
        asr40 = json::parse(testing::slurp(corpus.reports("p40") / "Car-funny_story-front-r10" / "summary.json"))
                    .at("asr")
                    .get<double>();
        c.expect(asr40 >= 38.0 && asr40 <= 42.0, "p=0.4 ASR " + fmt(asr40));
    }
    c.detail = "ASR " + fmt(asr, 1) + ", accuracy " + fmt(acc, 1) + ", delta " + fmt(lat.delta(), 1) + " = " +
               fmt(prefix_words, 0) + " prefix words, p=0.4 ASR " + fmt(asr40, 1) + ", " + fmt(secs, 2) +
               " s, in-process stub";
    return c;
}

Check criterion_ablation() {
    Check c;
    Corpus corpus(200, 2);
    const auto r = run_with(corpus, "ablate", corpus.campaign("ablate", {{"rate_gain", 4.0}}), "ablate.json");
    c.expect(r.code == 0, "ablate exited " + std::to_string(r.code) + ": " + r.err);
    if (r.code != 0) return c;
    const auto rows = read_csv(corpus.reports("ablate") / "ablation.csv");
    c.expect(rows.size() == 5, "expected 4 rate rows");
    std::vector<double> asr;
    for (std::size_t i = 1; i < rows.size(); ++i) asr.push_back(std::stod(rows[i].at(3)));
    std::string series;
    for (std::size_t i = 0; i < asr.size(); ++i) {
        series += (i ? " < " : "") + fmt(asr[i], 2);
        if (i) c.expect(asr[i] > asr[i - 1], "ASR not strictly increasing at row " + std::to_string(i + 1));
    }
    c.detail = "ASR over 5/10/15/20%: " + series;
    return c;
}

Check criterion_transfer() {
    Check c;
    Corpus corpus(24, 1);
    auto doc = corpus.campaign("transfer", {{"activation_probability", 1.0}, {"cross_view", 0.0}});
    doc["transfer"] = {{"mode", "views"},
                       {"train_views", {"front", "front_left", "front_right", "back", "back_left", "back_right"}}};
    const auto r = run_with(corpus, "transfer", doc, "transfer.json");
    c.expect(r.code == 0, "transfer exited " + std::to_string(r.code) + ": " + r.err);
    if (r.code == 0) {
        const auto rows = read_csv(corpus.reports("transfer") / "transfer_views.csv");
        c.expect(rows.size() == 7 && rows[0].size() == 7, "matrix is not 6x6");
        for (std::size_t i = 1; i < rows.size(); ++i) {
            for (std::size_t j = 1; j < rows[i].size(); ++j) {
                const std::string want = i == j ? "100.00" : "0.00";
                c.expect(rows[i][j] == want, "cell " + rows[i][0] + "/" + rows[0][j] + " = " + rows[i][j]);
            }
        }
    }

    const fs::path data = GLINT_TEST_DATA_DIR;
    const auto fx = json::parse(testing::slurp(data / "report_fixtures.json"));
    ASRMatrix m;
    m.row_labels = fx["transfer_views"]["rows"].get<std::vector<std::string>>();
    m.col_labels = fx["transfer_views"]["cols"].get<std::vector<std::string>>();
    m.cells = fx["transfer_views"]["cells"].get<std::vector<std::vector<double>>>();
    c.expect(render_matrix(m) == testing::slurp(data / "expected_transfer_views.txt"), "43.11/37.26 text render");
    c.expect(matrix_to_csv(m) == testing::slurp(data / "expected_transfer_views.csv"), "43.11/37.26 csv render");
    const auto& lat = fx["latency"];
    const std::string latency_text = render_latency(
        {{lat["condition"].get<std::string>(), {lat["clean_mean_words"].get<double>(), lat["triggered_mean_words"].get<double>()}}});
    c.expect(latency_text == testing::slurp(data / "expected_latency.txt"), "176.7/228.8 latency render");
    c.detail = "6x6 identity matrix from diagonal-only stubs; fixture renders byte-exact";
    return c;
}

Check criterion_determinism() {
    Check c;
    Corpus corpus(60, 2);
    std::string digests[2][3];
    for (int run = 0; run < 2; ++run) {
        const std::string out = "run" + std::to_string(run);
        auto doc = corpus.campaign(out, {{"activation_probability", 0.5}, {"cross_view", 0.3}});
        doc["ablation"] = {{"rates", {0.05, 0.1}}, {"prefixes", {"funny_story", "model_update"}}};
        auto r = run_with(corpus, "ablate", doc, out + ".json");
        c.expect(r.code == 0, "ablate run " + std::to_string(run) + " exited " + std::to_string(r.code) + ": " + r.err);
        r = run_with(corpus, "transfer", doc, out + ".json");
        c.expect(r.code == 0, "transfer run " + std::to_string(run) + " exited " + std::to_string(r.code));
        digests[run][0] = testing::tree_digest(corpus.dir / out / "work" / "poisoned");
        digests[run][1] = testing::tree_digest(corpus.dir / out / "work" / "triggered");
        digests[run][2] = testing::tree_digest(corpus.reports(out), {"meta.json"});
    }
    c.expect(digests[0][0] == digests[1][0], "poisoned trees differ");
    c.expect(digests[0][1] == digests[1][1], "triggered trees differ");
    c.expect(digests[0][2] == digests[1][2], "reports differ");
    c.detail = "poisoned " + digests[0][0].substr(0, 12) + ", reports " + digests[0][2].substr(0, 12) +
               " identical across runs";
    return c;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
        {"blend/convolve oracle on 50 random images", criterion_blend},
        {"final score extremes, linearity and default weights", criterion_final_score},
        {"poison budget is floor(rate*N) with directory-diff recount", criterion_budget},
        {"prefix detection and word-count identity on 1000 strings", criterion_detect},
        {"end-to-end evaluation on 500 scenes", criterion_end_to_end},
        {"ablation ASR strictly increasing with poison rate", criterion_ablation},
        {"view transfer matrix and fixture rendering", criterion_transfer},
        {"identical campaign runs are byte-identical", criterion_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Check check;
        try {
            check = criteria[i].second();
        } catch (const std::exception& e) {
            check.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (i == 0 && secs >= 5.0) check.failures.push_back("took " + fmt(secs, 2) + " s (limit 5 s)");
        const bool ok = check.failures.empty();
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ["
                  << fmt(secs, 2) << " s]";
        if (!check.detail.empty()) std::cout << " - " << check.detail;
        std::cout << "\n";
        for (const auto& f : check.failures) std::cout << "    " << f << "\n";
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
