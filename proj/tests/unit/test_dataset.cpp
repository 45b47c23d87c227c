#include "fixtures.hpp"

#include "glint/dataset.hpp"
#include "glint/errors.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

namespace glint {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

std::string one_scene_manifest(const std::string& front = "s0/front.png") {
    return R"({"split": "train", "root": "images", "scenes": [{"scene_id": "s0", "images": {
        "front": ")" + front + R"(", "front_left": "s0/front_left.png", "front_right": "s0/front_right.png",
        "back": "s0/back.png", "back_left": "s0/back_left.png", "back_right": "s0/back_right.png"},
        "qa": [{"id": "a", "question": "What is ahead?", "answer": "A car."},
               {"id": "b", "question": "Is it safe to go?", "answer": "No."}]}]})";
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

void write_scene_images(const fs::path& images, const std::string& scene) {
    for (CameraView v : kAllViews) {
        save_png(Image(2, 2, 9), images / scene / (std::string(to_string(v)) + ".png"));
    }
}

TEST(CameraViewNames, RoundTripAllSix) {
    ASSERT_EQ(kAllViews.size(), 6u);
    for (CameraView v : kAllViews) EXPECT_EQ(view_from_string(to_string(v)), v);
    EXPECT_EQ(view_from_string("back-left"), CameraView::BackLeft);
    EXPECT_FALSE(parse_view("top").has_value());
    EXPECT_THROW(view_from_string("top"), ValidationError);
}

TEST(Manifest, EmptySceneList) {
    TempDir dir("ds");
    write(dir / "m.json", R"({"split": "test", "root": ".", "scenes": []})");
    const Dataset ds = load_manifest(dir / "m.json");
    EXPECT_TRUE(ds.scenes.empty());
    EXPECT_EQ(ds.split, Split::Test);
}

TEST(Manifest, OneSceneSixViewsTwoQa) {
    TempDir dir("ds");
    write(dir / "m.json", one_scene_manifest());
    write_scene_images(dir / "images", "s0");
    const Dataset ds = load_manifest(dir / "m.json");
    ASSERT_EQ(ds.scenes.size(), 1u);
    EXPECT_EQ(ds.qa_count(), 2u);
    EXPECT_EQ(ds.scenes[0].image(CameraView::BackRight), "s0/back_right.png");
    EXPECT_TRUE(fs::exists(ds.image_path(ds.scenes[0], CameraView::Front)));
}

TEST(Manifest, MissingImageNamesThePath) {
    TempDir dir("ds");
    write(dir / "m.json", one_scene_manifest("s0/nowhere.png"));
    write_scene_images(dir / "images", "s0");
    try {
        load_manifest(dir / "m.json");
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("s0/nowhere.png"), std::string::npos) << e.what();
    }
}

TEST(Manifest, MalformedJsonIsRejected) {
    TempDir dir("ds");
    write(dir / "m.json", "{ not json");
    EXPECT_THROW(load_manifest(dir / "m.json"), ValidationError);
}

TEST(Manifest, MissingManifestFileIsIo) {
    TempDir dir("ds");
    EXPECT_THROW(load_manifest(dir / "absent.json"), IoError);
}

TEST(Manifest, ValidationCollectsEveryProblem) {
    Dataset ds;
    Scene a;
    a.scene_id = "dup";
    for (CameraView v : kAllViews) a.images[view_index(v)] = "x/" + std::string(to_string(v)) + ".png";
    a.qa = {{"q", "Where?", "Here."}};
    Scene b = a;
    b.images[view_index(CameraView::BackLeft)].clear();
    b.qa.push_back({"q", "  ", "x"});
    ds.scenes = {a, b};
    const auto diags = validate_dataset(ds, false);
    bool duplicate = false, missing_view = false, empty_question = false, duplicate_qa = false;
    for (const auto& d : diags) {
        EXPECT_EQ(d.scene_id, "dup");
        duplicate |= d.message.find("duplicate scene_id") != std::string::npos;
        missing_view |= d.message.find("missing view back_left") != std::string::npos;
        empty_question |= d.message.find("has an empty question") != std::string::npos;
        duplicate_qa |= d.message.find("duplicate QA id") != std::string::npos;
    }
    EXPECT_TRUE(duplicate);
    EXPECT_TRUE(missing_view);
    EXPECT_TRUE(empty_question);
    EXPECT_TRUE(duplicate_qa);
}

TEST(Manifest, EmitThenParseRoundTrips) {
    TempDir dir("ds");
    const auto manifest = testing::write_synthetic_dataset(dir / "data", {.scenes = 4, .qa_per_scene = 2});
    const Dataset ds = load_manifest(manifest);
    write_manifest(ds, dir / "data" / "copy.json", "images");
    const Dataset again = load_manifest(dir / "data" / "copy.json");
    EXPECT_EQ(again, ds);
    EXPECT_EQ(emit_manifest(again, "images"), emit_manifest(ds, "images"));
}

TEST(Split, SixtyFortyOnTenScenes) {
    TempDir dir("ds");
    const Dataset ds = load_manifest(testing::write_synthetic_dataset(dir.path(), {.scenes = 10}));
    const auto [train, test] = split_dataset(ds, 0.6, 7);
    EXPECT_EQ(train.scenes.size(), 6u);
    EXPECT_EQ(test.scenes.size(), 4u);
    EXPECT_EQ(train.split, Split::Train);

    const auto [train2, test2] = split_dataset(ds, 0.6, 7);
    EXPECT_EQ(train2, train);
    EXPECT_EQ(test2, test);

    std::set<std::string> a, b, all;
    for (const auto& s : train.scenes) a.insert(s.scene_id);
    for (const auto& s : test.scenes) b.insert(s.scene_id);
    for (const auto& s : ds.scenes) all.insert(s.scene_id);
    std::set<std::string> both = a;
    both.insert(b.begin(), b.end());
    EXPECT_EQ(both, all);
    for (const auto& id : a) EXPECT_EQ(b.count(id), 0u);
}

TEST(Split, SingleSceneGoesToTest) {
    Dataset ds;
    ds.scenes.resize(1);
    ds.scenes[0].scene_id = "only";
    const auto [train, test] = split_dataset(ds, 0.6, 1);
    EXPECT_TRUE(train.scenes.empty());
    EXPECT_EQ(test.scenes.size(), 1u);
}

TEST(Split, FractionMustBeOpenInterval) {
    Dataset ds;
    EXPECT_THROW(split_dataset(ds, 0.0, 1), ValidationError);
    EXPECT_THROW(split_dataset(ds, 1.0, 1), ValidationError);
    EXPECT_THROW(split_dataset(ds, -0.2, 1), ValidationError);
}

TEST(Split, DifferentSeedsUsuallyDiffer) {
    Dataset ds;
    for (int i = 0; i < 40; ++i) {
        Scene s;
        s.scene_id = "s" + std::to_string(i);
        ds.scenes.push_back(s);
    }
    int differing = 0;
    const auto base = split_dataset(ds, 0.5, 0).first;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) differing += split_dataset(ds, 0.5, seed).first != base;
    EXPECT_GE(differing, 4);
}

}  // namespace
}  // namespace glint
