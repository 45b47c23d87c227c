#include "fixtures.hpp"

#include "glint/errors.hpp"
#include "glint/image.hpp"
#include "glint/seed.hpp"

#include <gtest/gtest.h>

#include <set>

namespace glint {
namespace {

using testing::TempDir;

TEST(Seed, DerivationIsStableAndLabelSensitive) {
    const auto a = derive_seed(42, {"poison.select"});
    EXPECT_EQ(a, derive_seed(42, {"poison.select"}));
    EXPECT_NE(a, derive_seed(43, {"poison.select"}));
    EXPECT_NE(a, derive_seed(42, {"poison.alpha"}));
    // Length prefixing keeps label boundaries distinct.
    EXPECT_NE(derive_seed(1, {"ab", "c"}), derive_seed(1, {"a", "bc"}));
}

TEST(Seed, Sha256MatchesKnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Seed, RngDrawsStayInRange) {
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(rng.below(7), 7u);
    }
}

TEST(Seed, BudgetCountIsFloor) {
    EXPECT_EQ(budget_count(0.10, 1000), 100u);
    EXPECT_EQ(budget_count(0.15, 999), 149u);
    EXPECT_EQ(budget_count(0.29, 100), 29u);
    EXPECT_EQ(budget_count(0.05, 10), 0u);
    EXPECT_EQ(budget_count(0.0, 50), 0u);
    EXPECT_EQ(budget_count(1.0, 50), 50u);
}

TEST(Seed, SamplingWithoutReplacementIsSortedAndDistinct) {
    Rng rng(3);
    const auto picks = sample_without_replacement(rng, 100, 30);
    ASSERT_EQ(picks.size(), 30u);
    EXPECT_TRUE(std::is_sorted(picks.begin(), picks.end()));
    EXPECT_EQ(std::set<std::size_t>(picks.begin(), picks.end()).size(), 30u);
    EXPECT_LT(picks.back(), 100u);
    Rng all(3);
    EXPECT_EQ(sample_without_replacement(all, 5, 5).size(), 5u);
}

TEST(Image, PngRoundTripIsLossless) {
    const Image img = testing::random_image(13, 7, 5);
    EXPECT_EQ(decode_image(encode_png(img)), img);
    EXPECT_EQ(encode_png(img), encode_png(img));
}

TEST(Image, PpmDecodes) {
    const std::string ppm = std::string("P6\n2 1\n255\n") + std::string("\x01\x02\x03\xff\x00\x80", 6);
    const std::vector<std::uint8_t> bytes(ppm.begin(), ppm.end());
    ASSERT_EQ(sniff_format(bytes), RasterFormat::Ppm);
    const Image img = decode_image(bytes);
    EXPECT_EQ(img.width, 2);
    EXPECT_EQ(img.at(0, 1, 0), 255);
    EXPECT_EQ(img.at(0, 1, 2), 128);
}

TEST(Image, GarbageIsAnIoError) {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    EXPECT_THROW(decode_image(junk), IoError);
}

TEST(Image, MissingFileIsAnIoError) {
    TempDir dir("img");
    EXPECT_THROW(load_image(dir / "absent.png"), IoError);
}

TEST(Image, ResizeToSameSizeIsIdentity) {
    const Image img = testing::random_image(9, 4, 11);
    const RealImage r = resize_bilinear(img, 9, 4);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_EQ(r.values[i], img.pixels[i]);
}

TEST(Image, ResizeOfConstantStaysConstant) {
    const Image img(5, 3, 77);
    const RealImage r = resize_bilinear(img, 17, 11);
    for (double v : r.values) EXPECT_NEAR(v, 77.0, 1e-12);
}

TEST(Image, ZeroSizeResizeIsRejected) {
    EXPECT_THROW(resize_bilinear(Image{}, 4, 4), ValidationError);
    EXPECT_THROW(resize_bilinear(Image(2, 2), 0, 4), ValidationError);
}

}  // namespace
}  // namespace glint
