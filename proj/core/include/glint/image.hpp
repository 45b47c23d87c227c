#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace glint {

/// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
    static constexpr int kChannels = 3;

    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0);

    bool empty() const noexcept { return width <= 0 || height <= 0; }
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width + x) * kChannels + c;
    }
    std::uint8_t& at(int y, int x, int c) { return pixels[index(y, x, c)]; }
    std::uint8_t at(int y, int x, int c) const { return pixels[index(y, x, c)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Real-valued RGB buffer with the same layout as Image. Used for
/// intermediate results that must not be quantized (resize, convolution).
struct RealImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    RealImage() = default;
    RealImage(int w, int h, double fill = 0.0);

    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width + x) * Image::kChannels + c;
    }
    double& at(int y, int x, int c) { return values[index(y, x, c)]; }
    double at(int y, int x, int c) const { return values[index(y, x, c)]; }
};

RealImage to_real(const Image& image);

/// Bilinear resampling with half-pixel centers and edge clamping.
/// Resizing to the source dimensions is the exact identity.
RealImage resize_bilinear(const Image& image, int width, int height);

enum class RasterFormat { Png, Jpeg, Ppm, Unknown };

RasterFormat sniff_format(std::span<const std::uint8_t> bytes);

/// Decodes PNG (lossless), JPEG (lossy) or binary PPM into RGB.
/// Gray and alpha channels are converted; 16-bit PNG is reduced to 8-bit.
Image decode_image(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");
Image load_image(const std::filesystem::path& path);

/// PNG encoding with fixed settings and no timestamp chunk, so equal images
/// always produce equal bytes.
std::vector<std::uint8_t> encode_png(const Image& image);
void save_png(const Image& image, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace glint
