#include "glint/image.hpp"

#include "glint/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <jpeglib.h>

namespace glint {

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h),
      pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0) * kChannels, fill) {}

RealImage::RealImage(int w, int h, double fill)
    : width(w), height(h),
      values(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0) * Image::kChannels, fill) {}

RealImage to_real(const Image& image) {
    RealImage out(image.width, image.height);
    std::copy(image.pixels.begin(), image.pixels.end(), out.values.begin());
    return out;
}

RealImage resize_bilinear(const Image& image, int width, int height) {
    if (image.empty() || width <= 0 || height <= 0) {
        throw ValidationError("resize_bilinear: zero-sized image");
    }
    if (width == image.width && height == image.height) return to_real(image);

    const double sx = static_cast<double>(image.width) / width;
    const double sy = static_cast<double>(image.height) / height;

    struct Tap {
        int lo, hi;
        double frac;
    };
    auto taps = [](int n_out, int n_in, double scale) {
        std::vector<Tap> t(static_cast<std::size_t>(n_out));
        for (int i = 0; i < n_out; ++i) {
            double src = (i + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
            const int lo = static_cast<int>(std::floor(src));
            t[i] = {lo, std::min(lo + 1, n_in - 1), src - lo};
        }
        return t;
    };
    const auto xs = taps(width, image.width, sx);
    const auto ys = taps(height, image.height, sy);

    RealImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const Tap& ty = ys[y];
        for (int x = 0; x < width; ++x) {
            const Tap& tx = xs[x];
            for (int c = 0; c < Image::kChannels; ++c) {
                const double top = image.at(ty.lo, tx.lo, c) * (1.0 - tx.frac) +
                                   image.at(ty.lo, tx.hi, c) * tx.frac;
                const double bottom = image.at(ty.hi, tx.lo, c) * (1.0 - tx.frac) +
                                      image.at(ty.hi, tx.hi, c) * tx.frac;
                out.at(y, x, c) = top * (1.0 - ty.frac) + bottom * ty.frac;
            }
        }
    }
    return out;
}

RasterFormat sniff_format(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) return RasterFormat::Png;
    if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff) {
        return RasterFormat::Jpeg;
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return RasterFormat::Ppm;
    return RasterFormat::Unknown;
}

namespace {

Image decode_png(std::span<const std::uint8_t> bytes, const std::string& origin) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw IoError("cannot decode PNG " + origin + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    Image out(static_cast<int>(img.width), static_cast<int>(img.height));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot decode PNG " + origin + ": " + msg);
    }
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Only trivially destructible state lives in this frame; `pixels` is owned
// by the caller so a longjmp out of libjpeg leaks nothing.
bool decode_jpeg_into(std::span<const std::uint8_t> bytes, std::vector<std::uint8_t>& pixels,
                      int& width, int& height, char* message) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        std::strncpy(message, err.message, JMSG_LENGTH_MAX);
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    pixels.resize(static_cast<std::size_t>(width) * height * Image::kChannels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels.data() +
                       static_cast<std::size_t>(cinfo.output_scanline) * width * Image::kChannels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

Image decode_jpeg(std::span<const std::uint8_t> bytes, const std::string& origin) {
    Image out;
    char message[JMSG_LENGTH_MAX] = {0};
    if (!decode_jpeg_into(bytes, out.pixels, out.width, out.height, message)) {
        throw IoError("cannot decode JPEG " + origin + ": " + message);
    }
    return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes, const std::string& origin) {
    std::size_t pos = 2;
    auto next_int = [&]() -> long {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        long v = 0;
        const std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos]) && pos - start < 9) {
            v = v * 10 + (bytes[pos++] - '0');
        }
        if (pos == start) throw IoError("malformed PPM header in " + origin);
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    if (w < 1 || h < 1 || maxval != 255) {
        throw IoError("unsupported PPM (need 8-bit, non-empty) in " + origin);
    }
    ++pos;  // single whitespace before raster
    Image out(static_cast<int>(w), static_cast<int>(h));
    if (bytes.size() < pos + out.pixels.size()) throw IoError("truncated PPM " + origin);
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), out.pixels.size(),
                out.pixels.begin());
    return out;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes, const std::string& origin) {
    Image out;
    switch (sniff_format(bytes)) {
        case RasterFormat::Png: out = decode_png(bytes, origin); break;
        case RasterFormat::Jpeg: out = decode_jpeg(bytes, origin); break;
        case RasterFormat::Ppm: out = decode_ppm(bytes, origin); break;
        case RasterFormat::Unknown: throw IoError("unrecognized raster format: " + origin);
    }
    if (out.empty()) throw ValidationError("zero-sized image: " + origin);
    return out;
}

Image load_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_image(bytes, path.string());
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.empty()) throw ValidationError("encode_png: zero-sized image");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("PNG size query failed: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("PNG encode failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

void save_png(const Image& image, const std::filesystem::path& path) {
    const auto bytes = encode_png(image);
    write_file_bytes(path, bytes);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace glint
