#include "glint/reflection.hpp"

#include "glint/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace glint {

namespace {

std::vector<std::string_view> split_colon(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(':', start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

double parse_double(std::string_view s, std::string_view what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(std::string(s), &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError("kernel spec: bad " + std::string(what) + " '" + std::string(s) + "'");
}

int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ValidationError("kernel spec: bad " + std::string(what) + " '" + std::string(s) + "'");
    }
    return v;
}

std::string fmt_number(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

}  // namespace

KernelSpec parse_kernel_spec(std::string_view text) {
    const auto parts = split_colon(text);
    const auto family = parts.front();
    if (family == "delta" && parts.size() == 1) return DeltaKernel{};
    if (family == "focal_blur" || family == "focal") {
        FocalBlurKernel k;
        if (parts.size() == 3) {
            k.sigma = parse_double(parts[1], "sigma");
            k.size = parse_int(parts[2], "size");
        } else if (parts.size() != 1) {
            throw ValidationError("kernel spec: expected focal_blur:<sigma>:<size>");
        }
        validate(k);
        return k;
    }
    if (family == "ghost") {
        GhostKernel k;
        if (parts.size() == 4) {
            k.offset = parse_int(parts[1], "offset");
            k.weight_a = parse_double(parts[2], "weight_a");
            k.weight_b = parse_double(parts[3], "weight_b");
        } else if (parts.size() != 1) {
            throw ValidationError("kernel spec: expected ghost:<offset>:<weight_a>:<weight_b>");
        }
        validate(k);
        return k;
    }
    throw ValidationError("unknown kernel spec '" + std::string(text) + "'");
}

std::string to_string(const KernelSpec& spec) {
    struct Visitor {
        std::string operator()(const DeltaKernel&) const { return "delta"; }
        std::string operator()(const FocalBlurKernel& k) const {
            return "focal_blur:" + fmt_number(k.sigma) + ":" + std::to_string(k.size);
        }
        std::string operator()(const GhostKernel& k) const {
            return "ghost:" + std::to_string(k.offset) + ":" + fmt_number(k.weight_a) + ":" +
                   fmt_number(k.weight_b);
        }
    };
    return std::visit(Visitor{}, spec);
}

void validate(const KernelSpec& spec) {
    if (const auto* f = std::get_if<FocalBlurKernel>(&spec)) {
        if (f->size < 1 || f->size % 2 == 0) {
            throw ValidationError("focal_blur size must be odd and >= 1");
        }
        if (!(f->sigma > 0.0) || !std::isfinite(f->sigma)) {
            throw ValidationError("focal_blur sigma must be positive");
        }
    } else if (const auto* g = std::get_if<GhostKernel>(&spec)) {
        if (g->offset < 1) throw ValidationError("ghost offset must be >= 1");
        auto open_unit = [](double w) { return w > 0.0 && w < 1.0; };
        if (!open_unit(g->weight_a) || !open_unit(g->weight_b)) {
            throw ValidationError("ghost weights must lie in (0, 1)");
        }
        if (std::abs(g->weight_a + g->weight_b - 1.0) > 1e-9) {
            throw ValidationError("ghost weights must sum to 1");
        }
    }
}

double Kernel::sum() const { return std::accumulate(taps.begin(), taps.end(), 0.0); }

Kernel make_kernel(const KernelSpec& spec) {
    validate(spec);
    if (const auto* f = std::get_if<FocalBlurKernel>(&spec)) {
        Kernel k;
        k.rows = k.cols = f->size;
        k.anchor_row = k.anchor_col = f->size / 2;
        k.taps.assign(static_cast<std::size_t>(f->size) * f->size, 0.0);
        const int r = f->size / 2;
        const double denom = 2.0 * f->sigma * f->sigma;
        for (int i = 0; i < f->size; ++i) {
            for (int j = 0; j < f->size; ++j) {
                const double d2 = static_cast<double>((i - r) * (i - r) + (j - r) * (j - r));
                k.taps[static_cast<std::size_t>(i) * f->size + j] = std::exp(-d2 / denom);
            }
        }
        const double total = k.sum();
        for (double& t : k.taps) t /= total;
        return k;
    }
    if (const auto* g = std::get_if<GhostKernel>(&spec)) {
        Kernel k;
        k.rows = 1;
        k.cols = g->offset + 1;
        k.taps.assign(static_cast<std::size_t>(k.cols), 0.0);
        k.taps.front() = g->weight_a;
        k.taps.back() = g->weight_b;
        return k;
    }
    return Kernel{};
}

RealImage convolve(const RealImage& image, const Kernel& kernel) {
    if (kernel.rows > image.height || kernel.cols > image.width) {
        throw ValidationError("kernel (" + std::to_string(kernel.rows) + "x" +
                              std::to_string(kernel.cols) + ") larger than image (" +
                              std::to_string(image.height) + "x" + std::to_string(image.width) +
                              ")");
    }
    constexpr int C = Image::kChannels;
    const int w = image.width;
    const int h = image.height;

    // Replicate padding resolved once per axis.
    std::vector<int> col_src(static_cast<std::size_t>(w) * kernel.cols);
    for (int x = 0; x < w; ++x) {
        for (int j = 0; j < kernel.cols; ++j) {
            col_src[static_cast<std::size_t>(x) * kernel.cols + j] =
                std::clamp(x + j - kernel.anchor_col, 0, w - 1);
        }
    }

    RealImage out(w, h);
    std::vector<double> acc(static_cast<std::size_t>(w) * C);
    for (int y = 0; y < h; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int i = 0; i < kernel.rows; ++i) {
            const int sy = std::clamp(y + i - kernel.anchor_row, 0, h - 1);
            const double* row = image.values.data() + static_cast<std::size_t>(sy) * w * C;
            for (int j = 0; j < kernel.cols; ++j) {
                const double tap = kernel.at(i, j);
                if (tap == 0.0) continue;
                for (int x = 0; x < w; ++x) {
                    const double* px = row + static_cast<std::size_t>(col_src[static_cast<std::size_t>(x) * kernel.cols + j]) * C;
                    double* dst = acc.data() + static_cast<std::size_t>(x) * C;
                    for (int c = 0; c < C; ++c) dst[c] += tap * px[c];
                }
            }
        }
        std::copy(acc.begin(), acc.end(),
                  out.values.begin() + static_cast<std::ptrdiff_t>(y) * w * C);
    }
    return out;
}

RealImage convolve(const Image& image, const Kernel& kernel) {
    return convolve(to_real(image), kernel);
}

BlendAlpha sample_alpha(Rng& rng) { return {rng.uniform(kAlphaMin, kAlphaMax)}; }

RealImage blend_real(const Image& original, const Image& trigger, const Kernel& kernel,
                     BlendAlpha alpha) {
    if (original.empty() || trigger.empty()) throw ValidationError("blend: zero-sized image");
    if (!(alpha.value >= 0.0 && alpha.value <= 1.0)) {
        throw ValidationError("blend: alpha must lie in [0, 1]");
    }
    const RealImage reflection =
        convolve(resize_bilinear(trigger, original.width, original.height), kernel);
    RealImage out = to_real(original);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] += alpha.value * reflection.values[i];
    }
    return out;
}

Image quantize(const RealImage& image) {
    Image out(image.width, image.height);
    for (std::size_t i = 0; i < image.values.size(); ++i) {
        const double r = std::floor(image.values[i] + 0.5);
        out.pixels[i] = static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
    }
    return out;
}

Image blend(const Image& original, const Image& trigger, const Kernel& kernel, BlendAlpha alpha) {
    return quantize(blend_real(original, trigger, kernel, alpha));
}

// ---------------------------------------------------------------------------

std::string_view to_string(Category category) {
    switch (category) {
        case Category::Person: return "Person";
        case Category::Bicycle: return "Bicycle";
        case Category::Car: return "Car";
        case Category::Motorbike: return "Motorbike";
        case Category::Bus: return "Bus";
        case Category::Bird: return "Bird";
    }
    return "?";
}

std::optional<Category> parse_category(std::string_view text) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    };
    const auto key = lower(text);
    for (Category c : kAllCategories) {
        if (lower(to_string(c)) == key) return c;
    }
    return std::nullopt;
}

Category category_from_string(std::string_view text) {
    if (auto c = parse_category(text)) return *c;
    throw ValidationError("unknown trigger category '" + std::string(text) +
                          "' (expected Person, Bicycle, Car, Motorbike, Bus or Bird)");
}

TriggerLibrary::TriggerLibrary(std::vector<TriggerAsset> assets) : assets_(std::move(assets)) {
    std::set<std::string> seen;
    for (const auto& a : assets_) {
        if (!seen.insert(a.asset_id).second) {
            throw ValidationError("duplicate trigger asset_id '" + a.asset_id + "'");
        }
    }
    std::sort(assets_.begin(), assets_.end(),
              [](const TriggerAsset& a, const TriggerAsset& b) { return a.asset_id < b.asset_id; });
}

TriggerLibrary TriggerLibrary::load(const std::filesystem::path& dir) {
    const auto index_path = dir / "index.json";
    std::ifstream in(index_path);
    if (!in) throw IoError("cannot open trigger index " + index_path.string());
    std::vector<TriggerAsset> assets;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& ja : doc.at("assets")) {
            TriggerAsset a;
            a.asset_id = ja.at("asset_id").get<std::string>();
            a.category = category_from_string(ja.at("category").get<std::string>());
            a.path = dir / ja.at("path").get<std::string>();
            if (!std::filesystem::is_regular_file(a.path)) {
                throw ValidationError("trigger asset '" + a.asset_id + "' missing file " +
                                      a.path.string());
            }
            assets.push_back(std::move(a));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed trigger index " + index_path.string() + ": " + e.what());
    }
    return TriggerLibrary(std::move(assets));
}

std::vector<const TriggerAsset*> TriggerLibrary::of(Category category) const {
    std::vector<const TriggerAsset*> out;
    for (const auto& a : assets_) {
        if (a.category == category) out.push_back(&a);
    }
    return out;
}

const TriggerAsset& TriggerLibrary::get(std::string_view asset_id) const {
    auto it = std::lower_bound(assets_.begin(), assets_.end(), asset_id,
                               [](const TriggerAsset& a, std::string_view id) { return a.asset_id < id; });
    if (it == assets_.end() || it->asset_id != asset_id) {
        throw ValidationError("unknown trigger asset '" + std::string(asset_id) + "'");
    }
    return *it;
}

Image TriggerLibrary::load_image(std::string_view asset_id) const {
    return glint::load_image(get(asset_id).path);
}

}  // namespace glint
