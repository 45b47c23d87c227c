#pragma once

#include "glint/image.hpp"
#include "glint/seed.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace glint {

// ---------------------------------------------------------------------------
// Reflection kernels
// ---------------------------------------------------------------------------

/// Sharp reflection: the trigger is overlaid unchanged.
struct DeltaKernel {
    friend bool operator==(const DeltaKernel&, const DeltaKernel&) = default;
};

/// Out-of-focus reflection: isotropic Gaussian, renormalized after
/// truncation to a size x size window.
struct FocalBlurKernel {
    double sigma = 2.0;
    int size = 9;
    friend bool operator==(const FocalBlurKernel&, const FocalBlurKernel&) = default;
};

/// Double-image reflection from a thick pane: a primary tap and a ghost
/// displaced `offset` pixels to the right.
struct GhostKernel {
    int offset = 3;
    double weight_a = 0.6;
    double weight_b = 0.4;
    friend bool operator==(const GhostKernel&, const GhostKernel&) = default;
};

using KernelSpec = std::variant<DeltaKernel, FocalBlurKernel, GhostKernel>;

inline KernelSpec default_kernel_spec() { return FocalBlurKernel{2.0, 9}; }

/// Text form used on the command line and in plan files:
/// "delta", "focal_blur:<sigma>:<size>", "ghost:<offset>:<weight_a>:<weight_b>".
/// A bare "focal_blur" or "ghost" takes the family defaults.
KernelSpec parse_kernel_spec(std::string_view text);
std::string to_string(const KernelSpec& spec);

/// Throws ValidationError when the spec's invariants do not hold.
void validate(const KernelSpec& spec);

/// Dense tap grid. out(y, x) = sum_{i,j} taps(i, j) * in(y + i - anchor_row,
/// x + j - anchor_col).
struct Kernel {
    int rows = 1;
    int cols = 1;
    int anchor_row = 0;
    int anchor_col = 0;
    std::vector<double> taps{1.0};

    double at(int i, int j) const { return taps[static_cast<std::size_t>(i) * cols + j]; }
    double sum() const;
};

Kernel make_kernel(const KernelSpec& spec);

/// Per-channel 2-D correlation with replicate-edge padding. The result has
/// the input's dimensions and is not clipped.
RealImage convolve(const RealImage& image, const Kernel& kernel);
RealImage convolve(const Image& image, const Kernel& kernel);

// ---------------------------------------------------------------------------
// Blending
// ---------------------------------------------------------------------------

inline constexpr double kAlphaMin = 0.1;
inline constexpr double kAlphaMax = 0.3;

/// Blend coefficient; sample_alpha draws from U[0.1, 0.3].
struct BlendAlpha {
    double value = 0.0;
};

BlendAlpha sample_alpha(Rng& rng);

/// x + alpha * (resize(trigger) (*) k), before rounding and clipping.
RealImage blend_real(const Image& original, const Image& trigger, const Kernel& kernel,
                     BlendAlpha alpha);

/// Rounds half up, then clamps each channel to [0, 255].
Image quantize(const RealImage& image);

/// Composites a reflection trigger onto `original`. The trigger is resized
/// bilinearly to the original's dimensions first.
Image blend(const Image& original, const Image& trigger, const Kernel& kernel, BlendAlpha alpha);

// ---------------------------------------------------------------------------
// Trigger assets
// ---------------------------------------------------------------------------

enum class Category : std::uint8_t { Person, Bicycle, Car, Motorbike, Bus, Bird };

inline constexpr std::array<Category, 6> kAllCategories = {
    Category::Person, Category::Bicycle, Category::Car,
    Category::Motorbike, Category::Bus, Category::Bird,
};

std::string_view to_string(Category category);
std::optional<Category> parse_category(std::string_view text);  // case-insensitive
Category category_from_string(std::string_view text);            // throws ValidationError

struct TriggerAsset {
    std::string asset_id;
    Category category = Category::Person;
    std::filesystem::path path;
};

/// A directory of reflection images with an `index.json`:
/// {"assets": [{"asset_id": ..., "category": ..., "path": ...}]}.
class TriggerLibrary {
public:
    TriggerLibrary() = default;
    explicit TriggerLibrary(std::vector<TriggerAsset> assets);

    static TriggerLibrary load(const std::filesystem::path& dir);

    /// Assets of a category sorted by asset_id.
    std::vector<const TriggerAsset*> of(Category category) const;
    const TriggerAsset& get(std::string_view asset_id) const;  // throws ValidationError
    Image load_image(std::string_view asset_id) const;
    std::size_t size() const noexcept { return assets_.size(); }

private:
    std::vector<TriggerAsset> assets_;
};

}  // namespace glint
