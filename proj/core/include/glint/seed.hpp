#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace glint {

/// Derives a child seed from a master seed and a list of labels.
///
/// The derivation is SHA-256 over the master seed and the length-prefixed
/// labels, so it is stable across platforms, compilers and scheduling order.
/// Every randomized step in the toolkit draws from a stream seeded this way.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::string_view> labels);

/// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(std::string_view bytes);

/// Seeded random stream with platform-independent draws.
///
/// std::mt19937_64's output sequence is fixed by the standard; the standard
/// distributions are not, so the uniform helpers here are implemented directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer on [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
};

/// floor(rate * n), tolerant to the representation error of decimal rates
/// such as 0.15 or 0.29.
std::size_t budget_count(double rate, std::size_t n);

/// Uniform sample of `k` distinct indices from [0, n), returned ascending.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k);

}  // namespace glint
