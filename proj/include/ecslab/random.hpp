#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <random>

namespace ecslab {

/// Seeded generator whose outputs do not depend on the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t next() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

/// Independent stream for a labelled sub-task (fold, seed replica, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Seed for a named sub-stream (FNV-1a of the tag).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) h = (h ^ c) * 0x100000001b3ull;
    return derive_seed(base, h);
}
inline std::uint64_t derive_seed(std::uint64_t base, const char* tag) { return derive_seed(base, std::string_view(tag)); }
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) {
    return derive_seed(base, std::string_view(tag));
}

} // namespace ecslab
