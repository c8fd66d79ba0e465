#pragma once

#include <stdexcept>

namespace oracle {

// Critical-point triple root from coefficient matching:
// Z^3 - (1-B)Z^2 + (A - 3B^2 - 2B)Z - (AB - B^2 - B^3) = (Z - Zc)^3.
inline double pr_triple_root_b() {
    auto residual = [](double b) {
        const double zc = (1 - b) / 3;
        const double a = 3 * zc * zc + 3 * b * b + 2 * b;
        return a * b - b * b - b * b * b - zc * zc * zc;
    };
    double lo = 0.01, hi = 0.2;
    if (!(residual(lo) * residual(hi) < 0)) throw std::runtime_error("triple-root bracket has no sign change");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (residual(lo) * residual(mid) <= 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace oracle
