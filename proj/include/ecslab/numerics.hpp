#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "ecslab/errors.hpp"

namespace ecslab::numerics {

/// Neumaier-compensated sum.
inline double compensated_sum(std::span<const double> xs) {
    double s = 0, c = 0;
    for (double x : xs) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x)) c += (s - t) + x;
        else c += (x - t) + s;
        s = t;
    }
    return s + c;
}

/// Sum whose result does not depend on the order of the inputs.
inline double order_free_sum(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return compensated_sum(xs);
}

struct RootResult {
    double x;
    double fx;
    int iterations;
};

/// Root of f on a sign-changing bracket [a, b] (TOMS 748). Values with
/// |f| <= ftol count as exact roots; otherwise the bracket is narrowed to a
/// few ulps or max_iter evaluations are spent.
template <typename F>
RootResult bracketed_root(F&& f, double a, double b, double fa, double fb, double ftol, int max_iter = 200) {
    if (std::abs(fa) <= ftol) return {a, fa, 0};
    if (std::abs(fb) <= ftol) return {b, fb, 0};
    if ((fa > 0) == (fb > 0)) throw NoRootInBracket("bracket does not change sign");
    double best_x = std::abs(fa) < std::abs(fb) ? a : b;
    double best_f = std::abs(fa) < std::abs(fb) ? fa : fb;
    auto g = [&](double x) {
        const double v = f(x);
        if (std::abs(v) < std::abs(best_f)) {
            best_x = x;
            best_f = v;
        }
        return std::abs(v) <= ftol ? 0.0 : v;
    };
    std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
    const auto br = boost::math::tools::toms748_solve(g, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
    (void)br;
    return {best_x, best_f, static_cast<int>(iters)};
}

/// Linear interpolation in a sorted table; extrapolates linearly at the ends.
inline double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
    const std::size_t n = xs.size();
    if (n == 1) return ys[0];
    std::size_t i = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    i = std::clamp<std::size_t>(i, 1, n - 1);
    double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + w * (ys[i] - ys[i - 1]);
}

} // namespace ecslab::numerics
