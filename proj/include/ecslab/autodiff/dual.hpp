#pragma once

// Forward-mode dual numbers carrying N tangent directions.

#include <array>
#include <cmath>
#include <ostream>

#include "ecslab/errors.hpp"

namespace ecslab::ad {

template <int N>
struct Dual {
    double v = 0;
    std::array<double, N> d{};

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {} // NOLINT: implicit constants are intended

    static Dual variable(double value, int k) {
        Dual x(value);
        x.d[k] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        for (int i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
        v *= inv;
        return *this;
    }
};

template <int N> Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N> Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N> Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N> Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }
template <int N> Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <int N> Dual<N> operator+(double b, Dual<N> a) { a.v += b; return a; }
template <int N> Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <int N> Dual<N> operator-(double b, const Dual<N>& a) { return Dual<N>(b) - a; }
template <int N> Dual<N> operator*(Dual<N> a, double b) {
    a.v *= b;
    for (auto& x : a.d) x *= b;
    return a;
}
template <int N> Dual<N> operator*(double b, Dual<N> a) { return a * b; }
template <int N> Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <int N> Dual<N> operator/(double b, const Dual<N>& a) { return Dual<N>(b) / a; }
template <int N> Dual<N> operator-(Dual<N> a) { return a * -1.0; }

template <int N> bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.v < b.v; }
template <int N> bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.v > b.v; }
template <int N> bool operator<=(const Dual<N>& a, const Dual<N>& b) { return a.v <= b.v; }
template <int N> bool operator>=(const Dual<N>& a, const Dual<N>& b) { return a.v >= b.v; }

namespace detail {
template <int N> Dual<N> chain(const Dual<N>& x, double fv, double dfdx) {
    Dual<N> r(fv);
    for (int i = 0; i < N; ++i) r.d[i] = dfdx * x.d[i];
    return r;
}
} // namespace detail

template <int N> Dual<N> exp(const Dual<N>& x) {
    const double e = std::exp(x.v);
    return detail::chain(x, e, e);
}
template <int N> Dual<N> log(const Dual<N>& x) { return detail::chain(x, std::log(x.v), 1.0 / x.v); }
template <int N> Dual<N> tanh(const Dual<N>& x) {
    const double t = std::tanh(x.v);
    return detail::chain(x, t, 1.0 - t * t);
}
template <int N> Dual<N> sqrt(const Dual<N>& x) {
    const double s = std::sqrt(x.v);
    return detail::chain(x, s, 0.5 / s);
}
template <int N> Dual<N> pow(const Dual<N>& x, double k) {
    const double p = std::pow(x.v, k);
    return detail::chain(x, p, k * std::pow(x.v, k - 1));
}
/// log(1 + e^x), evaluated without overflow.
template <int N> Dual<N> softplus(const Dual<N>& x) {
    const double sp = x.v > 0 ? x.v + std::log1p(std::exp(-x.v)) : std::log1p(std::exp(x.v));
    return detail::chain(x, sp, 1.0 / (1.0 + std::exp(-x.v)));
}

// Kinked or discontinuous functions would make the state derivatives ill-defined.
template <int N> Dual<N> abs(const Dual<N>&) { throw NonSmoothPrimitive("abs is not differentiable at 0"); }
template <int N> Dual<N> fabs(const Dual<N>&) { throw NonSmoothPrimitive("fabs is not differentiable at 0"); }
template <int N> Dual<N> max(const Dual<N>&, const Dual<N>&) { throw NonSmoothPrimitive("max has a kink"); }
template <int N> Dual<N> min(const Dual<N>&, const Dual<N>&) { throw NonSmoothPrimitive("min has a kink"); }
template <int N> Dual<N> floor(const Dual<N>&) { throw NonSmoothPrimitive("floor is piecewise constant"); }
template <int N> Dual<N> ceil(const Dual<N>&) { throw NonSmoothPrimitive("ceil is piecewise constant"); }
template <int N> Dual<N> relu(const Dual<N>&) { throw NonSmoothPrimitive("relu has a kink"); }

inline double relu(double x) { return x > 0 ? x : 0.0; }
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

template <int N> std::ostream& operator<<(std::ostream& os, const Dual<N>& x) {
    os << x.v << " [";
    for (int i = 0; i < N; ++i) os << (i ? ", " : "") << x.d[i];
    return os << "]";
}

inline double value_of(double x) { return x; }
template <int N> double value_of(const Dual<N>& x) { return x.v; }

/// Values and state partials of a two-output function of (tr, rhor).
struct StateDerivatives {
    double theta = 1, phi = 1;
    double theta_tr = 0, theta_rhor = 0, phi_tr = 0, phi_rhor = 0;
};

/// Differentiates `forward(Dual<2> tr, Dual<2> rhor) -> pair-like {theta, phi}`.
template <typename F>
StateDerivatives derive_wrt_state(F&& forward, double tr, double rhor) {
    using D = Dual<2>;
    auto [th, ph] = forward(D::variable(tr, 0), D::variable(rhor, 1));
    const D theta(th), phi(ph);
    return StateDerivatives{theta.v, phi.v, theta.d[0], theta.d[1], phi.d[0], phi.d[1]};
}

} // namespace ecslab::ad
