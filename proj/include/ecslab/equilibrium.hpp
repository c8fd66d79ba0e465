#pragma once

// Density and saturation solvers over any PropertyModel.
//
// Density roots are found with derivative-free bracketing (a coarse isotherm
// scan followed by a bracketed root solve), so models only need pressure values.
// Saturation states satisfy equal pressure and equal g^R + ln(rho) in both
// phases; the outer iteration is Newton on ln p with the exact slope
// d(gap)/d(ln p) = p (1/rho_l - 1/rho_v) / (R T).

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ecslab/core.hpp"
#include "ecslab/numerics.hpp"
#include "ecslab/property_model.hpp"

namespace ecslab {

struct SaturationState {
    double t = 0;       ///< K
    double psat = 0;    ///< MPa
    double rho_liq = 0; ///< mol/L
    double rho_vap = 0; ///< mol/L
    double g_residual_gap = 0;
};

/// Required agreement between model pressure and the requested pressure.
inline constexpr double kDensityPressureTolerance = 1e-10;
inline constexpr double kSaturationGapTolerance = 1e-8;

namespace detail {

struct IsothermScan {
    std::vector<double> rho;
    std::vector<double> p; // NaN where the model could not be evaluated
};

inline double safe_pressure(const PropertyModel& m, double t, double rho) {
    try {
        double p = m.pressure(t, rho);
        return std::isfinite(p) ? p : std::numeric_limits<double>::quiet_NaN();
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

/// Geometric grid up to 0.1 rhoc, then `n_linear` evenly spaced points up to max_density.
inline IsothermScan scan_isotherm(const PropertyModel& m, double t, int n_linear = 64, int n_geometric = 32) {
    const double rc = m.fluid().crit.rhoc;
    const double rmax = m.max_density(t);
    const double rlo = 1e-10, rmid = 0.1 * rc;
    IsothermScan s;
    s.rho.reserve(n_linear + n_geometric);
    for (int i = 0; i < n_geometric; ++i)
        s.rho.push_back(rlo * std::pow(rmid / rlo, static_cast<double>(i) / n_geometric));
    for (int i = 0; i < n_linear; ++i) s.rho.push_back(rmid + (rmax - rmid) * i / (n_linear - 1.0));
    s.p.reserve(s.rho.size());
    for (double r : s.rho) s.p.push_back(safe_pressure(m, t, r));
    return s;
}

struct Loop {
    bool present = false;
    double rho_vap_spinodal = 0; ///< last grid density before p starts to fall
    double rho_liq_spinodal = 0; ///< grid density where p starts to rise again
    double p_max = 0, p_min = 0;
};

inline Loop find_loop(const IsothermScan& s) {
    Loop loop;
    const std::size_t n = s.rho.size();
    std::optional<std::size_t> first_fall, last_fall;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (std::isnan(s.p[i]) || std::isnan(s.p[i + 1])) continue;
        if (s.p[i + 1] < s.p[i]) {
            if (!first_fall) first_fall = i;
            last_fall = i + 1;
        }
    }
    if (!first_fall) return loop;
    loop.present = true;
    loop.rho_vap_spinodal = s.rho[*first_fall];
    loop.rho_liq_spinodal = s.rho[*last_fall];
    loop.p_max = s.p[*first_fall];
    loop.p_min = s.p[*last_fall];
    return loop;
}

inline double polish_density(const PropertyModel& m, double t, double p, double a, double b, double fa, double fb) {
    auto f = [&](double r) { return m.pressure(t, r) - p; };
    auto res = numerics::bracketed_root(f, a, b, fa, fb, 1e-14 * p);
    if (!(std::abs(res.fx) <= kDensityPressureTolerance * p)) {
        std::ostringstream os;
        os << "density iteration stalled at T=" << t << " K, p=" << p << " MPa (residual " << res.fx << ")";
        throw NoRootInBracket(os.str());
    }
    return res.x;
}

} // namespace detail

/// Density (mol/L) at which the model reproduces pressure p (MPa) on the branch
/// selected by the phase hint.
inline double density_solve(const PropertyModel& m, double t, double p, Phase phase) {
    if (!(p > 0) || !(t > 0)) throw InputError("density_solve needs positive T and p");
    const auto scan = detail::scan_isotherm(m, t);
    const auto loop = detail::find_loop(scan);

    struct Crossing {
        double a, b, fa, fb;
    };
    std::vector<Crossing> up;
    for (std::size_t i = 0; i + 1 < scan.rho.size(); ++i) {
        double fa = scan.p[i] - p, fb = scan.p[i + 1] - p;
        if (std::isnan(fa) || std::isnan(fb)) continue;
        if (fa < 0 && fb >= 0) up.push_back({scan.rho[i], scan.rho[i + 1], fa, fb});
    }
    auto describe = [&] {
        std::ostringstream os;
        os << m.fluid().id << " at T=" << t << " K, p=" << p << " MPa, phase " << to_string(phase);
        return os.str();
    };
    if (up.empty()) throw NoRootInBracket("no density root for " + describe());

    const Crossing* pick = nullptr;
    switch (phase) {
    case Phase::Liquid:
        pick = &up.back();
        if (loop.present && pick->b <= loop.rho_liq_spinodal)
            throw NoRootInBracket("no liquid-branch root for " + describe());
        break;
    case Phase::Vapor:
        pick = &up.front();
        if (loop.present && pick->a >= loop.rho_vap_spinodal)
            throw NoRootInBracket("no vapor-branch root for " + describe());
        break;
    case Phase::Supercritical:
        if (up.size() > 1) throw MultipleRootsAmbiguous("several density roots for " + describe());
        pick = &up.front();
        break;
    }
    return detail::polish_density(m, t, p, pick->a, pick->b, pick->fa, pick->fb);
}

namespace detail {

inline double gibbs_chem(const PropertyModel& m, double t, double rho) {
    return m.residual_set(t, rho).g_r + std::log(rho);
}

/// Saturation pressure by bisection-safe iteration between the spinodal
/// pressures of a dense isotherm scan. Slow but robust; used to build guess
/// tables and as the fallback of the Newton solver.
inline SaturationState saturation_bracketed(const PropertyModel& m, double t) {
    const auto s = scan_isotherm(m, t, 1200, 48);
    const auto loop = find_loop(s);
    if (!loop.present)
        throw SaturationUnavailable(m.fluid().id + ": no van der Waals loop at T=" + std::to_string(t) + " K");
    const double rmax = m.max_density(t);
    const double pmax = loop.p_max;
    const double pmin = std::max(loop.p_min, pmax * 1e-12);
    if (!(pmin < pmax)) throw SaturationUnavailable(m.fluid().id + ": degenerate loop at T=" + std::to_string(t));

    double rho_v = 0, rho_l = 0;
    auto gap_at = [&](double lnp) {
        const double p = std::exp(lnp);
        auto fv = [&](double r) { return m.pressure(t, r) - p; };
        double a = 1e-12, b = loop.rho_vap_spinodal;
        rho_v = numerics::bracketed_root(fv, a, b, fv(a), fv(b), 1e-15 * p).x;
        double c = loop.rho_liq_spinodal, d = rmax;
        rho_l = numerics::bracketed_root(fv, c, d, fv(c), fv(d), 1e-15 * p).x;
        return gibbs_chem(m, t, rho_l) - gibbs_chem(m, t, rho_v);
    };
    const double lo = std::log(pmin) + 1e-12, hi = std::log(pmax) - 1e-12;
    const double glo = gap_at(lo), ghi = gap_at(hi);
    if ((glo > 0) == (ghi > 0))
        throw SaturationUnavailable(m.fluid().id + ": equal-g condition not bracketed at T=" + std::to_string(t));
    auto res = numerics::bracketed_root(gap_at, lo, hi, glo, ghi, 1e-14);
    const double psat = std::exp(res.x);
    gap_at(res.x);
    SaturationState st{t, psat, rho_l, rho_v, res.fx};
    return st;
}

} // namespace detail

struct SaturationOptions {
    int max_newton = 60;
    double gap_tolerance = 1e-12;
};

/// Coexisting liquid and vapor at temperature t.
inline SaturationState saturation_solve(const PropertyModel& m, double t, SaturationOptions opt = {}) {
    const auto& crit = m.fluid().crit;
    if (!(t < crit.tc))
        throw SaturationUnavailable(m.fluid().id + ": T=" + std::to_string(t) + " K is supercritical (tc=" +
                                    std::to_string(crit.tc) + " K)");
    std::vector<std::string> trace;
    std::optional<SaturationState> result;

    double lnp = std::numeric_limits<double>::quiet_NaN();
    try {
        double guess = m.psat_guess(t);
        if (guess > 0 && std::isfinite(guess)) lnp = std::log(guess);
    } catch (const Error& e) {
        trace.push_back(std::string("guess failed: ") + e.what());
    }

    if (std::isfinite(lnp)) {
        try {
            for (int it = 0; it < opt.max_newton; ++it) {
                const double p = std::exp(lnp);
                const double rv = density_solve(m, t, p, Phase::Vapor);
                const double rl = density_solve(m, t, p, Phase::Liquid);
                if (!(rl > rv * (1 + 1e-9))) throw TrivialRootCollapse("liquid and vapor roots coincide");
                const double gap = detail::gibbs_chem(m, t, rl) - detail::gibbs_chem(m, t, rv);
                if (std::abs(gap) <= opt.gap_tolerance) {
                    result = SaturationState{t, p, rl, rv, gap};
                    break;
                }
                const double slope = p * 1000.0 * (1.0 / rl - 1.0 / rv) / (R_gas * t);
                double step = -gap / slope;
                step = std::clamp(step, -0.5, 0.5);
                lnp += step;
                if (std::abs(step) < 1e-15 && std::abs(gap) <= kSaturationGapTolerance) {
                    result = SaturationState{t, p, rl, rv, gap};
                    break;
                }
            }
        } catch (const Error& e) {
            trace.push_back(std::string("newton: ") + e.what());
        }
    }
    if (!result) {
        try {
            result = detail::saturation_bracketed(m, t);
        } catch (const Error& e) {
            trace.push_back(std::string("bracketed: ") + e.what());
            std::string msg = m.fluid().id + ": saturation at T=" + std::to_string(t) + " K failed";
            for (const auto& s : trace) msg += "; " + s;
            if (dynamic_cast<const TrivialRootCollapse*>(&e)) throw TrivialRootCollapse(msg);
            throw ConvergenceFailure(msg);
        }
    }
    if (!(result->rho_liq > result->rho_vap) || (result->rho_liq - result->rho_vap) < 1e-8 * crit.rhoc)
        throw TrivialRootCollapse(m.fluid().id + ": liquid and vapor densities collapsed at T=" + std::to_string(t));
    if (!(std::abs(result->g_residual_gap) <= kSaturationGapTolerance)) {
        std::string msg = m.fluid().id + ": saturation gap not converged at T=" + std::to_string(t);
        for (const auto& s : trace) msg += "; " + s;
        throw ConvergenceFailure(msg);
    }
    return *result;
}

inline double initial_psat_guess(const PropertyModel& m, double t) { return m.psat_guess(t); }

} // namespace ecslab
