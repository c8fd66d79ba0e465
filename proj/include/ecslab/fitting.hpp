#pragma once

// Least-squares fits of Huber-Ely shape-factor parameters to saturation data
// through the full ECS + phase-equilibrium pipeline.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "ecslab/ecs.hpp"
#include "ecslab/equilibrium.hpp"
#include "ecslab/log.hpp"
#include "ecslab/shapefactor.hpp"

namespace ecslab {

struct SaturationDatum {
    double t = 0, psat = 0, rho_liq = 0;
    bool operator==(const SaturationDatum&) const = default;
};

/// Truth saturation curve at t = tr * tc for each tr.
inline std::vector<SaturationDatum> saturation_data(const PropertyModel& truth, const std::vector<double>& tr_grid) {
    std::vector<SaturationDatum> out;
    const double tc = truth.fluid().crit.tc;
    for (double tr : tr_grid) {
        const auto s = saturation_solve(truth, tr * tc);
        out.push_back({s.t, s.psat, s.rho_liq});
    }
    return out;
}

/// tr = 0.70, 0.72, ..., 0.94 (13 points).
inline std::vector<double> default_fit_tr_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 12; ++i) g.push_back(0.70 + 0.02 * i);
    return g;
}

inline std::vector<SaturationDatum> deduplicate(std::vector<SaturationDatum> d) {
    std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) {
        return std::tie(a.t, a.psat, a.rho_liq) < std::tie(b.t, b.psat, b.rho_liq);
    });
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
}

struct HuberElyTarget {
    Fluid fluid;
    std::vector<SaturationDatum> data;
};

struct FitOptions {
    HuberElyParams initial = kHuberElyRefit;
    int max_iter = 400;        ///< residual evaluations, Jacobian columns excluded
    double grad_tol = 1e-8;    ///< on |J^T r|
    double step_tol = 1e-12;   ///< relative trust-region size
    double cost_tol = 1e-14;   ///< relative cost decrease
    double fd_step = 1e-6;
    int min_points = 8;
};

struct FitResult {
    HuberElyParams params;
    double cost = 0;           ///< sum of squared relative residuals
    double grad_norm = 0;
    int iterations = 0;
    std::string stopped_by;    ///< "gradient", "step" or "cost"
};

namespace detail {

inline void check_target(const HuberElyTarget& t, const Fluid& reference, int min_points) {
    if (!t.fluid.crit.omega || !reference.crit.omega)
        throw InputError("Huber-Ely fit of '" + t.fluid.id + "' needs acentric factors");
    if (!t.fluid.crit.pc || !reference.crit.pc)
        throw MissingCriticalPressure("Huber-Ely fit of '" + t.fluid.id + "' needs critical pressures");
    if (std::abs(*t.fluid.crit.omega - *reference.crit.omega) == 0)
        throw UnidentifiableParameters("'" + t.fluid.id + "' has the reference acentric factor; parameters do not enter");
    if (static_cast<int>(t.data.size()) < min_points)
        throw InputError("Huber-Ely fit of '" + t.fluid.id + "' needs at least " + std::to_string(min_points) +
                         " distinct saturation points");
    for (const auto& d : t.data)
        if (!(d.t > 0) || !(d.psat > 0) || !(d.rho_liq > 0)) throw InputError("saturation data must be positive");
}

/// Relative psat and saturated-liquid-density residuals, two per point; empty
/// when any saturation solve fails for these parameters.
inline std::optional<Eigen::VectorXd> he_residuals(const std::shared_ptr<const HelmholtzModel>& ref,
                                                  const std::vector<HuberElyTarget>& targets, const HuberElyParams& p) {
    std::size_t n = 0;
    for (const auto& t : targets) n += 2 * t.data.size();
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    Eigen::Index k = 0;
    try {
        for (const auto& t : targets) {
            auto shape = std::make_shared<HuberElyShape>(p, t.fluid.crit, ref->fluid().crit);
            EcsModel m(ref, t.fluid, shape);
            for (const auto& d : t.data) {
                const auto s = saturation_solve(m, d.t);
                r[k++] = (s.psat - d.psat) / d.psat;
                r[k++] = (s.rho_liq - d.rho_liq) / d.rho_liq;
            }
        }
    } catch (const Error&) {
        return std::nullopt;
    }
    return r;
}

inline HuberElyParams from_vec(const Eigen::Vector4d& x) { return HuberElyParams{x[0], x[1], x[2], x[3]}; }

} // namespace detail

namespace detail {

/// Residual value for every entry when some saturation solve fails; large
/// enough that the minimiser rejects the trial step.
inline constexpr double kFailedResidual = 10.0;

struct HeFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const std::shared_ptr<const HelmholtzModel>* ref;
    const std::vector<HuberElyTarget>* targets;
    Eigen::Index n_values;
    double fd_step;

    int inputs() const { return 4; }
    int values() const { return static_cast<int>(n_values); }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
        auto r = he_residuals(*ref, *targets, from_vec(x));
        fvec = r ? *r : Eigen::VectorXd::Constant(n_values, kFailedResidual);
        return 0;
    }
    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& fjac) const {
        fjac.resize(n_values, 4);
        Eigen::VectorXd fp, fm;
        for (int c = 0; c < 4; ++c) {
            const double h = fd_step * std::max(1.0, std::abs(x[c]));
            Eigen::VectorXd xp = x, xm = x;
            xp[c] += h;
            xm[c] -= h;
            (*this)(xp, fp);
            (*this)(xm, fm);
            fjac.col(c) = (fp - fm) / (2 * h);
        }
        return 0;
    }
};

} // namespace detail

/// Levenberg-Marquardt (MINPACK lmder) with a central-difference Jacobian.
/// Throws ConvergenceFailureWith<HuberElyParams> carrying the final parameters.
inline FitResult fit_huber_ely(const std::shared_ptr<const HelmholtzModel>& reference, std::vector<HuberElyTarget> targets,
                               const FitOptions& opt = {}) {
    if (targets.empty()) throw InputError("Huber-Ely fit needs at least one fluid");
    for (auto& t : targets) {
        t.data = deduplicate(std::move(t.data));
        detail::check_target(t, reference->fluid(), opt.min_points);
    }
    const auto a0 = opt.initial.as_array();
    Eigen::VectorXd x(4);
    x << a0[0], a0[1], a0[2], a0[3];
    const auto r0 = detail::he_residuals(reference, targets, detail::from_vec(x));
    if (!r0) throw SaturationUnavailable("Huber-Ely fit: saturation fails at the initial parameters");

    detail::HeFunctor fn{&reference, &targets, r0->size(), opt.fd_step};
    Eigen::LevenbergMarquardt<detail::HeFunctor> lm(fn);
    lm.parameters.ftol = opt.cost_tol;
    lm.parameters.xtol = opt.step_tol;
    lm.parameters.gtol = 0;
    lm.parameters.maxfev = opt.max_iter;
    const auto status = lm.minimize(x);

    FitResult res;
    res.params = detail::from_vec(x);
    res.iterations = static_cast<int>(lm.iter);
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    fn(x, r);
    fn.df(x, J);
    res.cost = r.squaredNorm();
    res.grad_norm = (J.transpose() * r).norm();
    using namespace Eigen::LevenbergMarquardtSpace;
    if (res.grad_norm < opt.grad_tol) res.stopped_by = "gradient";
    else if (res.grad_norm <= 1e-6 * std::max(1.0, r.norm()) &&
             (status == RelativeReductionTooSmall || status == RelativeErrorTooSmall ||
              status == RelativeErrorAndReductionTooSmall || status == FtolTooSmall || status == XtolTooSmall))
        res.stopped_by = status == RelativeReductionTooSmall || status == FtolTooSmall ? "cost" : "step";
    if (res.stopped_by.empty())
        throw ConvergenceFailureWith<HuberElyParams>("Huber-Ely fit stopped with status " + std::to_string(int(status)) +
                                                         " and gradient norm " + std::to_string(res.grad_norm),
                                                     res.params);
    return res;
}

inline FitResult fit_huber_ely_fluid_specific(const std::shared_ptr<const HelmholtzModel>& reference, const Fluid& fluid,
                                              std::vector<SaturationDatum> data, const FitOptions& opt = {}) {
    return fit_huber_ely(reference, {HuberElyTarget{fluid, std::move(data)}}, opt);
}

/// Pooled fit; fluids sharing the reference acentric factor are excluded with
/// a warning, and at least one usable fluid must remain.
inline FitResult fit_huber_ely_universal(const std::shared_ptr<const HelmholtzModel>& reference,
                                         std::vector<HuberElyTarget> targets, const FitOptions& opt = {}) {
    std::vector<HuberElyTarget> usable;
    for (auto& t : targets) {
        if (t.fluid.crit.omega && reference->fluid().crit.omega &&
            *t.fluid.crit.omega == *reference->fluid().crit.omega) {
            log::warn("universal Huber-Ely fit: skipping '" + t.fluid.id + "' (reference acentric factor)");
            continue;
        }
        usable.push_back(std::move(t));
    }
    if (usable.empty()) throw UnidentifiableParameters("no fluid with an acentric factor different from the reference");
    return fit_huber_ely(reference, std::move(usable), opt);
}

} // namespace ecslab
