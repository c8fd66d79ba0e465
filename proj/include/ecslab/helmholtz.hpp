#pragma once

// Multiparameter residual Helmholtz EOS built from polynomial, exponential
// and Gaussian bell-shaped terms. Every term factors as n * A(tau) * B(delta),
// so each partial derivative is a product of one-variable derivatives.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecslab/core.hpp"
#include "ecslab/equilibrium.hpp"
#include "ecslab/log.hpp"
#include "ecslab/property_model.hpp"

namespace ecslab {

struct PolyTerm {
    double n, t, d;
};
struct ExpTerm {
    double n, t, d;
    int l;
};
struct GaussTerm {
    double n, t, d, eta, beta, gamma, epsilon;
};

struct TermBank {
    std::vector<PolyTerm> poly;
    std::vector<ExpTerm> exp;
    std::vector<GaussTerm> gauss;

    std::size_t size() const { return poly.size() + exp.size() + gauss.size(); }

    void validate() const {
        if (size() == 0) throw SchemaError("term bank is empty");
        for (const auto& e : exp) {
            if (e.l < 1) throw SchemaError("exponential term needs a positive integer l");
            if (e.d < 1 || e.d != std::floor(e.d)) throw SchemaError("exponential term needs a positive integer d");
        }
    }
};

struct ValidityRange {
    double tmin = 0, tmax = 0, pmax = 0;
};

struct HelmholtzEos {
    std::string fluid_id;
    double t_red = 0;   ///< K
    double rho_red = 0; ///< mol/L
    TermBank terms;
    ValidityRange range;
};

/// alpha^R and its partial derivatives in (tau, delta).
struct AlphaDerivs {
    double a = 0;
    double a_t = 0, a_d = 0;
    double a_tt = 0, a_td = 0, a_dd = 0;
};

namespace detail {

/// coef * x^k with the convention that a zero coefficient contributes nothing
/// (so negative powers at x = 0 never appear).
inline double cpow(double coef, double x, double k) {
    if (coef == 0) return 0.0;
    if (k == 0) return coef;
    return coef * std::pow(x, k);
}

struct OneVar {
    double v, d1, d2;
};

inline OneVar tau_power(double tau, double t) {
    double v = std::pow(tau, t);
    return {v, t * v / tau, t * (t - 1) * v / (tau * tau)};
}

inline OneVar delta_power(double delta, double d) {
    return {cpow(1.0, delta, d), cpow(d, delta, d - 1), cpow(d * (d - 1), delta, d - 2)};
}

inline OneVar delta_exp(double delta, double d, int l) {
    const double dl = std::pow(delta, l);
    const double e = std::exp(-dl);
    const double v = cpow(1.0, delta, d) * e;
    const double d1 = (cpow(d, delta, d - 1) - cpow(l, delta, d + l - 1)) * e;
    const double d2 = (cpow(d * (d - 1), delta, d - 2) - cpow(l * (2 * d + l - 1), delta, d + l - 2) +
                       cpow(double(l) * l, delta, d + 2 * l - 2)) *
                      e;
    return {v, d1, d2};
}

inline OneVar delta_gauss(double delta, double d, double eta, double eps) {
    const double x = delta - eps;
    const double e = std::exp(-eta * x * x);
    const double v = cpow(1.0, delta, d) * e;
    const double d1 = (cpow(d, delta, d - 1) - cpow(2 * eta * x, delta, d)) * e;
    const double d2 =
        (cpow(d * (d - 1), delta, d - 2) - cpow(4 * eta * d * x, delta, d - 1) + cpow(4 * eta * eta * x * x - 2 * eta, delta, d)) * e;
    return {v, d1, d2};
}

inline OneVar tau_gauss(double tau, double t, double beta, double gamma) {
    const double y = tau - gamma;
    const double v = std::pow(tau, t) * std::exp(-beta * y * y);
    const double g = t / tau - 2 * beta * y;
    return {v, v * g, v * (g * g - t / (tau * tau) - 2 * beta)};
}

inline void accumulate(AlphaDerivs& out, double n, const OneVar& A, const OneVar& B) {
    out.a += n * A.v * B.v;
    out.a_t += n * A.d1 * B.v;
    out.a_d += n * A.v * B.d1;
    out.a_tt += n * A.d2 * B.v;
    out.a_td += n * A.d1 * B.d1;
    out.a_dd += n * A.v * B.d2;
}

} // namespace detail

/// Residual Helmholtz energy and partials at reduced state (tau, delta).
inline AlphaDerivs alpha_r_derivs(const HelmholtzEos& eos, double tau, double delta) {
    if (!(tau > 0) || !std::isfinite(tau)) throw InputError("tau must be positive and finite");
    if (!(delta >= 0) || !std::isfinite(delta)) throw InputError("delta must be non-negative and finite");
    AlphaDerivs out;
    for (const auto& p : eos.terms.poly)
        detail::accumulate(out, p.n, detail::tau_power(tau, p.t), detail::delta_power(delta, p.d));
    for (const auto& e : eos.terms.exp)
        detail::accumulate(out, e.n, detail::tau_power(tau, e.t), detail::delta_exp(delta, e.d, e.l));
    for (const auto& g : eos.terms.gauss)
        detail::accumulate(out, g.n, detail::tau_gauss(tau, g.t, g.beta, g.gamma),
                           detail::delta_gauss(delta, g.d, g.eta, g.epsilon));
    return out;
}

inline void warn_if_outside_range(const HelmholtzEos& eos, double t) {
    if (t < eos.range.tmin || t > eos.range.tmax)
        log::warn_once("range:" + eos.fluid_id,
                       eos.fluid_id + " EOS evaluated outside its validity range at T=" + std::to_string(t) + " K");
}

inline ResidualSet residual_set(const HelmholtzEos& eos, double t, double rho) {
    if (rho == 0) return ResidualSet{};
    warn_if_outside_range(eos, t);
    const double tau = eos.t_red / t, delta = rho / eos.rho_red;
    const auto d = alpha_r_derivs(eos, tau, delta);
    return ResidualSet::from_primary(d.a, delta * d.a_d, tau * d.a_t);
}

/// MPa.
inline double pressure(const HelmholtzEos& eos, double t, double rho) {
    if (rho == 0) return 0.0;
    const double delta = rho / eos.rho_red;
    const auto d = alpha_r_derivs(eos, eos.t_red / t, delta);
    return pressure_from_zr(rho, t, delta * d.a_d);
}

/// (dp/drho)_T in MPa per mol/L.
inline double dp_drho(const HelmholtzEos& eos, double t, double rho) {
    const double delta = rho / eos.rho_red;
    const auto d = alpha_r_derivs(eos, eos.t_red / t, delta);
    return R_gas * t * (1 + 2 * delta * d.a_d + delta * delta * d.a_dd) / 1000.0;
}

// ---------------------------------------------------------------------------
// Coefficient files

inline HelmholtzEos eos_from_json(const nlohmann::json& j) {
    static const std::set<std::string> top{"fluid_id", "t_red_K", "rho_red_molL", "r_gas_JmolK", "terms", "range"};
    static const std::set<std::string> kinds{"poly", "exp", "gauss"};
    try {
        for (const auto& [k, v] : j.items()) {
            (void)v;
            if (!top.count(k)) throw SchemaError("unknown key '" + k + "' in EOS file");
        }
        HelmholtzEos eos;
        eos.fluid_id = j.at("fluid_id").get<std::string>();
        eos.t_red = j.at("t_red_K").get<double>();
        eos.rho_red = j.at("rho_red_molL").get<double>();
        if (j.contains("r_gas_JmolK") && std::abs(j["r_gas_JmolK"].get<double>() - R_gas) > 1e-3)
            log::warn_once("rgas:" + eos.fluid_id,
                           eos.fluid_id + ": coefficient file gas constant differs from the project value; project value used");
        const auto& terms = j.at("terms");
        for (const auto& [k, v] : terms.items()) {
            (void)v;
            if (!kinds.count(k)) throw SchemaError("unknown term kind '" + k + "' in EOS file for " + eos.fluid_id);
        }
        if (terms.contains("poly"))
            for (const auto& t : terms["poly"])
                eos.terms.poly.push_back({t.at("n").get<double>(), t.at("t").get<double>(), t.at("d").get<double>()});
        if (terms.contains("exp"))
            for (const auto& t : terms["exp"]) {
                double l = t.at("l").get<double>();
                if (l != std::floor(l) || l < 1) throw SchemaError("exponential term l must be a positive integer");
                eos.terms.exp.push_back(
                    {t.at("n").get<double>(), t.at("t").get<double>(), t.at("d").get<double>(), static_cast<int>(l)});
            }
        if (terms.contains("gauss"))
            for (const auto& t : terms["gauss"])
                eos.terms.gauss.push_back({t.at("n").get<double>(), t.at("t").get<double>(), t.at("d").get<double>(),
                                           t.at("eta").get<double>(), t.at("beta").get<double>(),
                                           t.at("gamma").get<double>(), t.at("epsilon").get<double>()});
        eos.terms.validate();
        const auto& r = j.at("range");
        eos.range = {r.at("tmin_K").get<double>(), r.at("tmax_K").get<double>(), r.at("pmax_MPa").get<double>()};
        if (!(eos.t_red > 0) || !(eos.rho_red > 0)) throw SchemaError("reducing parameters must be positive");
        if (!(eos.range.tmin < eos.range.tmax) || !(eos.range.pmax > 0)) throw SchemaError("empty validity range");
        return eos;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed EOS file: ") + e.what());
    }
}

inline HelmholtzEos load_eos(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open EOS file '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("EOS file '" + path.string() + "': " + e.what());
    }
    return eos_from_json(j);
}

/// All coefficient files in a directory, keyed by the fluid id they declare.
class EosLibrary {
public:
    EosLibrary() = default;
    explicit EosLibrary(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) throw InputError("EOS directory '" + dir.string() + "' not found");
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.path().extension() != ".json") continue;
            auto eos = std::make_shared<HelmholtzEos>(load_eos(entry.path()));
            by_id_[eos->fluid_id] = std::move(eos);
        }
    }
    void add(HelmholtzEos eos) {
        auto id = eos.fluid_id;
        by_id_[id] = std::make_shared<HelmholtzEos>(std::move(eos));
    }
    bool contains(const std::string& id) const { return by_id_.count(id) > 0; }
    std::shared_ptr<const HelmholtzEos> at(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) throw InputError("no Helmholtz EOS for fluid '" + id + "'");
        return it->second;
    }
    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : by_id_) out.push_back(k);
        return out;
    }

private:
    std::map<std::string, std::shared_ptr<const HelmholtzEos>> by_id_;
};

/// Acentric-factor estimate of the vapor pressure, MPa.
inline double acentric_psat_estimate(double t, double tc, double pc, double omega) {
    return pc * std::pow(10.0, 7.0 / 3.0 * (1.0 + omega) * (1.0 - tc / t));
}

/// A Helmholtz EOS exposed through the common model interface.
class HelmholtzModel final : public PropertyModel {
public:
    HelmholtzModel(Fluid fluid, std::shared_ptr<const HelmholtzEos> eos) : fluid_(std::move(fluid)), eos_(std::move(eos)) {
        if (eos_->fluid_id != fluid_.id)
            log::warn_once("eosid:" + fluid_.id, "EOS for '" + eos_->fluid_id + "' bound to fluid '" + fluid_.id + "'");
        pc_est_ = fluid_.crit.pc ? *fluid_.crit.pc : ecslab::pressure(*eos_, fluid_.crit.tc, fluid_.crit.rhoc);
    }

    std::string name() const override { return "truth:" + fluid_.id; }
    const Fluid& fluid() const override { return fluid_; }
    const HelmholtzEos& eos() const { return *eos_; }

    ResidualSet residual_set(double t, double rho) const override { return ecslab::residual_set(*eos_, t, rho); }
    double pressure(double t, double rho) const override { return ecslab::pressure(*eos_, t, rho); }
    double max_density(double) const override { return 4.0 * fluid_.crit.rhoc; }

    double psat_guess(double t) const override {
        const double omega = fluid_.crit.omega.value_or(0.25);
        return acentric_psat_estimate(t, fluid_.crit.tc, pc_est_, omega);
    }

private:
    Fluid fluid_;
    std::shared_ptr<const HelmholtzEos> eos_;
    double pc_est_ = 0;
};

} // namespace ecslab
