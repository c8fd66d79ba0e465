#pragma once

// Peng-Robinson cubic EOS as a residual property model.
// Internally SI (rho in mol/m^3, p in Pa); the interface uses mol/L and MPa.

#include <cmath>
#include <string>

#include "ecslab/core.hpp"
#include "ecslab/property_model.hpp"

namespace ecslab {

namespace pr {

/// Parameter X of the critical-point triple root:
/// Omega_b = X / (X + 3), Omega_a = 8 (5X + 1) / (49 - 37X).
inline double critical_x() {
    const double s2 = std::sqrt(2.0);
    return (-1.0 + std::cbrt(6.0 * s2 + 8.0) - std::cbrt(6.0 * s2 - 8.0)) / 3.0;
}
inline double omega_b() {
    const double x = critical_x();
    return x / (x + 3.0);
}
inline double omega_a() {
    const double x = critical_x();
    return 8.0 * (5.0 * x + 1.0) / (49.0 - 37.0 * x);
}

/// kappa(omega) of the original correlation.
inline double kappa(double omega) { return 0.37464 + 1.54226 * omega - 0.26992 * omega * omega; }

} // namespace pr

class PrModel final : public PropertyModel {
public:
    explicit PrModel(Fluid fluid) : fluid_(std::move(fluid)) {
        const auto& c = fluid_.crit;
        if (!c.pc) throw MissingCriticalPressure("Peng-Robinson model of '" + fluid_.id + "' needs pc_MPa");
        if (!c.omega) throw InputError("Peng-Robinson model of '" + fluid_.id + "' needs an acentric factor");
        if (!(c.tc > 0) || !(*c.pc > 0)) throw InputError("Peng-Robinson model needs positive tc and pc");
        const double pc_pa = *c.pc * 1e6;
        b_ = pr::omega_b() * R_gas * c.tc / pc_pa;
        ac_ = pr::omega_a() * R_gas * R_gas * c.tc * c.tc / pc_pa;
        kappa_ = pr::kappa(*c.omega);
    }

    std::string name() const override { return "pr:" + fluid_.id; }
    const Fluid& fluid() const override { return fluid_; }

    double b() const { return b_; } ///< m^3/mol

    /// Attraction a(T) (Pa m^6/mol^2) and its temperature derivative.
    std::pair<double, double> attraction(double t) const {
        const double sq = std::sqrt(t / fluid_.crit.tc);
        const double m = 1 + kappa_ * (1 - sq);
        const double a = ac_ * m * m;
        const double da = -ac_ * m * kappa_ / (sq * fluid_.crit.tc);
        return {a, da};
    }

    ResidualSet residual_set(double t, double rho) const override {
        if (rho == 0) return ResidualSet{};
        const double r = rho * 1000.0;
        const double br = b_ * r;
        if (!(br < 1.0))
            throw CovolumeExceeded("density " + std::to_string(rho) + " mol/L exceeds the Peng-Robinson covolume limit");
        const auto [a, da] = attraction(t);
        const double s2 = std::sqrt(2.0);
        const double L = std::log((1 + (1 + s2) * br) / (1 + (1 - s2) * br));
        const double k = 1.0 / (2 * s2 * b_ * R_gas * t);
        const double alpha_r = -std::log1p(-br) - a * k * L;
        const double p = r * R_gas * t / (1 - br) - a * r * r / (1 + 2 * br - br * br);
        const double z_r = p / (r * R_gas * t) - 1.0;
        const double u_r = (t * da - a) * k * L;
        return ResidualSet::from_primary(alpha_r, z_r, u_r);
    }

    /// MPa, directly from the cubic form.
    double pressure(double t, double rho) const override {
        if (rho == 0) return 0.0;
        const double r = rho * 1000.0;
        const double br = b_ * r;
        if (!(br < 1.0)) throw CovolumeExceeded("density exceeds the Peng-Robinson covolume limit");
        const double a = attraction(t).first;
        return (r * R_gas * t / (1 - br) - a * r * r / (1 + 2 * br - br * br)) * 1e-6;
    }

    /// (dp/drho)_T in MPa per mol/L.
    double dp_drho(double t, double rho) const {
        const double r = rho * 1000.0;
        const double br = b_ * r;
        const double a = attraction(t).first;
        const double den = 1 + 2 * br - br * br;
        const double d = R_gas * t / ((1 - br) * (1 - br)) - 2 * a * r * (1 + br) / (den * den);
        return d * 1e-3;
    }

    double max_density(double) const override { return std::min(4.0 * fluid_.crit.rhoc, 0.999 / b_ / 1000.0); }

    double psat_guess(double t) const override {
        const auto& c = fluid_.crit;
        return *c.pc * std::pow(10.0, 7.0 / 3.0 * (1.0 + *c.omega) * (1.0 - c.tc / t));
    }

private:
    Fluid fluid_;
    double b_ = 0, ac_ = 0, kappa_ = 0;
};

/// Compressibility at the critical point; the PR cubic has a triple root there,
/// so it equals one third of the root sum (1 - B).
inline double pr_critical_compressibility() { return (1.0 - pr::omega_b()) / 3.0; }

} // namespace ecslab
