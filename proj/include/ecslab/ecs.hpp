#pragma once

// Extended corresponding states: a target fluid's residual surface is the
// reference surface evaluated at T_o = T_j / f and rho_o = rho_j * h, with
//   f = (tc_j / tc_o) theta,   h = (rhoc_o / rhoc_j) phi.
// Density is multiplied by h so that identity shape factors map the target's
// reduced density onto the reference's and the critical point onto the
// critical point; this is also the convention under which the Z^R transform
// below carries the (1 + H_rho) factor.

#include <cmath>
#include <memory>
#include <string>

#include "ecslab/core.hpp"
#include "ecslab/equilibrium.hpp"
#include "ecslab/helmholtz.hpp"
#include "ecslab/property_model.hpp"
#include "ecslab/shapefactor.hpp"

namespace ecslab {

struct ScalingFactors {
    double f = 1, h = 1;
    double f_t = 0, f_rho = 0, h_t = 0, h_rho = 0; ///< partials w.r.t. T_j (1/K) and rho_j (L/mol)
    double F_T = 0, F_rho = 0, H_T = 0, H_rho = 0; ///< logarithmic partials
};

struct MappedState {
    double t_o = 0, rho_o = 0;
};

inline MappedState map_state(double t_j, double rho_j, const ScalingFactors& sf) {
    return MappedState{t_j / sf.f, rho_j * sf.h};
}

/// Target residuals from reference residuals at the mapped state.
inline ResidualSet ecs_transform(const ResidualSet& o, const ScalingFactors& sf) {
    ResidualSet r;
    r.alpha_r = o.alpha_r;
    r.z_r = o.u_r * sf.F_rho + o.z_r * (1 + sf.H_rho);
    r.u_r = o.u_r * (1 - sf.F_T) - o.z_r * sf.H_T;
    r.s_r = o.s_r - o.u_r * sf.F_T - o.z_r * sf.H_T;
    r.h_r = o.h_r + o.u_r * (sf.F_rho - sf.F_T) + o.z_r * (sf.H_rho - sf.H_T);
    r.g_r = r.alpha_r + r.z_r;
    return r;
}

class EcsModel final : public PropertyModel {
public:
    EcsModel(std::shared_ptr<const HelmholtzModel> reference, Fluid target, ShapeFactorModelPtr shape)
        : ref_(std::move(reference)), target_(std::move(target)), shape_(std::move(shape)) {
        target_.crit.validate();
    }

    std::string name() const override { return "ecs[" + shape_->name() + "]:" + target_.id; }
    const Fluid& fluid() const override { return target_; }
    const HelmholtzModel& reference() const { return *ref_; }
    const ShapeFactorModel& shape() const { return *shape_; }
    ShapeFactorModelPtr shape_ptr() const { return shape_; }

    ScalingFactors scaling_factors(double t, double rho) const {
        if (!(t > 0) || !(rho >= 0)) throw InputError("ECS state needs T > 0 and rho >= 0");
        const auto& cj = target_.crit;
        const auto& co = ref_->fluid().crit;
        const double tr = t / cj.tc, rhor = rho / cj.rhoc;
        const auto ev = shape_->eval(tr, rhor);
        const double kf = cj.tc / co.tc, kh = co.rhoc / cj.rhoc;
        ScalingFactors sf;
        sf.f = kf * ev.theta;
        sf.h = kh * ev.phi;
        sf.f_t = kf * ev.d_theta_d_tr / cj.tc;
        sf.f_rho = kf * ev.d_theta_d_rhor / cj.rhoc;
        sf.h_t = kh * ev.d_phi_d_tr / cj.tc;
        sf.h_rho = kh * ev.d_phi_d_rhor / cj.rhoc;
        sf.F_T = t / sf.f * sf.f_t;
        sf.F_rho = rho / sf.f * sf.f_rho;
        sf.H_T = t / sf.h * sf.h_t;
        sf.H_rho = rho / sf.h * sf.h_rho;
        return sf;
    }

    ResidualSet residual_set(double t, double rho) const override {
        if (rho == 0) {
            (void)scaling_factors(t, rho);
            return ResidualSet{};
        }
        const auto sf = scaling_factors(t, rho);
        const auto ms = map_state(t, rho, sf);
        return ecs_transform(ref_->residual_set(ms.t_o, ms.rho_o), sf);
    }

    double max_density(double) const override { return 4.0 * target_.crit.rhoc; }

    /// Corresponding-states scaling of the reference vapor pressure,
    /// p_j = (f / h) p_o(T_j / f), with shape factors taken at rhor = 1.
    double psat_guess(double t) const override {
        const auto& cj = target_.crit;
        const auto sf = scaling_factors(t, cj.rhoc);
        const auto sat = saturation_solve(*ref_, t / sf.f);
        return sf.f / sf.h * sat.psat;
    }

private:
    std::shared_ptr<const HelmholtzModel> ref_;
    Fluid target_;
    ShapeFactorModelPtr shape_;
};

} // namespace ecslab
