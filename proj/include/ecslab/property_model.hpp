#pragma once

#include <memory>
#include <string>

#include "ecslab/core.hpp"

namespace ecslab {

/// Anything that maps (T, rho) of one fluid onto its residual properties:
/// the Helmholtz truth EOS, an ECS composition or the cubic baseline.
class PropertyModel {
public:
    virtual ~PropertyModel() = default;

    virtual std::string name() const = 0;

    /// The fluid this model describes; its critical constants seed solver brackets.
    virtual const Fluid& fluid() const = 0;

    virtual ResidualSet residual_set(double t, double rho) const = 0;

    /// MPa.
    virtual double pressure(double t, double rho) const {
        if (rho == 0) return 0.0;
        return pressure_from_zr(rho, t, residual_set(t, rho).z_r);
    }

    /// Upper end of the density range searched by the solvers, mol/L.
    virtual double max_density(double /*t*/) const { return 4.0 * fluid().crit.rhoc; }

    /// Starting value for the saturation solver, MPa.
    virtual double psat_guess(double t) const = 0;
};

using PropertyModelPtr = std::shared_ptr<const PropertyModel>;

} // namespace ecslab
