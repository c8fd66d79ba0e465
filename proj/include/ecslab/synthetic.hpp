#pragma once

// Synthetic fluids whose truth surface is the reference surface under known
// shape factors; used to plant parameters and check that fits recover them.

#include <cmath>
#include <memory>
#include <string>

#include "ecslab/core.hpp"
#include "ecslab/ecs.hpp"
#include "ecslab/equilibrium.hpp"
#include "ecslab/helmholtz.hpp"
#include "ecslab/molecule.hpp"
#include "ecslab/shapefactor.hpp"

namespace ecslab {

struct SyntheticFluid {
    Fluid fluid;                           ///< recorded critical parameters
    std::shared_ptr<const EcsModel> truth;
    double truth_pmax = 0;                 ///< MPa
};

/// Truth = reference under constant (theta, phi), recorded with the
/// reference's tc and rhoc. The true critical point then sits at
/// (theta tc_o, rhoc_o / phi) with pressure (theta / phi) pc_o, which is
/// recorded as pc; omega comes from the truth vapor pressure at 0.7 tc.
inline SyntheticFluid make_constant_shape_fluid(const std::shared_ptr<const HelmholtzModel>& ref, const std::string& id,
                                                const std::string& smiles, double theta, double phi,
                                                Family family = Family::HFO) {
    if (!(theta > 0) || !(phi > 0)) throw InputError("synthetic shape factors must be positive");
    const auto& co = ref->fluid().crit;
    if (!co.pc) throw MissingCriticalPressure("reference fluid needs pc");
    Fluid f;
    f.id = id;
    f.family = family;
    f.smiles = smiles;
    f.molecule = parse_molecule(smiles);
    f.crit.tc = co.tc;
    f.crit.rhoc = co.rhoc;
    f.crit.pc = theta / phi * *co.pc;
    auto truth = std::make_shared<const EcsModel>(ref, f, std::make_shared<ConstantShape>(theta, phi));
    const double p07 = saturation_solve(*truth, 0.7 * f.crit.tc).psat;
    f.crit.omega = -1.0 - std::log10(p07 / *f.crit.pc);
    f.crit.validate();
    SyntheticFluid s;
    s.fluid = f;
    s.truth = std::make_shared<const EcsModel>(ref, f, std::make_shared<ConstantShape>(theta, phi));
    s.truth_pmax = ref->eos().range.pmax * theta / phi;
    return s;
}

/// Truth = reference under Huber-Ely shape factors with parameters `p` and
/// the given recorded critical parameters (pc and omega required).
inline SyntheticFluid make_huber_ely_fluid(const std::shared_ptr<const HelmholtzModel>& ref, const std::string& id,
                                           const std::string& smiles, const CriticalParameters& crit,
                                           const HuberElyParams& p, Family family = Family::HFO) {
    Fluid f;
    f.id = id;
    f.family = family;
    f.smiles = smiles;
    f.molecule = parse_molecule(smiles);
    f.crit = crit;
    f.crit.validate();
    SyntheticFluid s;
    s.fluid = f;
    s.truth = std::make_shared<const EcsModel>(ref, f, std::make_shared<HuberElyShape>(p, crit, ref->fluid().crit));
    s.truth_pmax = ref->eos().range.pmax;
    return s;
}

} // namespace ecslab
