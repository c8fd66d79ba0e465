#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ecslab/errors.hpp"
#include "ecslab/molecule.hpp"

namespace ecslab {

/// Molar gas constant, J/(mol K).
inline constexpr double R_gas = 8.31446261815324;

/// Pressure in MPa from molar density (mol/L), temperature (K) and Z - 1.
inline double pressure_from_zr(double rho, double t, double z_r) {
    return rho * R_gas * t * (1.0 + z_r) / 1000.0;
}

enum class Phase { Liquid, Vapor, Supercritical };

inline std::string_view to_string(Phase p) {
    switch (p) {
    case Phase::Liquid: return "liquid";
    case Phase::Vapor: return "vapor";
    case Phase::Supercritical: return "supercritical";
    }
    return "?";
}

inline Phase phase_from_string(std::string_view s) {
    if (s == "liquid") return Phase::Liquid;
    if (s == "vapor") return Phase::Vapor;
    if (s == "supercritical") return Phase::Supercritical;
    throw InputError("unknown phase label '" + std::string(s) + "'");
}

inline constexpr std::array<Phase, 3> kAllPhases{Phase::Liquid, Phase::Vapor, Phase::Supercritical};

enum class Family { HFO, HFC, HC, PFC };

inline std::string_view to_string(Family f) {
    switch (f) {
    case Family::HFO: return "HFO";
    case Family::HFC: return "HFC";
    case Family::HC: return "HC";
    case Family::PFC: return "PFC";
    }
    return "?";
}

inline Family family_from_string(std::string_view s) {
    if (s == "HFO") return Family::HFO;
    if (s == "HFC") return Family::HFC;
    if (s == "HC") return Family::HC;
    if (s == "PFC") return Family::PFC;
    throw InputError("unknown fluid family '" + std::string(s) + "'");
}

struct CriticalParameters {
    double tc = 0;   ///< K
    double rhoc = 0; ///< mol/L
    std::optional<double> pc;    ///< MPa
    std::optional<double> omega; ///< acentric factor

    /// Critical compressibility pc/(rhoc R tc); requires pc.
    double zc() const {
        if (!pc) throw MissingCriticalPressure("critical compressibility needs pc");
        return *pc * 1000.0 / (rhoc * R_gas * tc);
    }

    void validate() const {
        if (!(tc > 0) || !(rhoc > 0)) throw InputError("critical temperature and density must be positive");
        if (pc) {
            if (!(*pc > 0)) throw InputError("critical pressure must be positive");
            double z = zc();
            if (!(z > 0.15 && z < 0.40))
                throw InputError("critical compressibility " + std::to_string(z) + " outside (0.15, 0.40)");
        }
    }
};

struct Fluid {
    std::string id;
    Family family = Family::HFC;
    std::string smiles;
    std::optional<MoleculeGraph> molecule;
    CriticalParameters crit;

    /// Copy with the critical temperature and density scaled (sensitivity studies).
    Fluid with_critical(double tc, double rhoc) const {
        Fluid f = *this;
        f.crit.tc = tc;
        f.crit.rhoc = rhoc;
        return f;
    }
};

struct StatePoint {
    double t = 0;   ///< K
    double rho = 0; ///< mol/L
    double p = 0;   ///< MPa
    Phase phase = Phase::Liquid;
};

/// Dimensionless residual properties at one state.
struct ResidualSet {
    double alpha_r = 0; ///< a^R/(RT)
    double z_r = 0;     ///< Z - 1
    double u_r = 0;     ///< u^R/(RT)
    double s_r = 0;     ///< s^R/R
    double h_r = 0;     ///< h^R/(RT)
    double g_r = 0;     ///< g^R/(RT)

    static ResidualSet from_primary(double alpha_r, double z_r, double u_r) {
        return ResidualSet{alpha_r, z_r, u_r, u_r - alpha_r, u_r + z_r, alpha_r + z_r};
    }

    /// Largest violation of the three residual identities.
    double identity_error() const {
        return std::max({std::abs(h_r - u_r - z_r), std::abs(s_r - u_r + alpha_r), std::abs(g_r - alpha_r - z_r)});
    }
};

struct ReducedState {
    double tr = 0;
    double rhor = 0;
};

inline ReducedState reduce_state(const Fluid& fluid, double t, double rho) {
    return ReducedState{t / fluid.crit.tc, rho / fluid.crit.rhoc};
}

/// Relative distance from the saturation line below which a state counts as on it.
inline constexpr double kSaturationTieTolerance = 1e-9;

/// Phase label of (t, p). Supercritical whenever t >= tc; below tc the
/// saturation oracle decides. States on the saturation line are rejected.
inline Phase classify_phase(const Fluid& fluid, double t, double p, const std::function<double(double)>& psat_oracle) {
    if (t >= fluid.crit.tc) return Phase::Supercritical;
    double psat = 0;
    try {
        psat = psat_oracle(t);
    } catch (const std::exception& e) {
        throw SaturationUnavailable("saturation pressure of " + fluid.id + " at T=" + std::to_string(t) +
                                    " K unavailable: " + e.what());
    }
    if (!(psat > 0) || !std::isfinite(psat))
        throw SaturationUnavailable("saturation oracle returned a non-positive pressure for " + fluid.id);
    if (std::abs(p - psat) / psat < kSaturationTieTolerance)
        throw OnSaturationLine("state T=" + std::to_string(t) + " K, p=" + std::to_string(p) +
                               " MPa lies on the saturation line of " + fluid.id);
    return p > psat ? Phase::Liquid : Phase::Vapor;
}

// ---------------------------------------------------------------------------
// Fluid registry

class FluidRegistry {
public:
    FluidRegistry() = default;

    void add(Fluid f) {
        f.crit.validate();
        if (index_.count(f.id)) throw InputError("duplicate fluid id '" + f.id + "'");
        index_[f.id] = fluids_.size();
        fluids_.push_back(std::move(f));
    }

    bool contains(const std::string& id) const { return index_.count(id) > 0; }

    const Fluid& at(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw InputError("unknown fluid '" + id + "'");
        return fluids_[it->second];
    }

    const std::vector<Fluid>& fluids() const { return fluids_; }

    static FluidRegistry from_json(const nlohmann::json& j) {
        if (!j.is_array()) throw SchemaError("fluid registry must be a JSON array");
        static const std::set<std::string> allowed{"id", "family", "smiles", "tc_K", "rhoc_molL", "pc_MPa", "omega"};
        FluidRegistry reg;
        for (const auto& rec : j) {
            if (!rec.is_object()) throw SchemaError("fluid registry entries must be objects");
            for (const auto& [k, v] : rec.items()) {
                (void)v;
                if (!allowed.count(k)) throw SchemaError("unknown key '" + k + "' in fluid registry");
            }
            for (const char* req : {"id", "family", "tc_K", "rhoc_molL"})
                if (!rec.contains(req)) throw SchemaError(std::string("fluid record missing '") + req + "'");
            Fluid f;
            f.id = rec.at("id").get<std::string>();
            f.family = family_from_string(rec.at("family").get<std::string>());
            f.crit.tc = rec.at("tc_K").get<double>();
            f.crit.rhoc = rec.at("rhoc_molL").get<double>();
            if (rec.contains("pc_MPa") && !rec["pc_MPa"].is_null()) f.crit.pc = rec["pc_MPa"].get<double>();
            if (rec.contains("omega") && !rec["omega"].is_null()) f.crit.omega = rec["omega"].get<double>();
            if (rec.contains("smiles") && !rec["smiles"].is_null()) {
                f.smiles = rec["smiles"].get<std::string>();
                f.molecule = parse_molecule(f.smiles);
            }
            reg.add(std::move(f));
        }
        return reg;
    }

    static FluidRegistry load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open fluid registry '" + path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("fluid registry '" + path + "': " + e.what());
        }
        return from_json(j);
    }

private:
    std::vector<Fluid> fluids_;
    std::map<std::string, std::size_t> index_;
};

} // namespace ecslab
