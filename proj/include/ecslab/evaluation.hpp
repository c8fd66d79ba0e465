#pragma once

// Deviation statistics of property models against truth datasets.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecslab/core.hpp"
#include "ecslab/dataset.hpp"
#include "ecslab/equilibrium.hpp"
#include "ecslab/log.hpp"
#include "ecslab/numerics.hpp"
#include "ecslab/parallel.hpp"
#include "ecslab/property_model.hpp"

namespace ecslab {

inline constexpr double kZeroReference = 1e-12;

/// 100/N sum |(ref - calc) / ref|.
inline double aad(std::span<const double> ref, std::span<const double> calc) {
    if (ref.size() != calc.size()) throw InputError("aad: arrays differ in length");
    if (ref.empty()) throw InputError("aad: no values");
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < ref.size(); ++i)
        if (!(std::abs(ref[i]) >= kZeroReference)) bad.push_back(i);
    if (!bad.empty()) {
        std::string idx;
        for (std::size_t k = 0; k < bad.size() && k < 20; ++k) idx += (k ? "," : "") + std::to_string(bad[k]);
        throw ZeroReferenceValue("aad: reference values below 1e-12 at indices " + idx);
    }
    std::vector<double> rel(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) rel[i] = std::abs((ref[i] - calc[i]) / ref[i]);
    return 100.0 * numerics::compensated_sum(rel) / static_cast<double>(ref.size());
}

inline double aad(const std::vector<double>& ref, const std::vector<double>& calc) {
    return aad(std::span<const double>(ref), std::span<const double>(calc));
}

// ---------------------------------------------------------------------------

/// A model constructor per target fluid; `make` may throw for fluids the model
/// cannot represent (for example a cubic without pc).
struct NamedModel {
    std::string name;
    std::function<PropertyModelPtr(const Fluid&)> make;
};

/// One cell of a report. fluid_id "*" marks the aggregate over fluids, where
/// mean is the mean of per-fluid AADs and max the largest per-fluid AAD.
struct AadRow {
    std::string model, fluid_id, property, phase;
    double mean = 0, max = 0;
    int count = 0;     ///< points compared
    int failures = 0;  ///< points excluded by solver failures

    bool operator==(const AadRow&) const = default;
};

struct AadTable {
    std::vector<AadRow> rows;

    const AadRow* find(const std::string& model, const std::string& fluid, const std::string& property,
                       const std::string& phase) const {
        for (const auto& r : rows)
            if (r.model == model && r.fluid_id == fluid && r.property == property && r.phase == phase) return &r;
        return nullptr;
    }
    const AadRow& at(const std::string& model, const std::string& fluid, const std::string& property,
                     const std::string& phase) const {
        if (auto* r = find(model, fluid, property, phase)) return *r;
        throw InputError("no report row for " + model + "/" + fluid + "/" + property + "/" + phase);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["report_version"] = 1;
        j["rows"] = nlohmann::json::array();
        for (const auto& r : rows)
            j["rows"].push_back({{"model", r.model}, {"fluid_id", r.fluid_id}, {"property", r.property},
                                 {"phase", r.phase}, {"mean_aad_pct", r.mean}, {"max_aad_pct", r.max},
                                 {"count", r.count}, {"failures", r.failures}});
        return j;
    }

    static AadTable from_json(const nlohmann::json& j) {
        if (j.at("report_version").get<int>() != 1) throw SchemaError("unsupported report version");
        AadTable t;
        for (const auto& r : j.at("rows"))
            t.rows.push_back({r.at("model"), r.at("fluid_id"), r.at("property"), r.at("phase"), r.at("mean_aad_pct"),
                              r.at("max_aad_pct"), r.at("count"), r.at("failures")});
        return t;
    }

    /// Fixed-width text; AADs with 4 decimals.
    std::string text() const {
        std::ostringstream os;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-28s %-14s %-9s %-13s %10s %10s %6s %5s\n", "model", "fluid", "property", "phase",
                      "mean_AAD%", "max_AAD%", "n", "fail");
        os << buf;
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%-28s %-14s %-9s %-13s %10.4f %10.4f %6d %5d\n", r.model.c_str(),
                          r.fluid_id.c_str(), r.property.c_str(), r.phase.c_str(), r.mean, r.max, r.count, r.failures);
            os << buf;
        }
        return os.str();
    }
};

enum class EnergyBasis {
    FixedTP,   ///< each model at its own density for the stored (T, P)
    FixedTRho  ///< each model at the stored (T, rho)
};

struct ReportOptions {
    std::vector<std::string> properties{"density", "s_r", "h_r"};
    EnergyBasis energy_basis = EnergyBasis::FixedTP;
    int jobs = 1;
};

namespace detail {

struct CellResult {
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> values; ///< (prop, phase) -> (ref, calc)
    std::map<std::pair<std::string, std::string>, int> failures;
};

inline CellResult evaluate_cell(const NamedModel& nm, const Fluid& fluid, const FluidDataset& ds,
                                const ReportOptions& opt) {
    CellResult out;
    PropertyModelPtr m;
    std::string make_error;
    try {
        m = nm.make(fluid);
    } catch (const Error& e) {
        make_error = e.what();
    }
    auto want = [&](const std::string& p) {
        return std::find(opt.properties.begin(), opt.properties.end(), p) != opt.properties.end();
    };
    for (const auto& pt : ds.points) {
        const std::string ph(to_string(pt.state.phase));
        auto fail_all = [&] {
            for (const auto& p : opt.properties) out.failures[{p, ph}]++;
        };
        if (!m) {
            fail_all();
            continue;
        }
        double rho = 0;
        try {
            rho = density_solve(*m, pt.state.t, pt.state.p, pt.state.phase);
        } catch (const Error&) {
            if (want("density")) out.failures[{"density", ph}]++;
            if (opt.energy_basis == EnergyBasis::FixedTP) {
                for (const auto& p : opt.properties)
                    if (p != "density") out.failures[{p, ph}]++;
                continue;
            }
            rho = std::numeric_limits<double>::quiet_NaN();
        }
        if (want("density") && std::isfinite(rho)) {
            auto& v = out.values[{"density", ph}];
            v.first.push_back(pt.state.rho);
            v.second.push_back(rho);
        }
        if (!want("s_r") && !want("h_r")) continue;
        ResidualSet rs;
        try {
            rs = m->residual_set(pt.state.t, opt.energy_basis == EnergyBasis::FixedTP ? rho : pt.state.rho);
        } catch (const Error&) {
            for (const auto& p : {"s_r", "h_r"})
                if (want(p)) out.failures[{p, ph}]++;
            continue;
        }
        auto push = [&](const char* p, double ref, double calc) {
            if (!want(p)) return;
            if (!(std::abs(ref) >= kZeroReference) || !std::isfinite(calc)) {
                out.failures[{p, ph}]++;
                return;
            }
            auto& v = out.values[{p, ph}];
            v.first.push_back(ref);
            v.second.push_back(calc);
        };
        push("s_r", pt.truth.s_r, rs.s_r);
        push("h_r", pt.truth.h_r, rs.h_r);
    }
    if (!make_error.empty()) log::warn("model " + nm.name + " unavailable for " + fluid.id + ": " + make_error);
    return out;
}

} // namespace detail

/// AAD of each model against each dataset, per property and stored phase
/// label, plus aggregates over fluids. Fluids are looked up in `registry`.
inline AadTable property_report(const std::vector<NamedModel>& models, const Corpus& corpus,
                                const FluidRegistry& registry, const ReportOptions& opt = {}) {
    const std::size_t nf = corpus.fluids.size();
    auto cells = parallel_map<detail::CellResult>(models.size() * nf, opt.jobs, [&](std::size_t i) {
        const auto& ds = corpus.fluids[i % nf];
        return detail::evaluate_cell(models[i / nf], registry.at(ds.fluid_id), ds, opt);
    });
    AadTable table;
    std::vector<std::string> phases;
    for (Phase p : kAllPhases) phases.emplace_back(to_string(p));
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        for (const auto& prop : opt.properties) {
            for (const auto& ph : phases) {
                AadRow agg{models[mi].name, "*", prop, ph};
                std::vector<double> per_fluid;
                for (std::size_t fi = 0; fi < nf; ++fi) {
                    const auto& cell = cells[mi * nf + fi];
                    AadRow row{models[mi].name, corpus.fluids[fi].fluid_id, prop, ph};
                    if (auto it = cell.failures.find({prop, ph}); it != cell.failures.end()) row.failures = it->second;
                    if (auto it = cell.values.find({prop, ph}); it != cell.values.end() && !it->second.first.empty()) {
                        row.count = static_cast<int>(it->second.first.size());
                        row.mean = aad(it->second.first, it->second.second);
                        for (std::size_t k = 0; k < it->second.first.size(); ++k) {
                            const double e = 100.0 * std::abs((it->second.first[k] - it->second.second[k]) / it->second.first[k]);
                            row.max = std::max(row.max, e);
                        }
                        per_fluid.push_back(row.mean);
                    }
                    if (row.count == 0 && row.failures == 0) continue;
                    agg.count += row.count;
                    agg.failures += row.failures;
                    table.rows.push_back(row);
                }
                if (agg.count == 0 && agg.failures == 0) continue;
                if (!per_fluid.empty()) {
                    agg.mean = numerics::compensated_sum(per_fluid) / static_cast<double>(per_fluid.size());
                    agg.max = *std::max_element(per_fluid.begin(), per_fluid.end());
                }
                table.rows.push_back(agg);
            }
        }
    }
    return table;
}

/// tr = 0.70, 0.72, ..., 0.94.
inline std::vector<double> default_psat_tr_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 12; ++i) g.push_back(0.70 + 0.02 * i);
    return g;
}

/// psat AAD of each model against each truth model's saturation curve.
inline AadTable vapor_pressure_report(const std::vector<NamedModel>& models, const std::vector<PropertyModelPtr>& truths,
                                      const std::vector<double>& tr_grid = default_psat_tr_grid(), int jobs = 1) {
    struct Ref {
        std::vector<double> t, p;
    };
    auto refs = parallel_map<Ref>(truths.size(), jobs, [&](std::size_t i) {
        Ref r;
        const double tc = truths[i]->fluid().crit.tc;
        for (double tr : tr_grid) {
            try {
                const auto s = saturation_solve(*truths[i], tr * tc);
                r.t.push_back(s.t);
                r.p.push_back(s.psat);
            } catch (const Error& e) {
                log::warn("truth saturation failed for " + truths[i]->fluid().id + ": " + e.what());
            }
        }
        return r;
    });
    const std::size_t nf = truths.size();
    auto rows = parallel_map<AadRow>(models.size() * nf, jobs, [&](std::size_t i) {
        const auto& nm = models[i / nf];
        const auto& fluid = truths[i % nf]->fluid();
        const auto& ref = refs[i % nf];
        AadRow row{nm.name, fluid.id, "psat", "saturation"};
        PropertyModelPtr m;
        try {
            m = nm.make(fluid);
        } catch (const Error& e) {
            log::warn("model " + nm.name + " unavailable for " + fluid.id + ": " + e.what());
            row.failures = static_cast<int>(ref.t.size());
            return row;
        }
        std::vector<double> pr, pc;
        for (std::size_t k = 0; k < ref.t.size(); ++k) {
            try {
                pc.push_back(saturation_solve(*m, ref.t[k]).psat);
                pr.push_back(ref.p[k]);
                row.max = std::max(row.max, 100.0 * std::abs(pc.back() / pr.back() - 1));
            } catch (const Error& e) {
                ++row.failures;
                log::info("psat failure " + nm.name + "/" + fluid.id + ": " + e.what());
            }
        }
        row.count = static_cast<int>(pr.size());
        if (!pr.empty()) row.mean = aad(pr, pc);
        return row;
    });
    AadTable table;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        AadRow agg{models[mi].name, "*", "psat", "saturation"};
        std::vector<double> per_fluid;
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const auto& r = rows[mi * nf + fi];
            table.rows.push_back(r);
            agg.count += r.count;
            agg.failures += r.failures;
            if (r.count > 0) per_fluid.push_back(r.mean);
        }
        if (!per_fluid.empty()) {
            agg.mean = numerics::compensated_sum(per_fluid) / static_cast<double>(per_fluid.size());
            agg.max = *std::max_element(per_fluid.begin(), per_fluid.end());
        }
        table.rows.push_back(agg);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Critical-parameter sensitivity

struct SensitivityRow {
    std::string property, phase, parameter; ///< parameter: "tc" or "rhoc"
    double variation = 0;                   ///< mean |% change| over points and both signs
    int count = 0, failures = 0;
};

struct SensitivityReport {
    std::string model, fluid_id;
    double delta = 0;
    int filtered_out = 0; ///< near-critical points removed
    std::vector<SensitivityRow> rows;

    const SensitivityRow& at(const std::string& property, const std::string& phase, const std::string& parameter) const {
        for (const auto& r : rows)
            if (r.property == property && r.phase == phase && r.parameter == parameter) return r;
        throw InputError("no sensitivity row for " + property + "/" + phase + "/" + parameter);
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"report_version", 1}, {"model", model}, {"fluid_id", fluid_id}, {"delta", delta},
                         {"filtered_out", filtered_out}, {"rows", nlohmann::json::array()}};
        for (const auto& r : rows)
            j["rows"].push_back({{"property", r.property}, {"phase", r.phase}, {"parameter", r.parameter},
                                 {"variation_pct", r.variation}, {"count", r.count}, {"failures", r.failures}});
        return j;
    }

    std::string text() const {
        std::ostringstream os;
        char buf[200];
        std::snprintf(buf, sizeof buf, "model=%s fluid=%s delta=%g filtered_out=%d\n", model.c_str(), fluid_id.c_str(),
                      delta, filtered_out);
        os << buf;
        std::snprintf(buf, sizeof buf, "%-9s %-13s %-5s %12s %6s %5s\n", "property", "phase", "param", "variation%", "n",
                      "fail");
        os << buf;
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%-9s %-13s %-5s %12.6f %6d %5d\n", r.property.c_str(), r.phase.c_str(),
                          r.parameter.c_str(), r.variation, r.count, r.failures);
            os << buf;
        }
        return os.str();
    }
};

struct SensitivityOptions {
    double t_band = 0.02, rho_band = 0.30;
    EnergyBasis energy_basis = EnergyBasis::FixedTP;
    int jobs = 1;
};

/// Mean absolute % change of density (fixed T, P) and s_r, h_r (on the chosen
/// energy basis) when tc or rhoc is scaled by 1 +/- delta.
inline SensitivityReport critical_sensitivity(const NamedModel& nm, const Fluid& fluid, const FluidDataset& dataset,
                                              double delta, const SensitivityOptions& opt = {}) {
    if (!(delta >= 0) || !(delta < 0.5)) throw InputError("sensitivity delta must lie in [0, 0.5)");
    const auto ds = near_critical_filter(dataset, fluid.crit, opt.t_band, opt.rho_band);
    SensitivityReport rep{nm.name, fluid.id, delta, static_cast<int>(dataset.size() - ds.size())};

    struct Eval {
        bool ok = false;
        double rho = 0, s = 0, h = 0;
    };
    auto evaluate = [&](const PropertyModel& m) {
        std::vector<Eval> out(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& st = ds.points[i].state;
            try {
                const double rho = density_solve(m, st.t, st.p, st.phase);
                const auto rs = m.residual_set(st.t, opt.energy_basis == EnergyBasis::FixedTP ? rho : st.rho);
                out[i] = {true, rho, rs.s_r, rs.h_r};
            } catch (const Error&) {
            }
        }
        return out;
    };
    auto variant = [&](int param, double sign) {
        Fluid f = fluid;
        if (param == 0) f.crit.tc *= 1 + sign * delta;
        if (param == 1) f.crit.rhoc *= 1 + sign * delta;
        return f;
    };
    // 0: nominal, 1..4: (tc,+), (tc,-), (rhoc,+), (rhoc,-)
    auto evals = parallel_map<std::vector<Eval>>(5, opt.jobs, [&](std::size_t k) {
        const Fluid f = k == 0 ? fluid : variant(static_cast<int>((k - 1) / 2), (k - 1) % 2 == 0 ? 1.0 : -1.0);
        return evaluate(*nm.make(f));
    });

    const char* props[] = {"density", "s_r", "h_r"};
    const char* params[] = {"tc", "rhoc"};
    for (int pi = 0; pi < 3; ++pi)
        for (Phase phase : kAllPhases)
            for (int qi = 0; qi < 2; ++qi) {
                SensitivityRow row{props[pi], std::string(to_string(phase)), params[qi]};
                std::vector<double> changes;
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    if (ds.points[i].state.phase != phase) continue;
                    const auto& b = evals[0][i];
                    const auto& up = evals[1 + 2 * qi][i];
                    const auto& dn = evals[2 + 2 * qi][i];
                    auto pick = [&](const Eval& e) { return pi == 0 ? e.rho : pi == 1 ? e.s : e.h; };
                    if (!b.ok || !up.ok || !dn.ok || !(std::abs(pick(b)) >= kZeroReference)) {
                        ++row.failures;
                        continue;
                    }
                    changes.push_back(100.0 * std::abs(pick(up) / pick(b) - 1));
                    changes.push_back(100.0 * std::abs(pick(dn) / pick(b) - 1));
                }
                row.count = static_cast<int>(changes.size() / 2);
                if (!changes.empty()) row.variation = numerics::compensated_sum(changes) / static_cast<double>(changes.size());
                if (row.count + row.failures > 0) rep.rows.push_back(row);
            }
    return rep;
}

} // namespace ecslab
