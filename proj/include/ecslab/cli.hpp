#pragma once

// Command implementations behind the ecslab executable. Each command writes
// data to `out`, logs to standard error and returns a process exit code.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecslab/core.hpp"
#include "ecslab/cubic.hpp"
#include "ecslab/dataset.hpp"
#include "ecslab/ecs.hpp"
#include "ecslab/equilibrium.hpp"
#include "ecslab/errors.hpp"
#include "ecslab/evaluation.hpp"
#include "ecslab/helmholtz.hpp"
#include "ecslab/log.hpp"
#include "ecslab/parallel.hpp"
#include "ecslab/shapefactor.hpp"
#include "ecslab/training.hpp"

namespace ecslab::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kPartialFailure = 3, kTrainingFailure = 4, kSolverFailure = 5 };

inline bool is_input_error(const Error& e) {
    static const std::set<std::string> input{"InputError",   "SchemaError",           "IdentityViolation",
                                             "ParseError",   "ValenceError",          "UnsupportedAtom",
                                             "DegenerateRepresentation", "MissingCriticalPressure"};
    return input.count(e.kind()) > 0;
}

/// Input errors map to 2; everything else is a solver failure.
inline int exit_code_for(const Error& e) { return is_input_error(e) ? kInputError : kSolverFailure; }

struct CliConfig {
    std::string registry_path;
    std::string eos_dir;
    std::string reference_id = "R1234ze(E)";
    std::uint64_t seed = 42;
    int jobs = 1;
};

/// Registry, coefficient library and reference model shared by all commands.
struct Workspace {
    CliConfig config;
    FluidRegistry registry;
    EosLibrary eos;
    std::shared_ptr<const HelmholtzModel> reference;

    static Workspace open(const CliConfig& cfg) {
        if (!std::filesystem::exists(cfg.registry_path))
            throw InputError("fluid registry '" + cfg.registry_path + "' not found");
        Workspace ws;
        ws.config = cfg;
        ws.registry = FluidRegistry::load(cfg.registry_path);
        ws.eos = EosLibrary(cfg.eos_dir);
        if (!ws.registry.contains(cfg.reference_id))
            throw InputError("reference fluid '" + cfg.reference_id + "' not in the registry");
        if (!ws.eos.contains(cfg.reference_id))
            throw InputError("reference fluid '" + cfg.reference_id + "' has no coefficient file");
        ws.reference = std::make_shared<const HelmholtzModel>(ws.registry.at(cfg.reference_id), ws.eos.at(cfg.reference_id));
        return ws;
    }

    const Fluid& fluid(const std::string& id) const { return registry.at(id); }

    std::shared_ptr<const HelmholtzModel> truth(const std::string& id) const {
        if (!eos.contains(id)) throw InputError("no coefficient file for fluid '" + id + "'");
        return std::make_shared<const HelmholtzModel>(registry.at(id), eos.at(id));
    }
};

/// File-system friendly form of a fluid id: "R1234ze(E)" -> "R1234ze_E_".
inline std::string file_stem(const std::string& id) {
    std::string s = id;
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    return s;
}

/// Model specs: truth, identity, pr, huber-ely (refit constants),
/// huber-ely-original, huber-ely-teraishi, huber-ely-refit, or the path of a
/// neural checkpoint.
inline NamedModel resolve_model(const Workspace& ws, const std::string& spec) {
    const auto ref = ws.reference;
    if (spec == "truth") {
        const Workspace* w = &ws;
        return {spec, [w](const Fluid& f) -> PropertyModelPtr {
                    return std::make_shared<HelmholtzModel>(f, w->eos.at(f.id));
                }};
    }
    if (spec == "identity")
        return {spec, [ref](const Fluid& f) -> PropertyModelPtr {
                    return std::make_shared<EcsModel>(ref, f, std::make_shared<IdentityShape>());
                }};
    if (spec == "pr") return {spec, [](const Fluid& f) -> PropertyModelPtr { return std::make_shared<PrModel>(f); }};
    const std::map<std::string, HuberElyParams> he{{"huber-ely", kHuberElyRefit},
                                                  {"huber-ely-refit", kHuberElyRefit},
                                                  {"huber-ely-original", kHuberElyOriginal},
                                                  {"huber-ely-teraishi", kHuberElyTeraishi}};
    if (auto it = he.find(spec); it != he.end()) {
        const HuberElyParams p = it->second;
        return {spec, [ref, p](const Fluid& f) -> PropertyModelPtr {
                    return std::make_shared<EcsModel>(ref, f, std::make_shared<HuberElyShape>(p, f.crit, ref->fluid().crit));
                }};
    }
    if (std::filesystem::is_regular_file(spec)) {
        auto net = std::make_shared<const NeuralShapeModel>(NeuralShapeModel::from_json(load_json_file(spec)));
        if (net->reference_id() != ref->fluid().id)
            throw InputError("checkpoint '" + spec + "' was trained against a different reference fluid");
        return nn_ecs_model(net, ref, "nn-ecs:" + std::filesystem::path(spec).stem().string());
    }
    throw InputError("unknown model '" + spec + "' (expected truth, identity, pr, huber-ely[-original|-teraishi|-refit] "
                     "or a checkpoint file)");
}

inline nlohmann::json residuals_json(double t, double p, double rho, const std::string& phase, const ResidualSet& r) {
    return {{"t", t},          {"p", p},          {"rho", rho},      {"phase", phase}, {"alpha_r", r.alpha_r},
            {"z_r", r.z_r},    {"u_r", r.u_r},    {"s_r", r.s_r},    {"h_r", r.h_r},   {"g_r", r.g_r}};
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
    std::vector<std::string> fluids; ///< empty with all = true: every fluid with coefficients
    bool all = false;
    std::string out_dir;
};

inline int cmd_gen_data(const Workspace& ws, const GenDataArgs& a, std::ostream& out) {
    std::vector<std::string> ids = a.fluids;
    if (a.all)
        for (const auto& f : ws.registry.fluids())
            if (ws.eos.contains(f.id)) ids.push_back(f.id);
    if (ids.empty()) throw InputError("gen-data needs --fluid or --all");
    for (const auto& id : ids) {
        if (!ws.registry.contains(id)) throw InputError("unknown fluid '" + id + "'");
        if (!ws.eos.contains(id)) throw InputError("no coefficient file for fluid '" + id + "'");
    }
    std::filesystem::create_directories(a.out_dir);
    struct Outcome {
        std::string id, error;
        std::size_t points = 0;
        int skipped = 0;
    };
    auto results = parallel_map<Outcome>(ids.size(), ws.config.jobs, [&](std::size_t i) {
        Outcome o{ids[i]};
        try {
            const auto truth = ws.truth(ids[i]);
            const auto ds = generate_grid(truth->fluid(), *truth, truth->eos().range.pmax);
            write_csv(ds, std::filesystem::path(a.out_dir) / (file_stem(ids[i]) + ".csv"));
            o.points = ds.size();
            o.skipped = ds.skipped;
        } catch (const Error& e) {
            o.error = e.kind() + ": " + e.what();
        }
        return o;
    });
    int failed = 0;
    for (const auto& r : results) {
        if (r.error.empty()) {
            out << "fluid=" << r.id << " points=" << r.points << " skipped=" << r.skipped << '\n';
        } else {
            ++failed;
            out << "fluid=" << r.id << " failed: " << r.error << '\n';
        }
    }
    return failed ? kPartialFailure : kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string corpus_dir;
    std::string config_file;      ///< optional JSON TrainConfig
    bool loocv = false;
    std::string out_dir;
    std::optional<int> main_epochs;
    std::vector<std::string> holdouts;
    bool seed_given = false;      ///< seed came from the command line or ECSLAB_SEED
};

inline TrainConfig resolve_train_config(const Workspace& ws, const TrainArgs& a) {
    TrainConfig cfg;
    bool log_set = false;
    if (!a.config_file.empty()) {
        const auto j = load_json_file(a.config_file);
        cfg = TrainConfig::from_json(j);
        log_set = j.contains("log_every");
    }
    if (a.seed_given) cfg.seed = ws.config.seed;
    cfg.jobs = ws.config.jobs;
    if (a.main_epochs) cfg.main_epochs = *a.main_epochs;
    if (!log_set) cfg.log_every = 500;
    cfg.validate();
    return cfg;
}

inline int cmd_train(const Workspace& ws, const TrainArgs& a, std::ostream& out) {
    const auto corpus = load_corpus_dir(a.corpus_dir);
    for (const auto& d : corpus.fluids)
        if (!ws.registry.contains(d.fluid_id)) throw InputError("corpus fluid '" + d.fluid_id + "' not in the registry");
    const auto cfg = resolve_train_config(ws, a);
    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);

    if (!a.loocv) {
        FullModel full;
        try {
            full = finalize_full_model(corpus, ws.registry, ws.reference, cfg);
        } catch (const Error& e) {
            if (is_input_error(e)) throw;
            log::warn(std::string("training aborted: ") + e.kind() + ": " + e.what());
            return kTrainingFailure;
        }
        save_checkpoint(full.checkpoint, (dir / "full-data.json").string());
        nlohmann::json summary{{"fold_tag", "full-data"},
                               {"pretrain_epochs", full.pre.epochs},
                               {"main_epochs", full.main.epochs},
                               {"best_epoch", full.main.best_epoch},
                               {"initial_loss", full.main.initial_loss},
                               {"final_loss", full.main.best_loss}};
        out << summary.dump() << '\n';
        return kOk;
    }

    LoocvOptions lo;
    lo.holdouts = a.holdouts;
    const auto folds = loocv(corpus, ws.registry, ws.reference, cfg, lo);
    int failed = 0;
    nlohmann::json index = nlohmann::json::array();
    for (const auto& f : folds) {
        const auto stem = "fold_" + file_stem(f.held_out);
        std::ofstream(dir / (stem + ".json")) << f.to_json().dump(1) << '\n';
        if (!f.checkpoint.is_null()) save_checkpoint(f.checkpoint, (dir / (stem + ".ckpt.json")).string());
        log::info("fold " + f.held_out + " took " + std::to_string(f.wall_seconds) + " s");
        if (!f.error.empty()) ++failed;
        index.push_back({{"held_out", f.held_out}, {"error", f.error}, {"final_train_loss", f.final_train_loss}});
        out << "fold=" << f.held_out << (f.error.empty() ? " ok" : " failed: " + f.error) << '\n';
    }
    std::ofstream(dir / "loocv.json") << index.dump(1) << '\n';
    if (failed == static_cast<int>(folds.size())) return kTrainingFailure;
    return failed ? kPartialFailure : kOk;
}

// ---------------------------------------------------------------------------
// predict / satp

struct PredictArgs {
    std::string model, fluid;
    double t = 0;
    std::optional<double> p, rho;
    std::optional<std::string> phase; ///< skips classification when given
};

inline int cmd_predict(const Workspace& ws, const PredictArgs& a, std::ostream& out) {
    if (a.p.has_value() == a.rho.has_value()) throw InputError("predict needs exactly one of --p and --rho");
    if (!(a.t > 0)) throw InputError("temperature must be positive");
    const auto& fluid = ws.fluid(a.fluid);
    const auto model = resolve_model(ws, a.model).make(fluid);
    auto psat = [&](double t) { return saturation_solve(*model, t).psat; };
    double rho, p;
    Phase phase;
    if (a.p) {
        p = *a.p;
        if (!(p > 0)) throw InputError("pressure must be positive");
        phase = a.phase ? phase_from_string(*a.phase) : classify_phase(fluid, a.t, p, psat);
        rho = density_solve(*model, a.t, p, phase);
    } else {
        rho = *a.rho;
        if (rho < 0) throw InputError("density must be non-negative");
        p = model->pressure(a.t, rho);
        phase = a.phase ? phase_from_string(*a.phase) : classify_phase(fluid, a.t, p, psat);
    }
    out << residuals_json(a.t, p, rho, std::string(to_string(phase)), model->residual_set(a.t, rho)).dump() << '\n';
    return kOk;
}

struct SatpArgs {
    std::string model, fluid;
    double t = 0;
};

inline int cmd_satp(const Workspace& ws, const SatpArgs& a, std::ostream& out) {
    const auto& fluid = ws.fluid(a.fluid);
    const auto model = resolve_model(ws, a.model).make(fluid);
    const auto s = saturation_solve(*model, a.t);
    out << nlohmann::json{{"t", s.t},
                          {"psat", s.psat},
                          {"rho_liq", s.rho_liq},
                          {"rho_vap", s.rho_vap},
                          {"g_residual_gap", s.g_residual_gap}}
               .dump()
        << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// report / sensitivity

struct ReportArgs {
    std::vector<std::string> models;
    std::string corpus_dir;
    std::vector<std::string> properties{"density", "s_r", "h_r"}; ///< "psat" adds a vapor-pressure table
    std::string out_file;
    EnergyBasis basis = EnergyBasis::FixedTP;
};

inline int cmd_report(const Workspace& ws, const ReportArgs& a, std::ostream& out) {
    if (a.models.empty()) throw InputError("report needs at least one model");
    const auto corpus = load_corpus_dir(a.corpus_dir);
    std::vector<NamedModel> models;
    for (const auto& m : a.models) models.push_back(resolve_model(ws, m));

    ReportOptions ro;
    ro.energy_basis = a.basis;
    ro.jobs = ws.config.jobs;
    ro.properties.clear();
    bool want_psat = false;
    for (const auto& p : a.properties) {
        if (p == "psat") want_psat = true;
        else if (p == "density" || p == "s_r" || p == "h_r") ro.properties.push_back(p);
        else throw InputError("unknown property '" + p + "'");
    }
    AadTable table;
    if (!ro.properties.empty()) table = property_report(models, corpus, ws.registry, ro);
    if (want_psat) {
        std::vector<PropertyModelPtr> truths;
        for (const auto& d : corpus.fluids) {
            if (ws.eos.contains(d.fluid_id)) truths.push_back(ws.truth(d.fluid_id));
            else log::warn("no coefficient file for " + d.fluid_id + "; skipped in the vapor-pressure table");
        }
        const auto vp = vapor_pressure_report(models, truths, default_psat_tr_grid(), ws.config.jobs);
        table.rows.insert(table.rows.end(), vp.rows.begin(), vp.rows.end());
    }
    out << table.text();
    if (!a.out_file.empty()) std::ofstream(a.out_file) << table.to_json().dump(1) << '\n';
    for (const auto& r : table.rows)
        if (r.failures > 0) return kPartialFailure;
    return kOk;
}

struct SensitivityArgs {
    std::string model, fluid;
    double delta = 0.01;
    std::string data_file; ///< optional; default: grid generated from the fluid's coefficients
    std::string out_file;
    EnergyBasis basis = EnergyBasis::FixedTP;
};

inline int cmd_sensitivity(const Workspace& ws, const SensitivityArgs& a, std::ostream& out) {
    const auto& fluid = ws.fluid(a.fluid);
    const auto nm = resolve_model(ws, a.model);
    FluidDataset ds;
    if (!a.data_file.empty()) {
        ds = ingest_csv(a.data_file);
        if (ds.fluid_id != fluid.id) throw InputError("dataset '" + a.data_file + "' holds " + ds.fluid_id);
    } else {
        const auto truth = ws.truth(fluid.id);
        ds = generate_grid(fluid, *truth, truth->eos().range.pmax);
    }
    SensitivityOptions so;
    so.jobs = ws.config.jobs;
    so.energy_basis = a.basis;
    const auto rep = critical_sensitivity(nm, fluid, ds, a.delta, so);
    out << rep.text();
    if (!a.out_file.empty()) std::ofstream(a.out_file) << rep.to_json().dump(1) << '\n';
    for (const auto& r : rep.rows)
        if (r.failures > 0) return kPartialFailure;
    return kOk;
}

} // namespace ecslab::cli
