#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "ecslab/cli.hpp"

#ifndef ECSLAB_DATA_DIR
#define ECSLAB_DATA_DIR "data"
#endif

using namespace ecslab;

namespace {

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("ECSLAB_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != std::string(s).size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(std::string("ECSLAB_SEED is not an unsigned integer: '") + s + "'");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extended corresponding states property models with neural shape factors"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--settings", "", "INI/TOML file with option defaults; command-line flags win");

    cli::CliConfig cfg;
    cfg.registry_path = std::string(ECSLAB_DATA_DIR) + "/fluids.json";
    cfg.eos_dir = std::string(ECSLAB_DATA_DIR) + "/eos";
    cfg.jobs = default_jobs();
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    app.add_option("--registry", cfg.registry_path, "fluid registry JSON")->capture_default_str();
    app.add_option("--eos-dir", cfg.eos_dir, "directory of Helmholtz coefficient files")->capture_default_str();
    app.add_option("--reference", cfg.reference_id, "reference fluid id")->capture_default_str();
    app.add_option("--seed", seed, "random seed (fallback: ECSLAB_SEED, then 42)");
    app.add_option("--jobs", cfg.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_flag("--quiet", quiet, "suppress progress and warnings");

    cli::GenDataArgs gen;
    auto* c_gen = app.add_subcommand("gen-data", "generate grid datasets from the shipped coefficients");
    auto* g_fluid = c_gen->add_option("--fluid", gen.fluids, "fluid id (repeatable)");
    auto* g_all = c_gen->add_flag("--all", gen.all, "every fluid with a coefficient file");
    g_fluid->excludes(g_all);
    c_gen->add_option("--out", gen.out_dir, "output directory")->required();

    cli::TrainArgs tr;
    bool tr_full = false;
    auto* c_train = app.add_subcommand("train", "train the neural shape-factor model");
    c_train->add_option("--corpus", tr.corpus_dir, "directory of dataset CSV files")->required()->check(CLI::ExistingDirectory);
    c_train->add_option("--config", tr.config_file, "training configuration JSON")->check(CLI::ExistingFile);
    auto* t_loocv = c_train->add_flag("--loocv", tr.loocv, "leave-one-fluid-out cross-validation");
    auto* t_full = c_train->add_flag("--full", tr_full, "train on every fluid of the corpus");
    t_loocv->excludes(t_full);
    c_train->add_option("--out", tr.out_dir, "output directory")->required();
    c_train->add_option("--epochs", tr.main_epochs, "main-training epoch budget");
    c_train->add_option("--holdout", tr.holdouts, "held-out fluid for --loocv (repeatable; default: all)");

    cli::PredictArgs pr;
    std::string pr_phase;
    auto* c_pred = app.add_subcommand("predict", "residual properties at one state");
    c_pred->add_option("--model", pr.model, "model spec or checkpoint path")->required();
    c_pred->add_option("--fluid", pr.fluid, "fluid id")->required();
    c_pred->add_option("--t", pr.t, "temperature, K")->required();
    auto* p_p = c_pred->add_option("--p", pr.p, "pressure, MPa");
    auto* p_rho = c_pred->add_option("--rho", pr.rho, "density, mol/L");
    p_p->excludes(p_rho);
    c_pred->add_option("--phase", pr_phase, "liquid, vapor or supercritical; skips classification")
        ->check(CLI::IsMember({"liquid", "vapor", "supercritical"}));

    cli::SatpArgs sp;
    auto* c_satp = app.add_subcommand("satp", "saturation state at one temperature");
    c_satp->add_option("--model", sp.model, "model spec or checkpoint path")->required();
    c_satp->add_option("--fluid", sp.fluid, "fluid id")->required();
    c_satp->add_option("--t", sp.t, "temperature, K")->required();

    cli::ReportArgs rp;
    std::string basis = "tp";
    auto* c_rep = app.add_subcommand("report", "AAD tables against a corpus");
    c_rep->add_option("--models", rp.models, "model specs")->required()->delimiter(',');
    c_rep->add_option("--corpus", rp.corpus_dir, "directory of dataset CSV files")->required()->check(CLI::ExistingDirectory);
    c_rep->add_option("--props", rp.properties, "density, s_r, h_r, psat")->delimiter(',')->capture_default_str();
    c_rep->add_option("--out", rp.out_file, "JSON output file");
    c_rep->add_option("--energy-basis", basis, "tp: energies at each model's own density; trho: at the stored density")
        ->check(CLI::IsMember({"tp", "trho"}))
        ->capture_default_str();

    cli::SensitivityArgs se;
    auto* c_sens = app.add_subcommand("sensitivity", "critical-parameter sensitivity");
    c_sens->add_option("--model", se.model, "model spec or checkpoint path")->required();
    c_sens->add_option("--fluid", se.fluid, "fluid id")->required();
    c_sens->add_option("--delta", se.delta, "relative perturbation of tc and rhoc")->capture_default_str();
    c_sens->add_option("--data", se.data_file, "dataset CSV (default: generated grid)")->check(CLI::ExistingFile);
    c_sens->add_option("--out", se.out_file, "JSON output file");
    std::string sens_basis = "tp";
    c_sens->add_option("--energy-basis", sens_basis, "tp: energies at each variant's own density; trho: at the stored density")
        ->check(CLI::IsMember({"tp", "trho"}))
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kInputError;
    }
    log::quiet() = quiet;

    try {
        if (seed) {
            cfg.seed = *seed;
            tr.seed_given = true;
        } else if (auto s = env_seed()) {
            cfg.seed = *s;
            tr.seed_given = true;
        }
        const auto ws = cli::Workspace::open(cfg);
        auto& out = std::cout;
        if (*c_gen) return cli::cmd_gen_data(ws, gen, out);
        if (*c_train) {
            if (!tr.loocv && !tr_full) throw InputError("train needs --loocv or --full");
            return cli::cmd_train(ws, tr, out);
        }
        if (*c_pred) {
            if (!pr_phase.empty()) pr.phase = pr_phase;
            return cli::cmd_predict(ws, pr, out);
        }
        if (*c_satp) return cli::cmd_satp(ws, sp, out);
        if (*c_rep) {
            rp.basis = basis == "trho" ? EnergyBasis::FixedTRho : EnergyBasis::FixedTP;
            return cli::cmd_report(ws, rp, out);
        }
        if (*c_sens) {
            se.basis = sens_basis == "trho" ? EnergyBasis::FixedTRho : EnergyBasis::FixedTP;
            return cli::cmd_sensitivity(ws, se, out);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
        return cli::exit_code_for(e);
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kInputError;
    }
    return cli::kInputError;
}
