// Acceptance suite: one verdict line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "CLI11.hpp"

#include "ecslab/cubic.hpp"
#include "ecslab/dataset.hpp"
#include "ecslab/ecs.hpp"
#include "ecslab/evaluation.hpp"
#include "ecslab/fitting.hpp"
#include "ecslab/helmholtz.hpp"
#include "ecslab/log.hpp"
#include "ecslab/random.hpp"
#include "ecslab/synthetic.hpp"
#include "ecslab/training.hpp"
#include "cubic_oracle.hpp"
#include "fixtures.hpp"
#include "maxwell_oracle.hpp"

using namespace ecslab;

namespace {

enum class Status { Pass, Fail, Skip };

struct Verdict {
    Status status = Status::Fail;
    std::string detail;
};

Verdict pass_if(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void note(const std::string& s) { std::cout << "    " << s << '\n'; }

/// |a - b| <= rel * max(|a|, |b|, floor)
bool rel_close(double a, double b, double rel, double floor) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), floor});
}

struct Options {
    std::uint64_t seed = 42;
    int jobs = 1;
    std::set<int> only;
    std::string corpus_dir, corpus_registry, corpus_eos_dir;
};

class Suite {
public:
    explicit Suite(Options o) : opt_(std::move(o)) {
        cfg_.seed = opt_.seed;
        cfg_.jobs = opt_.jobs;
    }

    const Corpus& shipped_corpus() {
        if (corpus_.fluids.empty())
            for (const char* id : fixtures::kShippedFluids) {
                const auto t = fixtures::truth(id);
                corpus_.add(generate_grid(t->fluid(), *t, t->eos().range.pmax));
            }
        return corpus_;
    }

    const FullModel& full_model() {
        if (!full_) full_ = std::make_unique<FullModel>(finalize_full_model(shipped_corpus(), fixtures::registry(), fixtures::reference(), cfg_));
        return *full_;
    }

    std::shared_ptr<const NeuralShapeModel> random_net() {
        if (!random_net_)
            random_net_ = std::make_shared<const NeuralShapeModel>(fixtures::registry().at(fixtures::kReference),
                                                                    derive_seed(opt_.seed, "untrained"), cfg_.net);
        return random_net_;
    }

    ShapeFactorModelPtr shape(const std::string& kind, const Fluid& f) {
        const auto& co = fixtures::reference()->fluid().crit;
        if (kind == "identity") return std::make_shared<IdentityShape>();
        if (kind == "huber-ely") return std::make_shared<HuberElyShape>(kHuberElyRefit, f.crit, co);
        return std::make_shared<NeuralShape>(random_net(), f);
    }

    Verdict c1();
    Verdict c2();
    Verdict c3();
    Verdict c4();
    Verdict c5();
    Verdict c6();
    Verdict c7();
    Verdict c8();
    Verdict c9();
    Verdict c10();
    Verdict c11();

    const Options& options() const { return opt_; }

private:
    Options opt_;
    TrainConfig cfg_;
    Corpus corpus_;
    std::unique_ptr<FullModel> full_;
    std::shared_ptr<const NeuralShapeModel> random_net_;
};

// ---------------------------------------------------------------------------

Verdict Suite::c1() {
    const auto& ds = shipped_corpus().at(fixtures::kReference);
    const auto ref = fixtures::reference();
    const auto t0 = std::chrono::steady_clock::now();
    const EcsModel ecs(ref, ref->fluid(), std::make_shared<IdentityShape>());
    double worst = 0;
    for (const auto& pt : ds.points) {
        const auto a = ecs.residual_set(pt.state.t, pt.state.rho);
        const auto b = ref->residual_set(pt.state.t, pt.state.rho);
        worst = std::max({worst, std::abs(a.alpha_r - b.alpha_r), std::abs(a.z_r - b.z_r), std::abs(a.u_r - b.u_r),
                          std::abs(a.s_r - b.s_r), std::abs(a.h_r - b.h_r), std::abs(a.g_r - b.g_r)});
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return pass_if(worst <= 1e-12 && secs < 1.0,
                   fmt("%zu grid points, max |difference| %.3g (<= 1e-12), %.3f s (< 1 s)", ds.size(), worst, secs));
}

Verdict Suite::c2() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(opt_.seed, "identities"));
    const auto ref = fixtures::reference();
    std::vector<std::pair<std::string, std::vector<PropertyModelPtr>>> kinds;
    std::vector<PropertyModelPtr> helm, pr;
    for (const char* id : fixtures::kShippedFluids) {
        helm.push_back(fixtures::truth(id));
        pr.push_back(std::make_shared<PrModel>(fixtures::registry().at(id)));
    }
    kinds.emplace_back("helmholtz", helm);
    for (const char* kind : {"identity", "huber-ely", "nn"}) {
        std::vector<PropertyModelPtr> ms;
        for (const char* id : fixtures::kShippedFluids) {
            const auto& f = fixtures::registry().at(id);
            ms.push_back(std::make_shared<EcsModel>(ref, f, shape(kind, f)));
        }
        kinds.emplace_back(std::string("ecs-") + kind, ms);
    }
    kinds.emplace_back("pr", pr);

    constexpr int kStates = 10000;
    bool ok = true;
    std::string detail;
    for (const auto& [name, models] : kinds) {
        double worst = 0;
        for (int i = 0; i < kStates; ++i) {
            const auto& m = *models[static_cast<std::size_t>(i) % models.size()];
            const auto& c = m.fluid().crit;
            const double t = rng.uniform(0.6, 1.5) * c.tc, rho = rng.uniform(1e-3, 2.8) * c.rhoc;
            worst = std::max(worst, m.residual_set(t, rho).identity_error());
        }
        ok = ok && worst <= 1e-12;
        detail += fmt("%s %.2g; ", name.c_str(), worst);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 10.0;
    return pass_if(ok, fmt("%d states per model class, max violation: %s%.2f s (< 10 s)", kStates, detail.c_str(), secs));
}

Verdict Suite::c3() {
    const auto& corpus = shipped_corpus();
    const auto t0 = std::chrono::steady_clock::now();
    const auto ref = fixtures::reference();
    Rng rng(derive_seed(opt_.seed, "derivatives"));
    bool ok = true;
    std::string detail;
    constexpr int kStates = 1000;
    for (const char* kind : {"identity", "huber-ely", "nn"}) {
        std::vector<EcsModel> models;
        for (const char* id : fixtures::kShippedFluids) {
            const auto& f = fixtures::registry().at(id);
            models.emplace_back(ref, f, shape(kind, f));
        }
        int bad = 0;
        double worst = 0;
        for (int i = 0; i < kStates; ++i) {
            const auto& m = models[static_cast<std::size_t>(i) % models.size()];
            const auto& c = m.fluid().crit;
            const double t = rng.uniform(0.7, 1.1) * c.tc, rho = rng.uniform(0.01, 2.8) * c.rhoc;
            const auto sf = m.scaling_factors(t, rho);
            // Five-point central stencil: truncation and rounding both stay far below the tolerance.
            auto d5 = [](auto&& g, double x, double h) {
                return x * (8 * (g(x + h) - g(x - h)) - (g(x + 2 * h) - g(x - 2 * h))) / (12 * h);
            };
            auto lf = [&](double a, double b) { return std::log(m.scaling_factors(a, b).f); };
            auto lh = [&](double a, double b) { return std::log(m.scaling_factors(a, b).h); };
            const double ht = 1e-4 * t, hr = 1e-4 * rho;
            const double fd[4] = {d5([&](double x) { return lf(x, rho); }, t, ht),
                                  d5([&](double x) { return lf(t, x); }, rho, hr),
                                  d5([&](double x) { return lh(x, rho); }, t, ht),
                                  d5([&](double x) { return lh(t, x); }, rho, hr)};
            const double an[4] = {sf.F_T, sf.F_rho, sf.H_T, sf.H_rho};
            for (int k = 0; k < 4; ++k) {
                const double scale = std::max({std::abs(an[k]), std::abs(fd[k]), 1e-6});
                worst = std::max(worst, std::abs(an[k] - fd[k]) / scale);
                if (!rel_close(an[k], fd[k], 1e-5, 1e-6)) ++bad;
            }
        }
        ok = ok && bad == 0;
        detail += fmt("%s worst rel %.2g (%d misses); ", kind, worst, bad);
    }

    const auto fluids = prepare_corpus(corpus, fixtures::registry());
    NeuralShapeModel net = *random_net();
    const auto [loss, grad] = ecs_loss_and_grad(net, fluids, *ref);
    const ad::Vec x0 = net.params().flatten();
    double worst = 0;
    int bad = 0;
    for (int k = 0; k < 10; ++k) {
        ad::Vec dir(x0.size());
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
        dir.normalize();
        const double h = 1e-7;
        net.params().unflatten(x0 + h * dir);
        const double fp = ecs_loss_and_grad(net, fluids, *ref).first;
        net.params().unflatten(x0 - h * dir);
        const double fm = ecs_loss_and_grad(net, fluids, *ref).first;
        const double fd = (fp - fm) / (2 * h), an = grad.dot(dir);
        worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(an), std::abs(fd)));
        if (!rel_close(an, fd, 1e-4, 0)) ++bad;
    }
    ok = ok && bad == 0;
    detail += fmt("parameter gradient (loss %.4g, %ld parameters) worst rel %.2g over 10 directions; ", loss,
                  static_cast<long>(x0.size()), worst);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 60.0;
    return pass_if(ok, detail + fmt("%.1f s (< 60 s)", secs));
}

Verdict Suite::c4() {
    double secs = 0;
    double worst_gap = 0, worst_bal = 0, worst_oracle = 0;
    int n = 0;
    std::string failures;
    for (const char* id : fixtures::kShippedFluids) {
        const auto m = fixtures::truth(id);
        for (int k = 0; k <= 29; ++k) {
            const double t = (0.70 + 0.01 * k) * m->fluid().crit.tc;
            try {
                const auto t0 = std::chrono::steady_clock::now();
                const auto s = saturation_solve(*m, t);
                secs += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                const auto chem = [&](double r) { return m->residual_set(t, r).g_r + std::log(r); };
                worst_gap = std::max(worst_gap, std::abs(chem(s.rho_liq) - chem(s.rho_vap)));
                worst_bal = std::max({worst_bal, std::abs(m->pressure(t, s.rho_liq) - s.psat) / s.psat,
                                      std::abs(m->pressure(t, s.rho_vap) - s.psat) / s.psat});
                const auto o = oracle::equal_area(*m, t, m->max_density(t));
                worst_oracle = std::max(worst_oracle, std::abs(s.psat - o.psat) / o.psat);
                ++n;
            } catch (const std::exception& e) {
                failures += fmt("%s T=%.3f: %s; ", id, t, e.what());
            }
        }
    }
    const bool ok = failures.empty() && worst_gap <= 1e-8 && worst_bal <= 1e-10 && worst_oracle <= 1e-4 && secs < 60;
    return pass_if(ok, fmt("%d isotherms, max gap %.2g (<= 1e-8), max pressure imbalance %.2g (<= 1e-10), max psat "
                           "deviation from equal-area %.2g (<= 1e-4), solver %.2f s (< 60 s)",
                           n, worst_gap, worst_bal, worst_oracle, secs) +
                           (failures.empty() ? "" : "; failures: " + failures));
}

Verdict Suite::c5() {
    const auto t0 = std::chrono::steady_clock::now();
    Fluid f;
    f.id = "pr-anchor";
    f.crit = {350.0, 5.0, 4.0, 0.2};
    const PrModel m(f);
    // The model's own critical density is where dp/drho touches zero on the critical isotherm.
    const double rho_c = boost::math::tools::brent_find_minima(
        [&](double r) { return m.dp_drho(f.crit.tc, r); }, 2.0, 8.0, 52).first;
    const double zc_model = m.pressure(f.crit.tc, rho_c) * 1000.0 / (rho_c * R_gas * f.crit.tc);
    const double zc_oracle = (1 - oracle::pr_triple_root_b()) / 3;
    bool ok = std::abs(zc_model - 0.3074) <= 1e-4 && std::abs(zc_oracle - 0.3074) <= 1e-4 &&
              std::abs(zc_model - zc_oracle) <= 1e-6;
    std::string detail = fmt("Zc model %.6f, triple-root %.6f (0.3074 +/- 1e-4); log10(psat/pc) at 0.7 tc:", zc_model, zc_oracle);
    for (double omega : {0.0, 0.1, 0.2, 0.3, 0.4}) {
        f.crit.omega = omega;
        const PrModel mw(f);
        const double v = std::log10(saturation_solve(mw, 0.7 * f.crit.tc).psat / *f.crit.pc);
        ok = ok && std::abs(v + 1 + omega) <= 0.05;
        detail += fmt(" w=%.1f %.4f (target %.1f)", omega, v, -(1 + omega));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 5;
    return pass_if(ok, detail + fmt("; %.2f s (< 5 s)", secs));
}

Verdict Suite::c6() {
    const auto fluids = prepare_corpus(shipped_corpus(), fixtures::registry());
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (int k = 1; k <= 5; ++k) {
        NeuralShapeModel m(fixtures::registry().at(fixtures::kReference), derive_seed(opt_.seed, "pretrain-" + std::to_string(k)),
                           cfg_.net);
        try {
            const auto r = pretrain(m, fluids, cfg_);
            const double dev = max_shape_deviation(m, fluids);
            ok = ok && dev <= 1e-3;
            detail += fmt("seed %d: %.2e after %d epochs; ", k, dev, r.epochs);
        } catch (const Error& e) {
            ok = false;
            detail += fmt("seed %d: %s; ", k, e.what());
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 600;
    return pass_if(ok, "max |theta-1|, |phi-1| (<= 1e-3): " + detail + fmt("%.0f s (< 600 s)", secs));
}

Verdict Suite::c7() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ref = fixtures::reference();
    struct Spec {
        const char* id;
        const char* smiles;
        double theta, phi;
    };
    const Spec specs[] = {{"syn-1", "CC(F)F", 0.96, 1.05},           {"syn-2", "FCC(F)(F)F", 1.04, 0.95},
                          {"syn-3", "FC(F)C(F)(F)F", 1.08, 1.08},    {"syn-4", "CC(F)(F)CF", 0.98, 0.94},
                          {"syn-5", "FC(F)=CC(F)(F)F", 1.02, 1.02}, {"syn-6", "FC(F)(F)CC(F)(F)F", 1.06, 0.97}};
    FluidRegistry reg;
    Corpus corpus;
    bool ok = true;
    std::string detail = "Huber-Ely psat AAD (<= 0.5%):";
    for (const auto& s : specs) {
        const auto syn = make_constant_shape_fluid(ref, s.id, s.smiles, s.theta, s.phi);
        reg.add(syn.fluid);
        // Grid and phase labels follow the true critical point of the synthetic surface.
        Fluid grid_fluid = syn.fluid;
        grid_fluid.crit.tc = s.theta * ref->fluid().crit.tc;
        grid_fluid.crit.rhoc = ref->fluid().crit.rhoc / s.phi;
        corpus.add(generate_grid(grid_fluid, *syn.truth, syn.truth_pmax));

        try {
            const auto data = saturation_data(*syn.truth, default_fit_tr_grid());
            const auto fit = fit_huber_ely_fluid_specific(ref, syn.fluid, data);
            const EcsModel he(ref, syn.fluid, std::make_shared<HuberElyShape>(fit.params, syn.fluid.crit, ref->fluid().crit));
            std::vector<double> pr, pc;
            for (const auto& d : data) {
                pr.push_back(d.psat);
                pc.push_back(saturation_solve(he, d.t).psat);
            }
            const double a = aad(pr, pc);
            ok = ok && a <= 0.5;
            detail += fmt(" %s %.4f%%", s.id, a);
        } catch (const Error& e) {
            ok = false;
            detail += fmt(" %s failed (%s)", s.id, e.what());
        }
    }
    detail += "; NN-ECS training-grid density AAD (<= 0.5%):";
    try {
        const auto full = finalize_full_model(corpus, reg, ref, cfg_);
        const auto tab = property_report({nn_ecs_model(full.model, ref)}, corpus, reg, {{"density"}, EnergyBasis::FixedTP, opt_.jobs});
        for (const auto& s : specs) {
            double weighted = 0;
            int count = 0, fails = 0;
            for (Phase ph : kAllPhases)
                if (const auto* r = tab.find("nn-ecs", s.id, "density", std::string(to_string(ph)))) {
                    weighted += r->mean * r->count;
                    count += r->count;
                    fails += r->failures;
                }
            const double a = count ? weighted / count : 0;
            ok = ok && count > 0 && fails == 0 && a <= 0.5;
            detail += fmt(" %s %.4f%% (n=%d, fail=%d)", s.id, a, count, fails);
        }
        detail += fmt("; training stopped at epoch %d (best %d)", full.main.epochs, full.main.best_epoch);
    } catch (const Error& e) {
        ok = false;
        detail += std::string(" training failed: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 7200;
    return pass_if(ok, detail + fmt("; %.0f s (< 7200 s)", secs));
}

Verdict Suite::c8() {
    const auto& corpus = shipped_corpus();
    const auto t0 = std::chrono::steady_clock::now();
    const auto ref = fixtures::reference();
    LoocvOptions lo;
    lo.holdouts = {"propane", "R143a", "R1234yf"};
    lo.properties = {"density"};
    lo.keep_checkpoints = false;
    const auto folds = loocv(corpus, fixtures::registry(), ref, cfg_, lo);
    const NamedModel identity{"identity", [ref](const Fluid& f) -> PropertyModelPtr {
                                  return std::make_shared<EcsModel>(ref, f, std::make_shared<IdentityShape>());
                              }};
    bool ok = true;
    std::string detail = "held-out liquid density AAD, NN-ECS vs identity CS:";
    for (const auto& f : folds) {
        if (!f.error.empty()) {
            ok = false;
            detail += fmt(" %s failed (%s)", f.held_out.c_str(), f.error.c_str());
            continue;
        }
        Corpus test;
        test.add(corpus.at(f.held_out));
        ReportOptions ro;
        ro.properties = {"density"};
        const auto id_tab = property_report({identity}, test, fixtures::registry(), ro);
        const auto& nn = f.table.at("nn-ecs", f.held_out, "density", "liquid");
        const auto& cs = id_tab.at("identity", f.held_out, "density", "liquid");
        ok = ok && nn.failures == 0 && nn.mean <= cs.mean;
        detail += fmt(" %s %.3f%% vs %.3f%% (fail %d/%d)", f.held_out.c_str(), nn.mean, cs.mean, nn.failures, cs.failures);
        for (Phase ph : {Phase::Vapor, Phase::Supercritical}) {
            const std::string p(to_string(ph));
            if (const auto* r = f.table.find("nn-ecs", f.held_out, "density", p))
                if (const auto* c = id_tab.find("identity", f.held_out, "density", p))
                    note(fmt("fold %s %s density: nn-ecs %.3f%%, identity %.3f%%", f.held_out.c_str(), p.c_str(), r->mean,
                             c->mean));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 4 * 3600;
    return pass_if(ok, detail + fmt("; %.0f s (< 14400 s)", secs));
}

Verdict Suite::c9() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& corpus = shipped_corpus();
    try {
        const auto& full = full_model();
        ReportOptions ro;
        ro.properties = {"density"};
        ro.jobs = opt_.jobs;
        const auto tab = property_report({nn_ecs_model(full.model, fixtures::reference())}, corpus, fixtures::registry(), ro);
        bool ok = true;
        std::string detail = "mean density AAD over fluids (<= 0.7%):";
        for (Phase ph : kAllPhases) {
            const auto& r = tab.at("nn-ecs", "*", "density", std::string(to_string(ph)));
            ok = ok && r.mean <= 0.7 && r.failures == 0;
            detail += fmt(" %s %.3f%% (n=%d, fail=%d)", std::string(to_string(ph)).c_str(), r.mean, r.count, r.failures);
        }
        for (const auto& r : tab.rows)
            if (r.fluid_id != "*") note(fmt("%-11s %-13s %.3f%%", r.fluid_id.c_str(), r.phase.c_str(), r.mean));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ok = ok && secs < 7200;
        return pass_if(ok, detail + fmt("; training %d epochs; %.0f s (< 7200 s)", full.main.epochs, secs));
    } catch (const Error& e) {
        return {Status::Fail, std::string("training failed: ") + e.kind() + ": " + e.what()};
    }
}

Verdict Suite::c10() {
    const auto& corpus = shipped_corpus();
    std::shared_ptr<const NeuralShapeModel> net;
    try {
        net = full_model().model;
    } catch (const Error& e) {
        return {Status::Fail, std::string("no trained model: ") + e.what()};
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto nm = nn_ecs_model(net, fixtures::reference());
    SensitivityOptions tp;
    tp.jobs = opt_.jobs;
    SensitivityOptions trho = tp;
    trho.energy_basis = EnergyBasis::FixedTRho;
    // Within the temperature band a 2 % tc shift can carry the critical point across the isotherm,
    // so linearity is checked outside it at every density.
    SensitivityOptions linear = tp, linear_trho = trho;
    linear.rho_band = linear_trho.rho_band = std::numeric_limits<double>::infinity();

    bool zero_ok = true, ratio_ok = true;
    double rmin = 1e9, rmax = 0;
    std::map<std::string, double> liquid, liquid_tp; // "s_r/tc" -> mean variation over fluids
    for (const char* id : fixtures::kShippedFluids) {
        const auto& f = fixtures::registry().at(id);
        const auto& ds = corpus.at(id);
        for (const auto* o : {&tp, &trho})
            for (const auto& r : critical_sensitivity(nm, f, ds, 0.0, *o).rows) zero_ok = zero_ok && r.variation == 0.0;

        for (const auto* o : {&linear, &linear_trho}) {
            const auto r1 = critical_sensitivity(nm, f, ds, 0.01, *o);
            const auto r2 = critical_sensitivity(nm, f, ds, 0.02, *o);
            for (const auto& a : r1.rows) {
                if (a.count == 0) continue;
                const auto& b = r2.at(a.property, a.phase, a.parameter);
                const double ratio = b.variation / a.variation;
                rmin = std::min(rmin, ratio);
                rmax = std::max(rmax, ratio);
                if (!(ratio >= 1.6 && ratio <= 2.4)) {
                    ratio_ok = false;
                    note(fmt("ratio outside [1.6, 2.4]: %s %s %s %s = %.3f", id, a.property.c_str(), a.phase.c_str(),
                             a.parameter.c_str(), ratio));
                }
            }
        }
        const auto r1 = critical_sensitivity(nm, f, ds, 0.01, trho);
        const auto r1tp = critical_sensitivity(nm, f, ds, 0.01, tp);
        for (const char* prop : {"s_r", "h_r"})
            for (const char* par : {"tc", "rhoc"}) {
                const std::string key = std::string(prop) + "/" + par;
                liquid[key] += r1.at(prop, "liquid", par).variation / 4.0;
                liquid_tp[key] += r1tp.at(prop, "liquid", par).variation / 4.0;
            }
        note(fmt("%s liquid at 1%%, stored density: s_r tc %.3f rhoc %.3f, h_r tc %.3f rhoc %.3f; at fixed (T, P): "
                 "s_r tc %.3f rhoc %.3f, h_r tc %.3f rhoc %.3f; density tc %.3f rhoc %.3f",
                 id, r1.at("s_r", "liquid", "tc").variation, r1.at("s_r", "liquid", "rhoc").variation,
                 r1.at("h_r", "liquid", "tc").variation, r1.at("h_r", "liquid", "rhoc").variation,
                 r1tp.at("s_r", "liquid", "tc").variation, r1tp.at("s_r", "liquid", "rhoc").variation,
                 r1tp.at("h_r", "liquid", "tc").variation, r1tp.at("h_r", "liquid", "rhoc").variation,
                 r1tp.at("density", "liquid", "tc").variation, r1tp.at("density", "liquid", "rhoc").variation));
    }
    note(fmt("mean liquid at fixed (T, P) (not asserted): s_r tc %.3f%% rhoc %.3f%%, h_r tc %.3f%% rhoc %.3f%%",
             liquid_tp["s_r/tc"], liquid_tp["s_r/rhoc"], liquid_tp["h_r/tc"], liquid_tp["h_r/rhoc"]));
    const bool order_ok = liquid["s_r/rhoc"] > liquid["s_r/tc"] && liquid["h_r/tc"] > liquid["h_r/rhoc"];
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return pass_if(zero_ok && ratio_ok && order_ok && secs < 600,
                   fmt("delta=0 all zero: %s; 2%%/1%% ratios in [%.3f, %.3f] (need [1.6, 2.4]); mean liquid s_r at "
                       "stored density: rhoc %.3f%% vs tc %.3f%%; mean liquid h_r: tc %.3f%% vs rhoc %.3f%%; %.0f s (< 600 s)",
                       zero_ok ? "yes" : "no", rmin, rmax, liquid["s_r/rhoc"], liquid["s_r/tc"], liquid["h_r/tc"],
                       liquid["h_r/rhoc"], secs));
}

Verdict Suite::c11() {
    if (opt_.corpus_dir.empty() && opt_.corpus_registry.empty() && opt_.corpus_eos_dir.empty())
        return {Status::Skip, "no external corpus supplied (--corpus-dir, --corpus-registry, --corpus-eos-dir)"};
    if (opt_.corpus_dir.empty() || opt_.corpus_registry.empty() || opt_.corpus_eos_dir.empty())
        return {Status::Fail, "external corpus needs all of --corpus-dir, --corpus-registry and --corpus-eos-dir"};
    try {
        const auto ref = fixtures::reference();
        const auto reg = FluidRegistry::load(opt_.corpus_registry);
        const EosLibrary eos(opt_.corpus_eos_dir);
        const auto corpus = load_corpus_dir(opt_.corpus_dir);
        const NamedModel he{"huber-ely", [ref](const Fluid& f) -> PropertyModelPtr {
                                return std::make_shared<EcsModel>(ref, f,
                                                                  std::make_shared<HuberElyShape>(kHuberElyRefit, f.crit, ref->fluid().crit));
                            }};
        const NamedModel pr{"pr", [](const Fluid& f) -> PropertyModelPtr { return std::make_shared<PrModel>(f); }};
        ReportOptions ro;
        ro.properties = {"density"};
        ro.jobs = opt_.jobs;
        const auto dens = property_report({he}, corpus, reg, ro);
        std::vector<PropertyModelPtr> truths;
        for (const auto& d : corpus.fluids)
            truths.push_back(std::make_shared<HelmholtzModel>(reg.at(d.fluid_id), eos.at(d.fluid_id)));
        const auto vp = vapor_pressure_report({pr}, truths, default_psat_tr_grid(), opt_.jobs);
        const double liq = dens.at("huber-ely", "*", "density", "liquid").mean;
        const double psat = vp.at("pr", "*", "psat", "saturation").mean;
        return pass_if(std::abs(liq - 4.33) <= 0.5 && std::abs(psat - 0.33) <= 0.15,
                       fmt("%zu fluids; Huber-Ely liquid density mean AAD %.3f%% (4.33 +/- 0.5); PR vapor pressure mean "
                           "AAD %.3f%% (0.33 +/- 0.15)",
                           corpus.fluids.size(), liq, psat));
    } catch (const Error& e) {
        return {Status::Fail, std::string(e.kind()) + ": " + e.what()};
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ecslab acceptance suite"};
    Options opt;
    opt.jobs = default_jobs();
    std::vector<int> only, expect_fail;
    bool verbose = false;
    app.add_option("--seed", opt.seed, "base seed")->capture_default_str();
    app.add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 11));
    app.add_option("--expect-fail", expect_fail, "known failures: still reported as FAIL, but not counted in the exit code")
        ->delimiter(',')
        ->check(CLI::Range(1, 11));
    app.add_option("--corpus-dir", opt.corpus_dir, "external corpus of dataset CSV files")->envname("ECSLAB_CORPUS_DIR");
    app.add_option("--corpus-registry", opt.corpus_registry, "fluid registry covering the external corpus")
        ->envname("ECSLAB_CORPUS_REGISTRY");
    app.add_option("--corpus-eos-dir", opt.corpus_eos_dir, "Helmholtz coefficient files for the external corpus")
        ->envname("ECSLAB_CORPUS_EOS_DIR");
    app.add_flag("--verbose", verbose, "solver and training progress on stderr");
    CLI11_PARSE(app, argc, argv);
    opt.only.insert(only.begin(), only.end());
    log::quiet() = !verbose;

    Suite suite(opt);
    const std::vector<std::pair<const char*, Verdict (Suite::*)()>> criteria{
        {"identity closure", &Suite::c1},
        {"residual identities", &Suite::c2},
        {"derivatives", &Suite::c3},
        {"saturation consistency", &Suite::c4},
        {"Peng-Robinson anchors", &Suite::c5},
        {"pretraining", &Suite::c6},
        {"synthetic plant-and-recover", &Suite::c7},
        {"cross-validation ordering", &Suite::c8},
        {"full-data fit", &Suite::c9},
        {"critical-parameter sensitivity", &Suite::c10},
        {"external corpus", &Suite::c11},
    };
    const std::set<int> expected(expect_fail.begin(), expect_fail.end());
    int failed = 0, known = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        Verdict v;
        if (!opt.only.empty() && !opt.only.count(n)) {
            v = {Status::Skip, "not selected"};
        } else {
            try {
                v = (suite.*criteria[i].second)();
            } catch (const std::exception& e) {
                v = {Status::Fail, std::string("unexpected exception: ") + e.what()};
            }
        }
        const char* tag = v.status == Status::Pass ? "PASS" : v.status == Status::Fail ? "FAIL" : "SKIP";
        const bool is_known = v.status == Status::Fail && expected.count(n);
        if (v.status == Status::Fail) ++(is_known ? known : failed);
        std::cout << fmt("criterion %2d %s %s: ", n, tag, criteria[i].first) << v.detail
                  << (is_known ? " (expected failure)" : "") << std::endl;
    }
    std::cout << fmt("%d unexpected failure(s), %d expected failure(s)", failed, known) << std::endl;
    return failed == 0 ? 0 : 1;
}
