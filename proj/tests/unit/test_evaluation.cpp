#include <catch_amalgamated.hpp>

#include <cmath>

#include "ecslab/dataset.hpp"
#include "ecslab/ecs.hpp"
#include "ecslab/evaluation.hpp"
#include "ecslab/random.hpp"
#include "fixtures.hpp"

using namespace ecslab;
using Catch::Approx;

namespace {

NamedModel truth_model() {
    return {"truth", [](const Fluid& f) -> PropertyModelPtr {
                return std::make_shared<HelmholtzModel>(f, fixtures::eos().at(f.id));
            }};
}

NamedModel identity_model() {
    return {"identity", [](const Fluid& f) -> PropertyModelPtr {
                return std::make_shared<EcsModel>(fixtures::reference(), f, std::make_shared<IdentityShape>());
            }};
}

Corpus small_corpus(const std::vector<std::string>& ids, std::size_t stride) {
    Corpus c;
    for (const auto& id : ids) {
        const auto t = fixtures::truth(id);
        auto ds = generate_grid(t->fluid(), *t, t->eos().range.pmax);
        FluidDataset thin = ds;
        thin.points.clear();
        for (std::size_t i = 0; i < ds.size(); i += stride) thin.points.push_back(ds.points[i]);
        c.add(thin);
    }
    return c;
}

} // namespace

TEST_CASE("aad agrees with a long-double reference loop") {
    Rng rng(3);
    std::vector<double> ref(1000), calc(1000);
    long double acc = 0;
    for (int i = 0; i < 1000; ++i) {
        ref[i] = rng.uniform(-5, 5);
        if (std::abs(ref[i]) < 1e-3) ref[i] = 1.0;
        calc[i] = ref[i] * (1 + rng.uniform(-0.01, 0.01));
        acc += std::fabs(((long double)ref[i] - calc[i]) / ref[i]);
    }
    CHECK(aad(ref, calc) == Approx(static_cast<double>(100 * acc / 1000)).epsilon(1e-13));
    CHECK(aad(ref, ref) == 0.0);
    CHECK(aad(std::vector<double>{2.0}, std::vector<double>{1.0}) == Approx(50.0));
}

TEST_CASE("aad rejects zero references and shape mismatches") {
    CHECK_THROWS_AS(aad(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 1.0}), ZeroReferenceValue);
    CHECK_THROWS_AS(aad(std::vector<double>{1.0, 1e-13}, std::vector<double>{1.0, 1.0}), ZeroReferenceValue);
    CHECK_THROWS_AS(aad(std::vector<double>{1.0}, std::vector<double>{1.0, 1.0}), InputError);
    CHECK_THROWS_AS(aad(std::vector<double>{}, std::vector<double>{}), InputError);
}

TEST_CASE("truth against its own data reports zero error") {
    const auto corpus = small_corpus({"propane", "R143a"}, 7);
    ReportOptions opt;
    opt.jobs = 2;
    const auto tab = property_report({truth_model()}, corpus, fixtures::registry(), opt);
    REQUIRE(!tab.rows.empty());
    for (const auto& r : tab.rows) {
        INFO(r.fluid_id << " " << r.property << " " << r.phase);
        CHECK(r.failures == 0);
        CHECK(r.mean < 1e-7);
        CHECK(r.max < 1e-6);
    }
    const auto& agg = tab.at("truth", "*", "density", "liquid");
    CHECK(agg.count == tab.at("truth", "propane", "density", "liquid").count +
                           tab.at("truth", "R143a", "density", "liquid").count);

    opt.energy_basis = EnergyBasis::FixedTRho;
    opt.properties = {"s_r", "h_r"};
    const auto exact = property_report({truth_model()}, corpus, fixtures::registry(), opt);
    for (const auto& r : exact.rows) CHECK(r.mean == 0.0);
}

TEST_CASE("report rows are independent of the worker count") {
    const auto corpus = small_corpus({"R1234yf"}, 9);
    ReportOptions a, b;
    b.jobs = 3;
    const auto ta = property_report({identity_model(), truth_model()}, corpus, fixtures::registry(), a);
    const auto tb = property_report({identity_model(), truth_model()}, corpus, fixtures::registry(), b);
    CHECK(ta.rows == tb.rows);
    CHECK(ta.to_json().dump() == tb.to_json().dump());
}

TEST_CASE("report JSON round trip and text") {
    AadTable t;
    t.rows.push_back({"m", "propane", "density", "liquid", 0.123456, 0.5, 10, 1});
    t.rows.push_back({"m", "*", "density", "liquid", 0.123456, 0.123456, 10, 1});
    const auto back = AadTable::from_json(nlohmann::json::parse(t.to_json().dump()));
    CHECK(back.rows == t.rows);
    CHECK(t.text().find("0.1235") != std::string::npos);
    auto j = t.to_json();
    j["report_version"] = 2;
    CHECK_THROWS_AS(AadTable::from_json(j), SchemaError);
    CHECK_THROWS_AS(t.at("m", "R143a", "density", "liquid"), InputError);
}

TEST_CASE("models that cannot be built count as failures") {
    const auto corpus = small_corpus({"R143a"}, 20);
    NamedModel broken{"broken", [](const Fluid& f) -> PropertyModelPtr { throw InputError("no model for " + f.id); }};
    const auto tab = property_report({broken}, corpus, fixtures::registry());
    for (const auto& r : tab.rows) {
        CHECK(r.count == 0);
        CHECK(r.failures > 0);
    }
}

TEST_CASE("vapor-pressure report of truth against itself") {
    std::vector<PropertyModelPtr> truths{fixtures::truth("propane"), fixtures::truth("R1234yf")};
    const auto tab = vapor_pressure_report({truth_model(), identity_model()}, truths);
    CHECK(tab.at("truth", "*", "psat", "saturation").mean == 0.0);
    CHECK(tab.at("truth", "propane", "psat", "saturation").count == 13);
    CHECK(tab.at("identity", "propane", "psat", "saturation").mean > 0.1);
}

TEST_CASE("sensitivity at zero perturbation is zero and scales with delta") {
    const auto& fluid = fixtures::registry().at("propane");
    const auto corpus = small_corpus({"propane"}, 3);
    const auto& ds = corpus.at("propane");
    const auto zero = critical_sensitivity(identity_model(), fluid, ds, 0.0);
    CHECK(!zero.rows.empty());
    for (const auto& r : zero.rows) CHECK(r.variation == 0.0);

    const auto one = critical_sensitivity(identity_model(), fluid, ds, 0.01);
    const auto two = critical_sensitivity(identity_model(), fluid, ds, 0.02);
    REQUIRE(one.rows.size() == two.rows.size());
    for (std::size_t i = 0; i < one.rows.size(); ++i) {
        const auto& a = one.rows[i];
        const auto& b = two.rows[i];
        INFO(a.property << " " << a.phase << " " << a.parameter);
        CHECK(a.variation > 0);
        CHECK(b.variation / a.variation >= 1.6);
        CHECK(b.variation / a.variation <= 2.4);
    }
    CHECK(zero.filtered_out == one.filtered_out);
    CHECK_THROWS_AS(critical_sensitivity(identity_model(), fluid, ds, -0.1), InputError);
    CHECK_THROWS_AS(critical_sensitivity(identity_model(), fluid, ds, 0.5), InputError);
}

TEST_CASE("sensitivity on the stored-density basis matches the reference surface directly") {
    const auto& fluid = fixtures::registry().at("propane");
    const auto corpus = small_corpus({"propane"}, 3);
    const auto ds = near_critical_filter(corpus.at("propane"), fluid.crit);
    const auto ref = fixtures::reference();
    const auto& co = ref->fluid().crit;
    SensitivityOptions trho;
    trho.energy_basis = EnergyBasis::FixedTRho;
    const double delta = 0.01;
    const auto tp_rep = critical_sensitivity(identity_model(), fluid, ds, delta);
    const auto rep = critical_sensitivity(identity_model(), fluid, ds, delta, trho);
    REQUIRE(rep.filtered_out == 0);

    // Identity shapes: s_r of the target at (T, rho) is the reference s_r at (T/f, rho*h).
    const double f = fluid.crit.tc / co.tc;
    for (const char* param : {"tc", "rhoc"}) {
        const auto& row = rep.at("s_r", "liquid", param);
        REQUIRE(row.failures == 0);
        double sum = 0;
        int n = 0;
        for (const auto& pt : ds.points) {
            if (pt.state.phase != Phase::Liquid) continue;
            const double t = pt.state.t, rho = pt.state.rho, h = co.rhoc / fluid.crit.rhoc;
            const double base = ref->residual_set(t / f, rho * h).s_r;
            for (double sign : {1.0, -1.0}) {
                const double fp = param == std::string("tc") ? f * (1 + sign * delta) : f;
                const double hp = param == std::string("rhoc") ? h / (1 + sign * delta) : h;
                sum += 100 * std::abs(ref->residual_set(t / fp, rho * hp).s_r / base - 1);
                ++n;
            }
        }
        CHECK(row.count * 2 == n);
        CHECK(row.variation == Approx(sum / n).epsilon(1e-10));
    }
    // Density never depends on the energy basis.
    for (const auto& r : rep.rows)
        if (r.property == "density") CHECK(r.variation == tp_rep.at(r.property, r.phase, r.parameter).variation);
    // At fixed (T, P) a rhoc change mostly rescales the density and leaves the reduced state alone.
    CHECK(tp_rep.at("s_r", "liquid", "rhoc").variation < 0.2 * rep.at("s_r", "liquid", "rhoc").variation);
}
