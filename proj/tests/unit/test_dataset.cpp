#include <catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "ecslab/dataset.hpp"
#include "fixtures.hpp"

using namespace ecslab;
using Catch::Approx;

namespace {

FluidDataset grid_for(const std::string& id) {
    const auto truth = fixtures::truth(id);
    return generate_grid(truth->fluid(), *truth, truth->eos().range.pmax);
}

const FluidDataset& cached_grid(const std::string& id) {
    static std::map<std::string, FluidDataset> cache;
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, grid_for(id)).first;
    return it->second;
}

} // namespace

TEST_CASE("standard grid sizes of the shipped fluids") {
    const std::map<std::string, std::size_t> expected{
        {"R1234ze(E)", 416}, {"propane", 438}, {"R143a", 378}, {"R1234yf", 384}};
    for (const auto& [id, n] : expected) {
        const auto& ds = cached_grid(id);
        INFO(id);
        CHECK(ds.size() == n);
        CHECK(ds.skipped == 0);
    }
}

TEST_CASE("grid cells follow the partition rules") {
    for (const char* id : fixtures::kShippedFluids) {
        const auto truth = fixtures::truth(id);
        const auto& crit = truth->fluid().crit;
        const double pmax = truth->eos().range.pmax;
        const auto cells = grid_cells(crit, pmax);
        std::map<double, std::vector<double>> iso;
        for (const auto& c : cells) iso[c.t].push_back(c.p);
        double prev_t = 0;
        for (const auto& [t, ps] : iso) {
            INFO(id << " T=" << t);
            if (prev_t == 0) CHECK(t == Approx(0.7 * crit.tc).epsilon(1e-15));
            else CHECK(t - prev_t == Approx(10.0).epsilon(1e-12));
            prev_t = t;
            CHECK(t <= 1.1 * crit.tc * (1 + 1e-12));
            CHECK(std::is_sorted(ps.begin(), ps.end()));
            CHECK(std::adjacent_find(ps.begin(), ps.end()) == ps.end());
            CHECK(ps.front() == Approx(0.1));
            const double cap = t < crit.tc ? std::min(50.0, pmax) : std::min(5.0 * *crit.pc, pmax);
            CHECK(ps.back() == Approx(cap).epsilon(1e-12));
            for (std::size_t i = 1; i < ps.size(); ++i) {
                const double dp = ps[i] - ps[i - 1];
                if (ps[i] < *crit.pc) CHECK(dp == Approx(0.2).epsilon(1e-9));
                else if (ps[i] < cap * (1 - 1e-12)) {
                    const double step = t >= crit.tc ? 2.0 : (pmax < 50 ? 3.0 : 6.0);
                    CHECK(dp == Approx(step).epsilon(1e-9));
                } else {
                    CHECK(dp <= (t >= crit.tc ? 2.0 : 6.0) + 1e-9);
                }
            }
        }
        CHECK(prev_t + 10.0 > 1.1 * crit.tc);
    }
}

TEST_CASE("generated points are consistent with their truth surface") {
    for (const char* id : fixtures::kShippedFluids) {
        const auto truth = fixtures::truth(id);
        const auto& ds = cached_grid(id);
        const auto& f = truth->fluid();
        for (const auto& pt : ds.points) {
            const auto& s = pt.state;
            CHECK(truth->pressure(s.t, s.rho) == Approx(s.p).epsilon(1e-9));
            CHECK(pt.truth.identity_error() <= 1e-12);
            if (s.t >= f.crit.tc) CHECK(s.phase == Phase::Supercritical);
            else {
                const double psat = saturation_solve(*truth, s.t).psat;
                CHECK(s.phase == (s.p > psat ? Phase::Liquid : Phase::Vapor));
            }
        }
    }
}

TEST_CASE("CSV round trip is exact") {
    const auto& ds = cached_grid("R143a");
    const std::string csv = to_csv_string(ds);
    std::istringstream in(csv);
    const auto back = ingest_csv_corpus(in);
    REQUIRE(back.fluids.size() == 1);
    const auto& b = back.fluids[0];
    CHECK(b.fluid_id == "R143a");
    CHECK(b.provenance == Provenance::Ingested);
    REQUIRE(b.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(b.points[i].state.t == ds.points[i].state.t);
        CHECK(b.points[i].state.rho == ds.points[i].state.rho);
        CHECK(b.points[i].state.phase == ds.points[i].state.phase);
        CHECK(b.points[i].truth.h_r == ds.points[i].truth.h_r);
    }
    CHECK(to_csv_string(b) == csv);
    CHECK(dataset_hash(b) == dataset_hash(ds));
}

TEST_CASE("ingest rejects malformed files and drops identity violations") {
    const std::string hdr = std::string(kDatasetHeader) + "\n";
    auto ingest = [](const std::string& s) {
        std::istringstream in(s);
        return ingest_csv_corpus(in);
    };
    CHECK_THROWS_AS(ingest(""), SchemaError);
    CHECK_THROWS_AS(ingest("fluid,T\n"), SchemaError);
    CHECK_THROWS_AS(ingest(hdr + "x,300,1,1,liquid,0,0,0,0\n"), SchemaError);
    CHECK_THROWS_AS(ingest(hdr + "x,300,abc,1,liquid,0,0,0,0,0\n"), SchemaError);
    CHECK_THROWS_AS(ingest(hdr + "x,300,-1,1,liquid,0,0,0,0,0\n"), SchemaError);
    CHECK_THROWS_AS(ingest(hdr + "x,300,1,1,plasma,0,0,0,0,0\n"), InputError);
    const auto c = ingest(hdr + "x,300,1,1,liquid,-0.5,-0.2,-1.0,-0.5,-1.2\n" + "x,300,2,1,liquid,-0.5,-0.2,-1.0,-0.5,-1.0\n" +
                          "y,310,1,1,vapor,-0.1,-0.1,-0.2,-0.1,-0.3\r\n");
    REQUIRE(c.fluids.size() == 2);
    CHECK(c.at("x").size() == 1);
    CHECK(c.at("x").notes.size() == 1);
    CHECK(c.at("y").size() == 1);
    CHECK(c.at("y").points[0].truth.g_r == Approx(-0.2));
}

TEST_CASE("near-critical filter removes exactly the points inside both bands") {
    const auto& ds = cached_grid("propane");
    const auto& crit = fixtures::registry().at("propane").crit;
    for (auto [tb, rb] : {std::pair{0.02, 0.30}, {0.05, 0.5}, {0.0, 0.3}}) {
        std::size_t kept = 0;
        for (const auto& pt : ds.points) {
            const double dt = std::abs(pt.state.t - crit.tc) / crit.tc;
            const double dr = std::abs(pt.state.rho - crit.rhoc) / crit.rhoc;
            if (!(dt < tb && dr < rb)) ++kept;
        }
        CHECK(near_critical_filter(ds, crit, tb, rb).size() == kept);
    }
    CHECK(near_critical_filter(ds, crit, 0, 0).size() == ds.size());
    CHECK_THROWS_AS(near_critical_filter(ds, crit, -0.1, 0.3), InputError);
}

TEST_CASE("hashes detect changes and ignore corpus order") {
    FluidDataset a = cached_grid("R1234yf");
    FluidDataset b = cached_grid("R143a");
    Corpus c1, c2;
    c1.add(a);
    c1.add(b);
    c2.add(b);
    c2.add(a);
    CHECK(corpus_hash(c1) == corpus_hash(c2));
    CHECK_THROWS_AS(c1.add(a), InputError);
    const auto h = dataset_hash(a);
    a.points[3].state.p = std::nextafter(a.points[3].state.p, 1e9);
    CHECK(dataset_hash(a) != h);
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("corpus directory loading") {
    const auto dir = std::filesystem::temp_directory_path() / "ecslab_test_corpus";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_csv(cached_grid("R143a"), dir / "b.csv");
    write_csv(cached_grid("R1234yf"), dir / "a.csv");
    const auto c = load_corpus_dir(dir);
    REQUIRE(c.fluids.size() == 2);
    CHECK(c.fluids[0].fluid_id == "R1234yf");
    CHECK(c.total_points() == 384 + 378);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_corpus_dir(dir), InputError);
}

TEST_CASE("grid needs a critical pressure") {
    CriticalParameters c{350, 5, std::nullopt, 0.2};
    CHECK_THROWS_AS(grid_cells(c, 100), MissingCriticalPressure);
}
