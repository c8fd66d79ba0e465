#pragma once

// State-point grids with truth residuals, CSV exchange and filtering.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ecslab/core.hpp"
#include "ecslab/equilibrium.hpp"
#include "ecslab/log.hpp"
#include "ecslab/property_model.hpp"

namespace ecslab {

struct DataPoint {
    StatePoint state;
    ResidualSet truth;
};

enum class Provenance { Generated, Ingested };

struct FluidDataset {
    std::string fluid_id;
    std::vector<DataPoint> points;
    Provenance provenance = Provenance::Generated;
    int skipped = 0;                  ///< grid cells dropped by solver failures
    std::vector<std::string> notes;   ///< one line per skipped cell or rejected row

    std::size_t size() const { return points.size(); }
};

struct Corpus {
    std::vector<FluidDataset> fluids;

    const FluidDataset& at(const std::string& id) const {
        for (const auto& d : fluids)
            if (d.fluid_id == id) return d;
        throw InputError("fluid '" + id + "' not in corpus");
    }
    bool contains(const std::string& id) const {
        for (const auto& d : fluids)
            if (d.fluid_id == id) return true;
        return false;
    }
    void add(FluidDataset d) {
        if (contains(d.fluid_id)) throw InputError("duplicate fluid '" + d.fluid_id + "' in corpus");
        fluids.push_back(std::move(d));
    }
    std::size_t total_points() const {
        std::size_t n = 0;
        for (const auto& d : fluids) n += d.size();
        return n;
    }
};

// ---------------------------------------------------------------------------
// Grid

struct GridOptions {
    double t_lo = 0.7, t_hi = 1.1, t_step = 10.0; ///< reduced bounds, K step
    double p_min = 0.1, p_step_low = 0.2;          ///< MPa
    double p_liquid_cap = 50.0;                    ///< MPa
    double p_step_liquid_small = 3.0;              ///< when truth pmax < cap
    double p_step_liquid_large = 6.0;              ///< when truth pmax >= cap
    double p_step_super = 2.0;
    double super_pc_multiple = 5.0;
    bool include_cap = true; ///< close each isotherm with a point at its pressure cap
};

/// (T, P) cells of the standard grid, T-major. pc and truth pmax set the
/// pressure partitions; no solver is involved.
struct GridCell {
    double t, p;
};

inline std::vector<GridCell> grid_cells(const CriticalParameters& crit, double truth_pmax, const GridOptions& o = {}) {
    if (!crit.pc) throw MissingCriticalPressure("grid generation needs pc");
    const double pc = *crit.pc;
    std::vector<GridCell> cells;
    auto push_tail = [&](double t, double from, double step, double cap) {
        double last = from;
        for (int i = 1;; ++i) {
            const double p = from + step * i;
            if (p > cap * (1 + 1e-12)) break;
            cells.push_back({t, p});
            last = p;
        }
        if (o.include_cap && cap - last > 1e-9 * cap) cells.push_back({t, cap});
    };
    const double t0 = o.t_lo * crit.tc, t1 = o.t_hi * crit.tc;
    for (int k = 0;; ++k) {
        const double t = t0 + o.t_step * k;
        if (t > t1 * (1 + 1e-12)) break;
        double p_last = o.p_min;
        for (int i = 0;; ++i) {
            const double p = o.p_min + o.p_step_low * i;
            if (!(p < pc)) break;
            cells.push_back({t, p});
            p_last = p;
        }
        if (t < crit.tc) {
            const double cap = std::min(o.p_liquid_cap, truth_pmax);
            const double step = truth_pmax < o.p_liquid_cap ? o.p_step_liquid_small : o.p_step_liquid_large;
            push_tail(t, p_last, step, cap);
        } else {
            const double cap = std::min(o.super_pc_multiple * pc, truth_pmax);
            push_tail(t, p_last, o.p_step_super, cap);
        }
    }
    return cells;
}

/// Resolves every grid cell against the truth model; cells whose phase or
/// density cannot be determined are skipped and noted.
inline FluidDataset generate_grid(const Fluid& fluid, const PropertyModel& truth, double truth_pmax,
                                  const GridOptions& o = {}) {
    FluidDataset ds;
    ds.fluid_id = fluid.id;
    ds.provenance = Provenance::Generated;
    std::map<double, double> psat_cache;
    auto oracle = [&](double t) {
        auto it = psat_cache.find(t);
        if (it != psat_cache.end()) {
            if (std::isnan(it->second)) throw SaturationUnavailable("cached failure");
            return it->second;
        }
        try {
            const double p = saturation_solve(truth, t).psat;
            psat_cache[t] = p;
            return p;
        } catch (const Error&) {
            psat_cache[t] = std::numeric_limits<double>::quiet_NaN();
            throw;
        }
    };
    for (const auto& c : grid_cells(fluid.crit, truth_pmax, o)) {
        try {
            const Phase ph = classify_phase(fluid, c.t, c.p, oracle);
            const double rho = density_solve(truth, c.t, c.p, ph);
            ds.points.push_back(DataPoint{StatePoint{c.t, rho, c.p, ph}, truth.residual_set(c.t, rho)});
        } catch (const Error& e) {
            ++ds.skipped;
            std::ostringstream os;
            os << fluid.id << " T=" << c.t << " P=" << c.p << ": " << e.kind() << ": " << e.what();
            ds.notes.push_back(os.str());
            log::info("skip " + os.str());
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kDatasetHeader = "fluid_id,T_K,rho_molL,P_MPa,phase,alpha_r,Z_r,u_r,s_r,h_r";
inline constexpr const char* kExperimentalHeader = "fluid_id,T_K,P_MPa,rho_molL_exp";
inline constexpr double kIngestIdentityTolerance = 1e-6;

inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_csv(const FluidDataset& ds, std::ostream& out) {
    out << kDatasetHeader << '\n';
    for (const auto& pt : ds.points) {
        const auto& s = pt.state;
        const auto& r = pt.truth;
        out << ds.fluid_id << ',' << format_g17(s.t) << ',' << format_g17(s.rho) << ',' << format_g17(s.p) << ','
            << to_string(s.phase) << ',' << format_g17(r.alpha_r) << ',' << format_g17(r.z_r) << ','
            << format_g17(r.u_r) << ',' << format_g17(r.s_r) << ',' << format_g17(r.h_r) << '\n';
    }
}

inline void write_csv(const FluidDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    write_csv(ds, out);
}

inline std::string to_csv_string(const FluidDataset& ds) {
    std::ostringstream os;
    write_csv(ds, os);
    return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_number(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw SchemaError("bad number '" + s + "' in column " + what);
    }
    if (pos != s.size()) throw SchemaError("bad number '" + s + "' in column " + what);
    return v;
}

} // namespace detail

/// Datasets keyed by fluid id, in order of first appearance. Rows violating
/// the residual identities are dropped and noted.
inline Corpus ingest_csv_corpus(std::istream& in, const std::string& label = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(label + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
    if (line != kDatasetHeader) throw SchemaError(label + ": header must be exactly '" + std::string(kDatasetHeader) + "'");
    Corpus corpus;
    std::map<std::string, std::size_t> index;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 10) throw SchemaError(label + ":" + std::to_string(lineno) + ": expected 10 fields");
        auto it = index.find(f[0]);
        if (it == index.end()) {
            FluidDataset d;
            d.fluid_id = f[0];
            d.provenance = Provenance::Ingested;
            it = index.emplace(f[0], corpus.fluids.size()).first;
            corpus.fluids.push_back(std::move(d));
        }
        FluidDataset& ds = corpus.fluids[it->second];
        DataPoint pt;
        pt.state.t = detail::parse_number(f[1], "T_K");
        pt.state.rho = detail::parse_number(f[2], "rho_molL");
        pt.state.p = detail::parse_number(f[3], "P_MPa");
        pt.state.phase = phase_from_string(f[4]);
        pt.truth.alpha_r = detail::parse_number(f[5], "alpha_r");
        pt.truth.z_r = detail::parse_number(f[6], "Z_r");
        pt.truth.u_r = detail::parse_number(f[7], "u_r");
        pt.truth.s_r = detail::parse_number(f[8], "s_r");
        pt.truth.h_r = detail::parse_number(f[9], "h_r");
        pt.truth.g_r = pt.truth.alpha_r + pt.truth.z_r;
        if (!(pt.state.t > 0) || !(pt.state.rho > 0) || !(pt.state.p > 0))
            throw SchemaError(label + ":" + std::to_string(lineno) + ": T, rho and P must be positive");
        const double gap = std::abs(pt.truth.h_r - pt.truth.u_r - pt.truth.z_r);
        if (!(gap <= kIngestIdentityTolerance)) {
            const std::string msg = label + ":" + std::to_string(lineno) + ": h_r - u_r - Z_r = " + format_g17(gap);
            ds.notes.push_back("IdentityViolation: " + msg);
            log::warn("rejected row " + msg);
            continue;
        }
        ds.points.push_back(pt);
    }
    return corpus;
}

inline Corpus ingest_csv_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    return ingest_csv_corpus(in, path.string());
}

/// Single-fluid dataset file.
inline FluidDataset ingest_csv(const std::filesystem::path& path) {
    auto c = ingest_csv_corpus(path);
    if (c.fluids.size() != 1) throw SchemaError("'" + path.string() + "' must contain exactly one fluid");
    return std::move(c.fluids.front());
}

/// Every *.csv in `dir`, sorted by file name.
inline Corpus load_corpus_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw InputError("corpus directory '" + dir.string() + "' not found");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Corpus corpus;
    for (const auto& f : files)
        for (auto& d : ingest_csv_corpus(f).fluids) corpus.add(std::move(d));
    return corpus;
}

struct ExperimentalPoint {
    std::string fluid_id;
    double t = 0, p = 0, rho_exp = 0;
};

inline std::vector<ExperimentalPoint> ingest_experimental_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty experimental file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kExperimentalHeader)
        throw SchemaError("experimental header must be exactly '" + std::string(kExperimentalHeader) + "'");
    std::vector<ExperimentalPoint> out;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 4) throw SchemaError("experimental rows need 4 fields");
        out.push_back({f[0], detail::parse_number(f[1], "T_K"), detail::parse_number(f[2], "P_MPa"),
                       detail::parse_number(f[3], "rho_molL_exp")});
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Drops points with |T/tc - 1| < t_band and |rho/rhoc - 1| < rho_band.
inline FluidDataset near_critical_filter(const FluidDataset& ds, const CriticalParameters& crit, double t_band = 0.02,
                                         double rho_band = 0.30) {
    if (t_band < 0 || rho_band < 0) throw InputError("near-critical bands must be non-negative");
    FluidDataset out = ds;
    out.points.clear();
    for (const auto& pt : ds.points) {
        const bool near = std::abs(pt.state.t / crit.tc - 1) < t_band && std::abs(pt.state.rho / crit.rhoc - 1) < rho_band;
        if (!near) out.points.push_back(pt);
    }
    return out;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t dataset_hash(const FluidDataset& ds) { return fnv1a(to_csv_string(ds)); }

inline std::uint64_t corpus_hash(const Corpus& c) {
    std::vector<std::uint64_t> hs;
    for (const auto& d : c.fluids) hs.push_back(dataset_hash(d));
    std::sort(hs.begin(), hs.end());
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto x : hs) h = fnv1a(std::string_view(reinterpret_cast<const char*>(&x), sizeof x), h);
    return h;
}

} // namespace ecslab
