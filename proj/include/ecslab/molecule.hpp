#pragma once

// Molecular graphs for the small C/F/H molecules handled by the library:
// a parser for a SMILES subset, one-hot featurization and a renderer that
// writes a graph back out in the same subset.

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecslab/errors.hpp"

namespace ecslab {

enum class Element { C, F };
enum class Hybridization { SP2, SP3 };
enum class BondType { Single, Double };
enum class BondStereo { None, Z, E };

struct Atom {
    Element element = Element::C;
    int degree = 0;          ///< number of heavy-atom neighbours
    Hybridization hyb = Hybridization::SP3;
    int implicit_h = 0;
};

struct Bond {
    int a = 0, b = 0;
    BondType type = BondType::Single;
    BondStereo stereo = BondStereo::None;
};

/// Heavy-atom graph; hydrogens are implicit and only counted.
struct MoleculeGraph {
    std::vector<Atom> atoms;
    std::vector<Bond> bonds;

    std::size_t size() const { return atoms.size(); }

    /// Neighbours of atom i as (neighbour, bond index) pairs in bond order.
    std::vector<std::pair<int, int>> neighbours(int i) const {
        std::vector<std::pair<int, int>> out;
        for (int k = 0; k < static_cast<int>(bonds.size()); ++k) {
            if (bonds[k].a == i) out.emplace_back(bonds[k].b, k);
            else if (bonds[k].b == i) out.emplace_back(bonds[k].a, k);
        }
        return out;
    }
};

inline constexpr int kNodeFeatures = 12;
inline constexpr int kEdgeFeatures = 5;

namespace detail {

struct RawBond {
    int a, b;
    char symbol; // '-', '=', '/', '\\'
    int a_pos;   // textual position of atom a relative to b: a was written first
};

// Direction of substituent `sub` relative to double-bond atom `centre`
// (+1 "up", -1 "down"), derived from the written directional bond.
inline int substituent_direction(const RawBond& rb, int centre) {
    // "A / B" means B is up relative to A.
    int sign = (rb.symbol == '/') ? 1 : -1;
    // a is written before b; if the centre is b then the substituent (a) is the
    // mirror of "b relative to a".
    return (rb.a == centre) ? sign : -sign;
}

inline void validate_graph(MoleculeGraph& g) {
    const int n = static_cast<int>(g.atoms.size());
    if (n < 2) throw ParseError("molecule needs at least two heavy atoms");
    int doubles = 0;
    std::vector<int> valence(n, 0);
    for (auto& a : g.atoms) a.degree = 0;
    for (const auto& b : g.bonds) {
        int order = b.type == BondType::Double ? 2 : 1;
        valence[b.a] += order;
        valence[b.b] += order;
        g.atoms[b.a].degree += 1;
        g.atoms[b.b].degree += 1;
        if (b.type == BondType::Double) {
            ++doubles;
            g.atoms[b.a].hyb = Hybridization::SP2;
            g.atoms[b.b].hyb = Hybridization::SP2;
        }
    }
    if (doubles > 1) throw ParseError("at most one double bond is supported");
    for (int i = 0; i < n; ++i) {
        auto& a = g.atoms[i];
        if (a.element == Element::F) {
            if (valence[i] != 1 || a.degree != 1)
                throw ValenceError("fluorine atom " + std::to_string(i) + " must have exactly one single bond");
            a.implicit_h = 0;
            a.hyb = Hybridization::SP3;
        } else {
            int h = 4 - valence[i];
            if (h < 0 || h > 3)
                throw ValenceError("carbon atom " + std::to_string(i) + " cannot reach valence 4 (bond order " +
                                   std::to_string(valence[i]) + ")");
            a.implicit_h = h;
        }
    }
    // connectivity
    std::vector<int> seen(n, 0), stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (auto [w, k] : g.neighbours(v)) {
            (void)k;
            if (!seen[w]) { seen[w] = 1; stack.push_back(w); }
        }
    }
    for (int i = 0; i < n; ++i)
        if (!seen[i]) throw ParseError("molecule graph is not connected");
}

} // namespace detail

/// Parse a SMILES subset: atoms C and F, implicit single bonds, '-', '=',
/// branches and '/' '\' for double-bond geometry.
inline MoleculeGraph parse_molecule(std::string_view spec) {
    MoleculeGraph g;
    std::vector<detail::RawBond> raw;
    std::vector<int> branch_stack;
    int prev = -1;
    char pending = 0;
    for (std::size_t pos = 0; pos < spec.size(); ++pos) {
        char c = spec[pos];
        if (c == 'C' || c == 'F') {
            // two-letter elements starting with C (Cl) are not supported
            if (c == 'C' && pos + 1 < spec.size() && std::islower(static_cast<unsigned char>(spec[pos + 1])))
                throw UnsupportedAtom(std::string("unsupported element '") + std::string(spec.substr(pos, 2)) + "'");
            int idx = static_cast<int>(g.atoms.size());
            g.atoms.push_back(Atom{c == 'C' ? Element::C : Element::F, 0, Hybridization::SP3, 0});
            if (prev >= 0) raw.push_back({prev, idx, pending ? pending : '-', 0});
            else if (pending) throw ParseError("bond symbol without a preceding atom");
            pending = 0;
            prev = idx;
        } else if (c == '=' || c == '-' || c == '/' || c == '\\') {
            if (pending) throw ParseError("two consecutive bond symbols at position " + std::to_string(pos));
            if (prev < 0) throw ParseError("bond symbol without a preceding atom");
            pending = c;
        } else if (c == '(') {
            if (prev < 0) throw ParseError("branch without a preceding atom");
            if (pending) throw ParseError("bond symbol before '('");
            branch_stack.push_back(prev);
        } else if (c == ')') {
            if (branch_stack.empty()) throw ParseError("unbalanced ')'");
            if (pending) throw ParseError("dangling bond symbol before ')'");
            prev = branch_stack.back();
            branch_stack.pop_back();
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '[') {
            throw UnsupportedAtom(std::string("unsupported atom '") + c + "' at position " + std::to_string(pos));
        } else {
            throw ParseError(std::string("unexpected character '") + c + "' at position " + std::to_string(pos));
        }
    }
    if (!branch_stack.empty()) throw ParseError("unbalanced '('");
    if (pending) throw ParseError("dangling bond symbol at end of input");
    if (g.atoms.empty()) throw ParseError("empty molecule");

    for (const auto& rb : raw) {
        for (const auto& b : g.bonds)
            if ((b.a == rb.a && b.b == rb.b) || (b.a == rb.b && b.b == rb.a))
                throw ParseError("duplicate bond");
        g.bonds.push_back(Bond{rb.a, rb.b, rb.symbol == '=' ? BondType::Double : BondType::Single, BondStereo::None});
    }
    detail::validate_graph(g);

    // geometry of the double bond from directional single bonds
    for (auto& db : g.bonds) {
        if (db.type != BondType::Double) continue;
        std::optional<int> dir_a, dir_b;
        for (const auto& rb : raw) {
            if (rb.symbol != '/' && rb.symbol != '\\') continue;
            for (int end : {db.a, db.b}) {
                int other = end == db.a ? db.b : db.a;
                bool touches = (rb.a == end && rb.b != other) || (rb.b == end && rb.a != other);
                if (!touches) continue;
                int d = detail::substituent_direction(rb, end);
                auto& slot = end == db.a ? dir_a : dir_b;
                if (!slot) slot = d;
            }
        }
        if (dir_a && dir_b) db.stereo = (*dir_a == *dir_b) ? BondStereo::Z : BondStereo::E;
    }
    return g;
}

/// One-hot node features: element(2) | degree 1-4 (4) | sp2/sp3 (2) | H 0-3 (4).
inline std::array<double, kNodeFeatures> node_features(const Atom& a) {
    std::array<double, kNodeFeatures> f{};
    f[a.element == Element::C ? 0 : 1] = 1.0;
    if (a.degree < 1 || a.degree > 4) throw ValenceError("atom degree outside 1..4");
    f[2 + (a.degree - 1)] = 1.0;
    f[6 + (a.hyb == Hybridization::SP2 ? 0 : 1)] = 1.0;
    f[8 + a.implicit_h] = 1.0;
    return f;
}

/// One-hot edge features: single/double (2) | none/Z/E (3).
inline std::array<double, kEdgeFeatures> edge_features(const Bond& b) {
    std::array<double, kEdgeFeatures> f{};
    f[b.type == BondType::Single ? 0 : 1] = 1.0;
    f[2 + static_cast<int>(b.stereo)] = 1.0;
    return f;
}

struct Featurized {
    std::vector<std::array<double, kNodeFeatures>> nodes;
    std::vector<std::array<double, kEdgeFeatures>> edges; // one per bond, bond order
};

inline Featurized featurize(const MoleculeGraph& g) {
    Featurized out;
    out.nodes.reserve(g.atoms.size());
    for (const auto& a : g.atoms) out.nodes.push_back(node_features(a));
    for (const auto& b : g.bonds) out.edges.push_back(edge_features(b));
    return out;
}

/// Write the graph in the parser's SMILES subset (depth-first from atom 0).
inline std::string render_molecule(const MoleculeGraph& g) {
    const int n = static_cast<int>(g.atoms.size());
    // choose one stereo substituent per double-bond end
    int dbk = -1;
    for (int k = 0; k < static_cast<int>(g.bonds.size()); ++k)
        if (g.bonds[k].type == BondType::Double) dbk = k;
    std::vector<int> stereo_sub(n, -1); // for double-bond atoms: marked substituent
    std::vector<int> wanted_dir(n, 0);  // desired direction of that substituent
    if (dbk >= 0 && g.bonds[dbk].stereo != BondStereo::None) {
        const auto& db = g.bonds[dbk];
        for (int end : {db.a, db.b}) {
            int other = end == db.a ? db.b : db.a;
            for (auto [w, k] : g.neighbours(end)) {
                (void)k;
                if (w != other) { stereo_sub[end] = w; break; }
            }
        }
        wanted_dir[db.a] = 1;
        wanted_dir[db.b] = db.stereo == BondStereo::Z ? 1 : -1;
    }

    std::string out;
    std::vector<int> visited(n, 0);
    auto element = [&](int i) { return g.atoms[i].element == Element::C ? 'C' : 'F'; };
    auto bond_between = [&](int a, int b) -> const Bond& {
        for (const auto& bd : g.bonds)
            if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) return bd;
        throw ParseError("internal: missing bond");
    };
    // symbol for the bond written as "from <sym> to"
    auto symbol = [&](int from, int to) -> std::string {
        const Bond& bd = bond_between(from, to);
        if (bd.type == BondType::Double) return "=";
        // `to` is a marked substituent of double-bond atom `from`: "from / to" puts `to` up
        if (stereo_sub[from] == to && wanted_dir[from] != 0) return wanted_dir[from] > 0 ? "/" : "\\";
        // `from` is a marked substituent of double-bond atom `to`: "from / to" puts `from` down
        if (stereo_sub[to] == from && wanted_dir[to] != 0) return wanted_dir[to] > 0 ? "\\" : "/";
        return "";
    };
    auto dfs = [&](auto&& self, int v) -> void {
        visited[v] = 1;
        out.push_back(element(v));
        std::vector<int> next;
        for (auto [w, k] : g.neighbours(v)) {
            (void)k;
            if (!visited[w]) next.push_back(w);
        }
        for (std::size_t i = 0; i < next.size(); ++i) {
            int w = next[i];
            if (visited[w]) continue;
            bool branch = i + 1 < next.size();
            if (branch) out.push_back('(');
            out += symbol(v, w);
            self(self, w);
            if (branch) out.push_back(')');
        }
    };
    dfs(dfs, 0);
    return out;
}

} // namespace ecslab
