#pragma once

// Edge-conditioned attention message passing over heavy-atom graphs.
//
//   h0      = tanh(X W_in + b_in)
//   m_e     = tanh(h_src W_msg + e W_edge + b_msg)            per directed edge
//   a_e     = softmax over edges entering dst of sum(w_att * h_dst * m_e)
//   h'      = tanh(h W_self + (sum_e a_e m_e) W_ctx + b_upd)
//   r       = (sum_v softmax(h w_ro)_v h_v) W_out + b_out
//
// All reductions over nodes or edges are order-free, so relabelling the atoms
// of a molecule leaves r bitwise unchanged.

#include <cmath>
#include <string>
#include <vector>

#include "ecslab/autodiff/tape.hpp"
#include "ecslab/errors.hpp"
#include "ecslab/molecule.hpp"
#include "ecslab/random.hpp"

namespace ecslab {

struct GnnConfig {
    int hidden = 32;
    int out = 16;
    int layers = 2;
};

namespace detail {

inline ad::Mat xavier(Rng& rng, int fan_in, int fan_out) {
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    ad::Mat m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(-lim, lim);
    return m;
}

} // namespace detail

/// Registers GNN parameters (prefix "gnn.") into `ps`.
inline void add_gnn_params(ad::ParamSet& ps, const GnnConfig& cfg, Rng& rng) {
    const int H = cfg.hidden;
    ps.add("gnn.W_in", detail::xavier(rng, kNodeFeatures, H));
    ps.add("gnn.b_in", ad::Mat::Zero(1, H));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "gnn.l" + std::to_string(l) + ".";
        ps.add(p + "W_msg", detail::xavier(rng, H, H));
        ps.add(p + "W_edge", detail::xavier(rng, kEdgeFeatures, H));
        ps.add(p + "b_msg", ad::Mat::Zero(1, H));
        ps.add(p + "w_att", detail::xavier(rng, 1, H));
        ps.add(p + "W_self", detail::xavier(rng, H, H));
        ps.add(p + "W_ctx", detail::xavier(rng, H, H));
        ps.add(p + "b_upd", ad::Mat::Zero(1, H));
    }
    ps.add("gnn.w_ro", detail::xavier(rng, H, 1));
    ps.add("gnn.W_out", detail::xavier(rng, H, cfg.out));
    ps.add("gnn.b_out", ad::Mat::Zero(1, cfg.out));
}

/// Graph arrays in the layout the message-passing layers consume.
struct GraphTensors {
    ad::Mat x;              ///< nodes x 12
    ad::Mat e;              ///< directed edges x 5
    std::vector<int> src;   ///< per directed edge
    std::vector<int> dst;   ///< per directed edge
    int n_nodes = 0;
};

inline GraphTensors graph_tensors(const MoleculeGraph& g) {
    const auto feat = featurize(g);
    GraphTensors t;
    t.n_nodes = static_cast<int>(g.atoms.size());
    t.x.resize(t.n_nodes, kNodeFeatures);
    for (int i = 0; i < t.n_nodes; ++i)
        for (int k = 0; k < kNodeFeatures; ++k) t.x(i, k) = feat.nodes[i][k];
    const int nb = static_cast<int>(g.bonds.size());
    t.e.resize(2 * nb, kEdgeFeatures);
    for (int b = 0; b < nb; ++b) {
        for (int dir = 0; dir < 2; ++dir) {
            const int row = 2 * b + dir;
            for (int k = 0; k < kEdgeFeatures; ++k) t.e(row, k) = feat.edges[b][k];
            t.src.push_back(dir == 0 ? g.bonds[b].a : g.bonds[b].b);
            t.dst.push_back(dir == 0 ? g.bonds[b].b : g.bonds[b].a);
        }
    }
    return t;
}

/// 1 x out representation of one molecule, recorded on the tape of `p`.
inline ad::Var gnn_embed(ad::Tape& tape, const ad::BoundParams& p, const GraphTensors& g, const GnnConfig& cfg) {
    using namespace ad;
    Var x = tape.constant(g.x);
    Var e = tape.constant(g.e);
    Var h = tanh(add(matmul_rowwise(x, p["gnn.W_in"]), p["gnn.b_in"]));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string q = "gnn.l" + std::to_string(l) + ".";
        Var hs = gather_rows(h, g.src);
        Var hd = gather_rows(h, g.dst);
        Var m = tanh(add(add(matmul_rowwise(hs, p[q + "W_msg"]), matmul_rowwise(e, p[q + "W_edge"])), p[q + "b_msg"]));
        Var score = row_sum(mul(mul(hd, p[q + "w_att"]), m));
        Var a = segment_softmax(score, g.dst, g.n_nodes);
        Var ctx = segment_sum(mul(a, m), g.dst, g.n_nodes);
        h = tanh(add(add(matmul_rowwise(h, p[q + "W_self"]), matmul_rowwise(ctx, p[q + "W_ctx"])), p[q + "b_upd"]));
    }
    std::vector<int> all(g.n_nodes, 0);
    Var w = segment_softmax(matmul_rowwise(h, p["gnn.w_ro"]), all, 1);
    Var pooled = segment_sum(mul(w, h), all, 1);
    return add(matmul_rowwise(pooled, p["gnn.W_out"]), p["gnn.b_out"]);
}

/// Representation vector of `g` under fixed weights.
inline Eigen::RowVectorXd gnn_embed(const MoleculeGraph& g, const ad::ParamSet& weights, const GnnConfig& cfg = {}) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const auto& prm : weights.items()) leaves.push_back(tape.constant(prm.value));
    ad::BoundParams p(weights, leaves);
    return gnn_embed(tape, p, graph_tensors(g), cfg).value();
}

inline constexpr double kMinRepresentationNorm = 1e-12;

/// s_k = r_o,k r_j,k / (|r_o| |r_j|); its entries sum to the cosine similarity.
inline Eigen::RowVectorXd similarity(const Eigen::RowVectorXd& r_o, const Eigen::RowVectorXd& r_j) {
    if (r_o.size() != r_j.size()) throw InputError("representation vectors differ in length");
    const double no = r_o.norm(), nj = r_j.norm();
    if (no < kMinRepresentationNorm || nj < kMinRepresentationNorm)
        throw DegenerateRepresentation("representation vector norm below 1e-12");
    return r_o.cwiseProduct(r_j) / (no * nj);
}

inline ad::Var similarity(ad::Var r_o, ad::Var r_j) {
    using namespace ad;
    if (r_o.value().norm() < kMinRepresentationNorm || r_j.value().norm() < kMinRepresentationNorm)
        throw DegenerateRepresentation("representation vector norm below 1e-12");
    Var denom = mul(sqrt(sum(square(r_o))), sqrt(sum(square(r_j))));
    return div(mul(r_o, r_j), denom);
}

} // namespace ecslab
