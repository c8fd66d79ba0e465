#pragma once

// Shape-factor models: theta(tr, rhor), phi(tr, rhor) and their state partials.

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecslab/autodiff/dual.hpp"
#include "ecslab/autodiff/tape.hpp"
#include "ecslab/core.hpp"
#include "ecslab/gnn.hpp"
#include "ecslab/random.hpp"

namespace ecslab {

struct ShapeFactorEval {
    double theta = 1, phi = 1;
    double d_theta_d_tr = 0, d_theta_d_rhor = 0;
    double d_phi_d_tr = 0, d_phi_d_rhor = 0;
};

inline void require_positive(const ShapeFactorEval& ev, double tr, double rhor) {
    if (!(ev.theta > 0) || !(ev.phi > 0)) {
        std::ostringstream os;
        os << "non-positive shape factor (theta=" << ev.theta << ", phi=" << ev.phi << ") at tr=" << tr
           << ", rhor=" << rhor;
        throw NonPositiveShapeFactor(os.str());
    }
}

/// Shape factors of one target fluid relative to the reference fluid.
class ShapeFactorModel {
public:
    virtual ~ShapeFactorModel() = default;
    virtual std::string name() const = 0;
    virtual ShapeFactorEval eval(double tr, double rhor) const = 0;
};

using ShapeFactorModelPtr = std::shared_ptr<const ShapeFactorModel>;

inline ShapeFactorEval identity_eval(double /*tr*/, double /*rhor*/) { return ShapeFactorEval{}; }

class IdentityShape final : public ShapeFactorModel {
public:
    std::string name() const override { return "identity"; }
    ShapeFactorEval eval(double tr, double rhor) const override { return identity_eval(tr, rhor); }
};

/// State-independent theta*, phi*; used to synthesize fluids with known answers.
class ConstantShape final : public ShapeFactorModel {
public:
    ConstantShape(double theta, double phi) : theta_(theta), phi_(phi) {}
    std::string name() const override { return "constant"; }
    ShapeFactorEval eval(double tr, double rhor) const override {
        ShapeFactorEval ev{theta_, phi_, 0, 0, 0, 0};
        require_positive(ev, tr, rhor);
        return ev;
    }
    double theta() const { return theta_; }
    double phi() const { return phi_; }

private:
    double theta_, phi_;
};

// ---------------------------------------------------------------------------
// Huber-Ely temperature-only correlation

struct HuberElyParams {
    double alpha1 = 0, alpha2 = 0, beta1 = 0, beta2 = 0;

    std::array<double, 4> as_array() const { return {alpha1, alpha2, beta1, beta2}; }
    static HuberElyParams from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
};

/// Universal parameters with R134a as reference.
inline constexpr HuberElyParams kHuberElyOriginal{0.086853583565, -0.55945094628, 0.057382113745, 0.20164093938};
/// Universal parameters with R1234ze(E) as reference, fitted to HFO/HCFO fluids.
inline constexpr HuberElyParams kHuberElyTeraishi{0.06234, -0.6471, -0.3790, 0.1040};
/// Universal parameters with R1234ze(E) as reference, refitted to a 44-fluid set.
inline constexpr HuberElyParams kHuberElyRefit{0.03458966, -0.65863522, -0.20994404, 0.16257211};

inline ShapeFactorEval huber_ely_eval(const HuberElyParams& p, double omega_j, double omega_o, double zc_j, double zc_o,
                                      double tr_j) {
    if (!(tr_j > 0)) throw InputError("reduced temperature must be positive");
    if (!(zc_j > 0) || !(zc_o > 0)) throw MissingCriticalPressure("Huber-Ely phi needs both critical compressibilities");
    const double dw = omega_j - omega_o;
    const double ln_tr = std::log(tr_j);
    const double zr = zc_o / zc_j;
    ShapeFactorEval ev;
    ev.theta = 1 + dw * (p.alpha1 + p.alpha2 * ln_tr);
    ev.phi = zr * (1 + dw * (p.beta1 + p.beta2 * ln_tr));
    ev.d_theta_d_tr = dw * p.alpha2 / tr_j;
    ev.d_phi_d_tr = zr * dw * p.beta2 / tr_j;
    return ev;
}

class HuberElyShape final : public ShapeFactorModel {
public:
    HuberElyShape(HuberElyParams params, const CriticalParameters& target, const CriticalParameters& reference)
        : params_(params) {
        if (!target.omega || !reference.omega)
            throw InputError("Huber-Ely shape factors need acentric factors of both fluids");
        omega_j_ = *target.omega;
        omega_o_ = *reference.omega;
        zc_j_ = target.zc();
        zc_o_ = reference.zc();
    }
    std::string name() const override { return "huber-ely"; }
    ShapeFactorEval eval(double tr, double rhor) const override {
        auto ev = huber_ely_eval(params_, omega_j_, omega_o_, zc_j_, zc_o_, tr);
        require_positive(ev, tr, rhor);
        return ev;
    }
    const HuberElyParams& params() const { return params_; }

private:
    HuberElyParams params_;
    double omega_j_ = 0, omega_o_ = 0, zc_j_ = 0, zc_o_ = 0;
};

// ---------------------------------------------------------------------------
// Neural shape model

struct NeuralConfig {
    int width = 32;
    GnnConfig gnn{};
};

/// Trunk FCL1 -> tanh -> RB1 -> RB2 -> (split, Hadamard with s) -> FCL2 plus
/// the GNN that produces s. Residual block: x + W2 tanh(W1 x + b1) + b2.
class NeuralShapeModel {
public:
    static constexpr int kFormatVersion = 1;

    NeuralShapeModel() = default;

    /// Random initial weights; `reference` must carry a molecule.
    NeuralShapeModel(const Fluid& reference, std::uint64_t seed, NeuralConfig cfg = {}) : cfg_(cfg), seed_(seed) {
        set_reference(reference);
        Rng rng(seed);
        const int W = cfg_.width;
        params_.add("fcl1.W", detail::xavier(rng, 2, W));
        params_.add("fcl1.b", ad::Mat::Zero(1, W));
        for (const char* rb : {"rb1", "rb2"}) {
            const std::string p(rb);
            params_.add(p + ".W1", detail::xavier(rng, W, W));
            params_.add(p + ".b1", ad::Mat::Zero(1, W));
            params_.add(p + ".W2", detail::xavier(rng, W, W));
            params_.add(p + ".b2", ad::Mat::Zero(1, W));
        }
        params_.add("fcl2.W", 0.1 * detail::xavier(rng, W, 2)); // small head keeps the start near theta = phi = 1
        ad::Mat b2(1, 2);
        b2 << 1.0, 1.0;
        params_.add("fcl2.b", b2);
        add_gnn_params(params_, cfg_.gnn, rng);
    }

    const NeuralConfig& config() const { return cfg_; }
    const std::string& reference_id() const { return reference_id_; }
    const MoleculeGraph& reference_molecule() const { return reference_molecule_; }
    std::uint64_t seed() const { return seed_; }

    ad::ParamSet& params() {
        invalidate();
        return params_;
    }
    const ad::ParamSet& params() const { return params_; }

    int half() const { return cfg_.width / 2; }

    /// Similarity vector of `molecule` against the reference molecule.
    Eigen::RowVectorXd similarity_for(const MoleculeGraph& molecule) const {
        const auto r_o = reference_representation();
        const auto r_j = gnn_embed(molecule, params_, cfg_.gnn);
        return similarity(r_o, r_j);
    }

    Eigen::RowVectorXd reference_representation() const {
        std::lock_guard lk(cache_mutex_);
        if (!r_ref_) r_ref_ = gnn_embed(reference_molecule_, params_, cfg_.gnn);
        return *r_ref_;
    }

    /// (theta, phi) for one state; T is double or a dual number.
    template <typename T>
    std::pair<T, T> forward(const T& tr, const T& rhor, const Eigen::RowVectorXd& s) const {
        const int W = cfg_.width, H = half();
        const auto& W1 = params_["fcl1.W"];
        const auto& b1 = params_["fcl1.b"];
        std::vector<T> x(W);
        for (int j = 0; j < W; ++j) x[j] = tanh_(tr * W1(0, j) + rhor * W1(1, j) + b1(0, j));
        for (const char* rb : {"rb1", "rb2"}) x = residual_block(x, rb);
        for (int j = H; j < W; ++j) x[j] = x[j] * s(j - H);
        const auto& Wf = params_["fcl2.W"];
        const auto& bf = params_["fcl2.b"];
        T theta = T(bf(0, 0)), phi = T(bf(0, 1));
        for (int j = 0; j < W; ++j) {
            theta = theta + x[j] * Wf(j, 0);
            phi = phi + x[j] * Wf(j, 1);
        }
        return {theta, phi};
    }

    ShapeFactorEval eval(double tr, double rhor, const Eigen::RowVectorXd& s) const {
        auto d = ad::derive_wrt_state([&](const auto& a, const auto& b) { return forward(a, b, s); }, tr, rhor);
        ShapeFactorEval ev{d.theta, d.phi, d.theta_tr, d.theta_rhor, d.phi_tr, d.phi_rhor};
        require_positive(ev, tr, rhor);
        return ev;
    }

    /// Batched trunk on a tape; every output is N x 1. `s` is 1 x half or
    /// N x half. Without tangents only theta and phi are recorded.
    struct TapeOutputs {
        ad::Var theta, phi, theta_tr, theta_rhor, phi_tr, phi_rhor;
    };

    TapeOutputs forward_tape(ad::Tape& tape, const ad::BoundParams& p, const ad::Mat& tr_rhor, ad::Var s,
                             bool with_tangents = true) const {
        using namespace ad;
        const int H = half();
        Var X = tape.constant(tr_rhor);
        Var W1 = p["fcl1.W"];
        Mat e0(1, 2), e1(1, 2);
        e0 << 1, 0;
        e1 << 0, 1;
        Var dz_tr = matmul(tape.constant(e0), W1);
        Var dz_rh = matmul(tape.constant(e1), W1);
        Var x = tanh(add(matmul(X, W1), p["fcl1.b"]));
        if (!with_tangents) {
            for (const char* rb : {"rb1", "rb2"}) {
                const std::string q(rb);
                Var a = tanh(add(matmul(x, p[q + ".W1"]), p[q + ".b1"]));
                x = add(add(x, matmul(a, p[q + ".W2"])), p[q + ".b2"]);
            }
            Var out = add(matmul(hcat({col_slice(x, 0, H), mul(col_slice(x, H, H), s)}), p["fcl2.W"]), p["fcl2.b"]);
            return TapeOutputs{col_slice(out, 0, 1), col_slice(out, 1, 1), {}, {}, {}, {}};
        }
        Var g = 1.0 - square(x);
        Var xt = mul(g, dz_tr);
        Var xr = mul(g, dz_rh);
        for (const char* rb : {"rb1", "rb2"}) {
            const std::string q(rb);
            Var Wa = p[q + ".W1"], Wb = p[q + ".W2"];
            Var a = tanh(add(matmul(x, Wa), p[q + ".b1"]));
            Var ga = 1.0 - square(a);
            Var at = mul(ga, matmul(xt, Wa));
            Var ar = mul(ga, matmul(xr, Wa));
            x = add(add(x, matmul(a, Wb)), p[q + ".b2"]);
            xt = add(xt, matmul(at, Wb));
            xr = add(xr, matmul(ar, Wb));
        }
        auto hadamard = [&](Var v) { return hcat({col_slice(v, 0, H), mul(col_slice(v, H, H), s)}); };
        Var Wf = p["fcl2.W"];
        Var out = add(matmul(hadamard(x), Wf), p["fcl2.b"]);
        Var out_t = matmul(hadamard(xt), Wf);
        Var out_r = matmul(hadamard(xr), Wf);
        return TapeOutputs{col_slice(out, 0, 1),   col_slice(out, 1, 1),   col_slice(out_t, 0, 1),
                           col_slice(out_r, 0, 1), col_slice(out_t, 1, 1), col_slice(out_r, 1, 1)};
    }

    // -- checkpoint ---------------------------------------------------------

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format_version"] = kFormatVersion;
        j["reference_fluid_id"] = reference_id_;
        j["reference_smiles"] = reference_smiles_;
        j["activation"] = "tanh";
        j["hadamard_half"] = "second";
        j["width"] = cfg_.width;
        j["gnn_config"] = {{"hidden", cfg_.gnn.hidden}, {"out", cfg_.gnn.out}, {"layers", cfg_.gnn.layers}};
        j["seed"] = seed_;
        for (const auto& prm : params_.items()) {
            const auto dot = prm.name.find('.');
            const std::string group = prm.name.substr(0, dot);
            const std::string key = prm.name.substr(dot + 1);
            std::vector<double> data;
            data.reserve(prm.value.size());
            for (Eigen::Index r = 0; r < prm.value.rows(); ++r)
                for (Eigen::Index c = 0; c < prm.value.cols(); ++c) data.push_back(prm.value(r, c));
            j[group][key] = {{"rows", prm.value.rows()}, {"cols", prm.value.cols()}, {"data", data}};
        }
        return j;
    }

    static NeuralShapeModel from_json(const nlohmann::json& j) {
        try {
            if (j.at("format_version").get<int>() != kFormatVersion) throw SchemaError("unsupported checkpoint version");
            if (j.at("activation").get<std::string>() != "tanh") throw SchemaError("checkpoint activation must be tanh");
            if (j.at("hadamard_half").get<std::string>() != "second")
                throw SchemaError("checkpoint hadamard_half must be 'second'");
            NeuralShapeModel m;
            m.cfg_.width = j.at("width").get<int>();
            const auto& g = j.at("gnn_config");
            m.cfg_.gnn = GnnConfig{g.at("hidden").get<int>(), g.at("out").get<int>(), g.at("layers").get<int>()};
            m.seed_ = j.at("seed").get<std::uint64_t>();
            Fluid ref;
            ref.id = j.at("reference_fluid_id").get<std::string>();
            ref.smiles = j.at("reference_smiles").get<std::string>();
            ref.molecule = parse_molecule(ref.smiles);
            m.set_reference(ref);
            // Parameter order is fixed by a freshly initialised model.
            NeuralShapeModel shape(ref, 0, m.cfg_);
            for (auto& prm : shape.params_.items()) {
                const auto dot = prm.name.find('.');
                const auto& rec = j.at(prm.name.substr(0, dot)).at(prm.name.substr(dot + 1));
                const auto rows = rec.at("rows").get<Eigen::Index>(), cols = rec.at("cols").get<Eigen::Index>();
                if (rows != prm.value.rows() || cols != prm.value.cols())
                    throw SchemaError("checkpoint parameter " + prm.name + " has the wrong shape");
                const auto data = rec.at("data").get<std::vector<double>>();
                if (static_cast<Eigen::Index>(data.size()) != rows * cols)
                    throw SchemaError("checkpoint parameter " + prm.name + " has the wrong length");
                for (Eigen::Index r = 0; r < rows; ++r)
                    for (Eigen::Index c = 0; c < cols; ++c) prm.value(r, c) = data[r * cols + c];
            }
            m.params_ = std::move(shape.params_);
            return m;
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("malformed checkpoint: ") + e.what());
        }
    }

    NeuralShapeModel(const NeuralShapeModel& o)
        : cfg_(o.cfg_), seed_(o.seed_), reference_id_(o.reference_id_), reference_smiles_(o.reference_smiles_),
          reference_molecule_(o.reference_molecule_), params_(o.params_) {}
    NeuralShapeModel& operator=(const NeuralShapeModel& o) {
        if (this != &o) {
            cfg_ = o.cfg_;
            seed_ = o.seed_;
            reference_id_ = o.reference_id_;
            reference_smiles_ = o.reference_smiles_;
            reference_molecule_ = o.reference_molecule_;
            params_ = o.params_;
            invalidate();
        }
        return *this;
    }

private:
    void set_reference(const Fluid& reference) {
        if (!reference.molecule) throw InputError("reference fluid '" + reference.id + "' has no molecule");
        reference_id_ = reference.id;
        reference_smiles_ = reference.smiles;
        reference_molecule_ = *reference.molecule;
    }

    void invalidate() {
        std::lock_guard lk(cache_mutex_);
        r_ref_.reset();
    }

    template <typename T> static T tanh_(const T& x) {
        using std::tanh;
        using ad::tanh;
        return tanh(x);
    }

    template <typename T>
    std::vector<T> residual_block(const std::vector<T>& x, const std::string& name) const {
        const int W = cfg_.width;
        const auto& Wa = params_[name + ".W1"];
        const auto& ba = params_[name + ".b1"];
        const auto& Wb = params_[name + ".W2"];
        const auto& bb = params_[name + ".b2"];
        std::vector<T> a(W);
        for (int j = 0; j < W; ++j) {
            T u = T(ba(0, j));
            for (int k = 0; k < W; ++k) u = u + x[k] * Wa(k, j);
            a[j] = tanh_(u);
        }
        std::vector<T> y(W);
        for (int j = 0; j < W; ++j) {
            T v = x[j] + bb(0, j);
            for (int k = 0; k < W; ++k) v = v + a[k] * Wb(k, j);
            y[j] = v;
        }
        return y;
    }

    NeuralConfig cfg_{};
    std::uint64_t seed_ = 0;
    std::string reference_id_;
    std::string reference_smiles_;
    MoleculeGraph reference_molecule_;
    ad::ParamSet params_;
    mutable std::mutex cache_mutex_;
    mutable std::optional<Eigen::RowVectorXd> r_ref_;
};

inline void save_checkpoint(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write checkpoint '" + path + "'");
    out << j.dump(1) << '\n';
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("'" + path + "': " + e.what());
    }
}

/// A trained neural model bound to one target fluid (similarity vector cached).
class NeuralShape final : public ShapeFactorModel {
public:
    NeuralShape(std::shared_ptr<const NeuralShapeModel> model, const Fluid& target) : model_(std::move(model)) {
        if (!target.molecule) throw InputError("neural shape factors need a molecule for '" + target.id + "'");
        s_ = model_->similarity_for(*target.molecule);
    }
    NeuralShape(std::shared_ptr<const NeuralShapeModel> model, Eigen::RowVectorXd s)
        : model_(std::move(model)), s_(std::move(s)) {}

    std::string name() const override { return "nn-ecs"; }
    ShapeFactorEval eval(double tr, double rhor) const override { return model_->eval(tr, rhor, s_); }
    const Eigen::RowVectorXd& s() const { return s_; }
    const NeuralShapeModel& model() const { return *model_; }

private:
    std::shared_ptr<const NeuralShapeModel> model_;
    Eigen::RowVectorXd s_;
};

} // namespace ecslab
