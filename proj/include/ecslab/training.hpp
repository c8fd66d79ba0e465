#pragma once

// Pretraining, main training and leave-one-fluid-out cross-validation of the
// neural shape-factor model.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecslab/autodiff/tape.hpp"
#include "ecslab/core.hpp"
#include "ecslab/dataset.hpp"
#include "ecslab/ecs.hpp"
#include "ecslab/evaluation.hpp"
#include "ecslab/gnn.hpp"
#include "ecslab/helmholtz.hpp"
#include "ecslab/log.hpp"
#include "ecslab/parallel.hpp"
#include "ecslab/random.hpp"
#include "ecslab/shapefactor.hpp"

namespace ecslab {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    int pretrain_epochs = 2000;
    int main_epochs = 20000;
    int plateau_epochs = 500;       ///< main training stops after this many epochs without improvement
    double plateau_rel = 1e-6;      ///< relative improvement that counts
    double pretrain_target = 1e-3;  ///< max |theta - 1|, |phi - 1| over the grid
    int pretrain_patience = 100;    ///< epochs without a new best loss before the step size halves
    double min_learning_rate = 1e-7;
    std::uint64_t seed = 42;
    std::array<double, 3> weights{1.0, 1.0, 1.0}; ///< alpha_r, Z_r, u_r terms
    int log_every = 0;              ///< progress line period in epochs; 0 = silent
    int jobs = 1;                   ///< concurrent folds
    NeuralConfig net{};

    void validate() const {
        if (!(learning_rate > 0)) throw InputError("learning rate must be positive");
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw InputError("moment coefficients must lie in [0, 1)");
        if (pretrain_epochs < 0 || main_epochs < 0 || plateau_epochs < 1) throw InputError("epoch counts must be positive");
    }

    nlohmann::json to_json() const {
        return {{"learning_rate", learning_rate},
                {"beta1", beta1},
                {"beta2", beta2},
                {"epsilon", epsilon},
                {"pretrain_epochs", pretrain_epochs},
                {"main_epochs", main_epochs},
                {"plateau_epochs", plateau_epochs},
                {"plateau_rel", plateau_rel},
                {"pretrain_target", pretrain_target},
                {"pretrain_patience", pretrain_patience},
                {"min_learning_rate", min_learning_rate},
                {"seed", seed},
                {"weights", weights},
                {"log_every", log_every},
                {"jobs", jobs},
                {"width", net.width},
                {"gnn_hidden", net.gnn.hidden},
                {"gnn_out", net.gnn.out},
                {"gnn_layers", net.gnn.layers}};
    }

    /// Keys absent from `j` keep their defaults; unknown keys are rejected.
    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        const auto known = c.to_json();
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!known.contains(it.key())) throw SchemaError("unknown training config key '" + it.key() + "'");
        try {
            auto get = [&](const char* k, auto& v) {
                if (j.contains(k)) v = j.at(k).get<std::decay_t<decltype(v)>>();
            };
            get("learning_rate", c.learning_rate);
            get("beta1", c.beta1);
            get("beta2", c.beta2);
            get("epsilon", c.epsilon);
            get("pretrain_epochs", c.pretrain_epochs);
            get("main_epochs", c.main_epochs);
            get("plateau_epochs", c.plateau_epochs);
            get("plateau_rel", c.plateau_rel);
            get("pretrain_target", c.pretrain_target);
            get("pretrain_patience", c.pretrain_patience);
            get("min_learning_rate", c.min_learning_rate);
            get("seed", c.seed);
            get("weights", c.weights);
            get("log_every", c.log_every);
            get("jobs", c.jobs);
            get("width", c.net.width);
            get("gnn_hidden", c.net.gnn.hidden);
            get("gnn_out", c.net.gnn.out);
            get("gnn_layers", c.net.gnn.layers);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("bad training config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

class Adam {
public:
    Adam(Eigen::Index n, double lr, double b1, double b2, double eps)
        : lr_(lr), b1_(b1), b2_(b2), eps_(eps), m_(ad::Vec::Zero(n)), v_(ad::Vec::Zero(n)) {}

    void step(ad::Vec& x, const ad::Vec& g) {
        ++t_;
        m_ = b1_ * m_ + (1 - b1_) * g;
        v_ = b2_ * v_ + (1 - b2_) * g.cwiseProduct(g);
        const double c1 = 1 - std::pow(b1_, t_), c2 = 1 - std::pow(b2_, t_);
        x.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_, b1_, b2_, eps_;
    ad::Vec m_, v_;
    int t_ = 0;
};

// ---------------------------------------------------------------------------
// Training data

/// One fluid's grid in the layout the loss consumes.
struct TrainingFluid {
    Fluid fluid;
    GraphTensors graph;
    ad::Mat tr_rhor;                       ///< N x 2
    std::vector<double> t, rho;            ///< K, mol/L
    std::vector<double> alpha, z, u;       ///< truth residuals
    std::uint64_t data_hash = 0;
};

inline TrainingFluid prepare_fluid(const Fluid& fluid, const FluidDataset& ds) {
    if (!fluid.molecule) throw InputError("fluid '" + fluid.id + "' has no molecule; it cannot enter training");
    if (ds.points.empty()) throw InputError("fluid '" + fluid.id + "' has no data points");
    TrainingFluid tf;
    tf.fluid = fluid;
    tf.graph = graph_tensors(*fluid.molecule);
    const auto n = static_cast<Eigen::Index>(ds.points.size());
    tf.tr_rhor.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& pt = ds.points[i];
        tf.tr_rhor(i, 0) = pt.state.t / fluid.crit.tc;
        tf.tr_rhor(i, 1) = pt.state.rho / fluid.crit.rhoc;
        tf.t.push_back(pt.state.t);
        tf.rho.push_back(pt.state.rho);
        tf.alpha.push_back(pt.truth.alpha_r);
        tf.z.push_back(pt.truth.z_r);
        tf.u.push_back(pt.truth.u_r);
    }
    tf.data_hash = dataset_hash(ds);
    return tf;
}

inline std::vector<TrainingFluid> prepare_corpus(const Corpus& corpus, const FluidRegistry& registry) {
    std::vector<TrainingFluid> out;
    for (const auto& ds : corpus.fluids) out.push_back(prepare_fluid(registry.at(ds.fluid_id), ds));
    return out;
}

// ---------------------------------------------------------------------------
// Losses

/// |d alpha| + |d Z| + |d u| between predicted and truth residuals.
inline double point_loss(const ResidualSet& pred, const ResidualSet& truth, const std::array<double, 3>& w = {1, 1, 1}) {
    return w[0] * std::abs(pred.alpha_r - truth.alpha_r) + w[1] * std::abs(pred.z_r - truth.z_r) +
           w[2] * std::abs(pred.u_r - truth.u_r);
}

/// Mean over one fluid's points of the ECS-mapped residual error. Inputs are
/// the six N x 1 shape-factor columns; the reference surface enters as a
/// constant, with hand-coded partials of (alpha, Z, u) at the mapped state.
inline ad::Var ecs_fluid_loss(const NeuralShapeModel::TapeOutputs& o, const TrainingFluid& tf, const HelmholtzModel& ref,
                              const std::array<double, 3>& w) {
    using ad::Mat;
    const auto& eos = ref.eos();
    const auto& co = ref.fluid().crit;
    const auto& cj = tf.fluid.crit;
    const double kf = cj.tc / co.tc, kh = co.rhoc / cj.rhoc;
    const Eigen::Index n = o.theta.rows();
    const Mat &TH = o.theta.value(), &PH = o.phi.value(), &THt = o.theta_tr.value(), &THr = o.theta_rhor.value(),
              &PHt = o.phi_tr.value(), &PHr = o.phi_rhor.value();
    Mat g(n, 6); // d(point loss)/d(theta, phi, theta_tr, theta_rhor, phi_tr, phi_rhor)
    std::vector<double> losses(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double th = TH(i, 0), ph = PH(i, 0);
        const double tr = tf.tr_rhor(i, 0), rr = tf.tr_rhor(i, 1);
        if (!(th > 0) || !(ph > 0)) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "%s point %ld (tr=%.6g, rhor=%.6g): theta=%.6g phi=%.6g",
                          tf.fluid.id.c_str(), static_cast<long>(i), tr, rr, th, ph);
            throw NonPositiveShapeFactor(buf);
        }
        const double tau = eos.t_red * kf * th / tf.t[i];
        const double delta = tf.rho[i] * kh * ph / eos.rho_red;
        const auto d = alpha_r_derivs(eos, tau, delta);
        const double ao = d.a, zo = delta * d.a_d, uo = tau * d.a_t;
        const double FT = tr * THt(i, 0) / th, Fr = rr * THr(i, 0) / th;
        const double HT = tr * PHt(i, 0) / ph, Hr = rr * PHr(i, 0) / ph;
        const double alpha = ao;
        const double z = uo * Fr + zo * (1 + Hr);
        const double u = uo * (1 - FT) - zo * HT;
        const double ea = alpha - tf.alpha[i], ez = z - tf.z[i], eu = u - tf.u[i];
        losses[i] = w[0] * std::abs(ea) + w[1] * std::abs(ez) + w[2] * std::abs(eu);
        if (!std::isfinite(losses[i])) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "non-finite loss at %s point %ld (T=%.6g K, rho=%.6g mol/L)",
                          tf.fluid.id.c_str(), static_cast<long>(i), tf.t[i], tf.rho[i]);
            throw NonFiniteLoss(buf);
        }
        const double sa = w[0] * ((ea > 0) - (ea < 0)), sz = w[1] * ((ez > 0) - (ez < 0)), su = w[2] * ((eu > 0) - (eu < 0));
        // reference residuals w.r.t. theta (through tau) and phi (through delta)
        const double dao_th = d.a_t * tau / th, dao_ph = d.a_d * delta / ph;
        const double dzo_th = delta * d.a_td * tau / th, dzo_ph = (d.a_d + delta * d.a_dd) * delta / ph;
        const double duo_th = (d.a_t + tau * d.a_tt) * tau / th, duo_ph = tau * d.a_td * delta / ph;
        const double dz_th = duo_th * Fr - uo * Fr / th + dzo_th * (1 + Hr);
        const double dz_ph = duo_ph * Fr + dzo_ph * (1 + Hr) - zo * Hr / ph;
        const double du_th = duo_th * (1 - FT) + uo * FT / th - dzo_th * HT;
        const double du_ph = duo_ph * (1 - FT) - dzo_ph * HT + zo * HT / ph;
        g(i, 0) = sa * dao_th + sz * dz_th + su * du_th;
        g(i, 1) = sa * dao_ph + sz * dz_ph + su * du_ph;
        g(i, 2) = su * (-uo * tr / th);
        g(i, 3) = sz * (uo * rr / th);
        g(i, 4) = su * (-zo * tr / ph);
        g(i, 5) = sz * (zo * rr / ph);
    }
    Mat out(1, 1);
    out(0, 0) = numerics::compensated_sum(losses) / static_cast<double>(n);
    const std::vector<ad::Var> in{o.theta, o.phi, o.theta_tr, o.theta_rhor, o.phi_tr, o.phi_rhor};
    return o.theta.tape->record(std::move(out), in, [in, g, n](ad::Tape& t, const Mat& go) {
        const double s = go(0, 0) / static_cast<double>(n);
        for (int c = 0; c < 6; ++c) t.accumulate(in[c].id, s * g.col(c));
    });
}

namespace detail {

/// Similarity rows of every fluid on `tape`, sharing one reference embedding.
inline std::vector<ad::Var> similarity_rows(ad::Tape& tape, const ad::BoundParams& p, const NeuralShapeModel& model,
                                            const std::vector<TrainingFluid>& fluids) {
    const auto& cfg = model.config().gnn;
    ad::Var r_o = gnn_embed(tape, p, graph_tensors(model.reference_molecule()), cfg);
    std::vector<ad::Var> out;
    for (const auto& tf : fluids) out.push_back(similarity(r_o, gnn_embed(tape, p, tf.graph, cfg)));
    return out;
}

inline ad::Var mean_over_fluids(const std::vector<ad::Var>& per_fluid) {
    ad::Var total = per_fluid.front();
    for (std::size_t k = 1; k < per_fluid.size(); ++k) total = ad::add(total, per_fluid[k]);
    return ad::scale(total, 1.0 / static_cast<double>(per_fluid.size()));
}

inline double max_unit_deviation(const NeuralShapeModel::TapeOutputs& o) {
    return std::max((o.theta.value().array() - 1).abs().maxCoeff(), (o.phi.value().array() - 1).abs().maxCoeff());
}

} // namespace detail

/// Mean over fluids of the per-fluid ECS loss, recorded on `tape`.
inline ad::Var ecs_loss(ad::Tape& tape, const ad::BoundParams& p, const NeuralShapeModel& model,
                        const std::vector<TrainingFluid>& fluids, const HelmholtzModel& ref,
                        const std::array<double, 3>& w = {1, 1, 1}) {
    if (fluids.empty()) throw InputError("training corpus is empty");
    const auto s = detail::similarity_rows(tape, p, model, fluids);
    std::vector<ad::Var> per;
    for (std::size_t k = 0; k < fluids.size(); ++k)
        per.push_back(ecs_fluid_loss(model.forward_tape(tape, p, fluids[k].tr_rhor, s[k]), fluids[k], ref, w));
    return detail::mean_over_fluids(per);
}

/// Loss value and flattened parameter gradient at the model's parameters.
inline std::pair<double, ad::Vec> ecs_loss_and_grad(const NeuralShapeModel& model, const std::vector<TrainingFluid>& fluids,
                                                    const HelmholtzModel& ref, const std::array<double, 3>& w = {1, 1, 1}) {
    return ad::grad_params(
        [&](ad::Tape& tape, const std::vector<ad::Var>& leaves) {
            return ecs_loss(tape, ad::BoundParams(model.params(), leaves), model, fluids, ref, w);
        },
        model.params());
}

/// Mean over fluids and points of |theta - 1| + |phi - 1|; also reports the
/// largest single deviation.
struct PretrainEval {
    double loss = 0, max_deviation = 0;
    ad::Vec grad;
};

inline PretrainEval pretrain_loss_and_grad(const NeuralShapeModel& model, const std::vector<TrainingFluid>& fluids) {
    if (fluids.empty()) throw InputError("training corpus is empty");
    PretrainEval ev;
    auto [loss, grad] = ad::grad_params(
        [&](ad::Tape& tape, const std::vector<ad::Var>& leaves) {
            ad::BoundParams p(model.params(), leaves);
            const auto s = detail::similarity_rows(tape, p, model, fluids);
            std::vector<ad::Var> per;
            for (std::size_t k = 0; k < fluids.size(); ++k) {
                const auto o = model.forward_tape(tape, p, fluids[k].tr_rhor, s[k], false);
                ev.max_deviation = std::max(ev.max_deviation, detail::max_unit_deviation(o));
                per.push_back(ad::add(ad::mean(ad::abs(o.theta - 1.0)), ad::mean(ad::abs(o.phi - 1.0))));
            }
            return detail::mean_over_fluids(per);
        },
        model.params());
    ev.loss = loss;
    ev.grad = std::move(grad);
    return ev;
}

/// Largest |theta - 1| or |phi - 1| of the model over the fluids' grids.
inline double max_shape_deviation(const NeuralShapeModel& model, const std::vector<TrainingFluid>& fluids) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const auto& prm : model.params().items()) leaves.push_back(tape.constant(prm.value));
    ad::BoundParams p(model.params(), leaves);
    const auto s = detail::similarity_rows(tape, p, model, fluids);
    double m = 0;
    for (std::size_t k = 0; k < fluids.size(); ++k)
        m = std::max(m, detail::max_unit_deviation(model.forward_tape(tape, p, fluids[k].tr_rhor, s[k], false)));
    return m;
}

struct PretrainResult {
    double loss = 0, max_deviation = 0;
    int epochs = 0;
};

/// Drives theta and phi to 1 on the grid. Stops as soon as the largest
/// deviation reaches the target; the step size halves whenever the loss
/// stalls for `pretrain_patience` epochs.
inline PretrainResult pretrain(NeuralShapeModel& model, const std::vector<TrainingFluid>& fluids, const TrainConfig& cfg) {
    cfg.validate();
    ad::Vec x = model.params().flatten();
    Adam opt(x.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    PretrainResult res;
    for (int epoch = 0;; ++epoch) {
        model.params().unflatten(x);
        const auto ev = pretrain_loss_and_grad(model, fluids);
        res = {ev.loss, ev.max_deviation, epoch};
        if (!std::isfinite(ev.loss)) throw NonFiniteLoss("pretraining loss is not finite");
        if (ev.max_deviation <= cfg.pretrain_target) return res;
        if (epoch >= cfg.pretrain_epochs) break;
        if (cfg.log_every > 0 && epoch % cfg.log_every == 0)
            log::info("pretrain epoch " + std::to_string(epoch) + " loss " + std::to_string(ev.loss) + " max_dev " +
                      std::to_string(ev.max_deviation));
        if (ev.loss < best_loss) {
            best_loss = ev.loss;
            since_best = 0;
        } else if (++since_best >= cfg.pretrain_patience) {
            opt.set_learning_rate(std::max(opt.learning_rate() * 0.5, cfg.min_learning_rate));
            since_best = 0;
        }
        opt.step(x, ev.grad);
    }
    throw ConvergenceFailure("pretraining stopped after " + std::to_string(cfg.pretrain_epochs) +
                             " epochs with loss " + std::to_string(res.loss) + " and max deviation " +
                             std::to_string(res.max_deviation));
}

struct TrainResult {
    double best_loss = 0;
    int best_epoch = 0, epochs = 0;
    double initial_loss = 0;
};

/// Adam on the ECS loss with best-so-far retention; the model ends at the
/// best parameters seen.
inline TrainResult train(NeuralShapeModel& model, const std::vector<TrainingFluid>& fluids, const HelmholtzModel& ref,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (const double dev = max_shape_deviation(model, fluids); dev > 0.05)
        log::warn("shape factors deviate from 1 by " + std::to_string(dev) +
                  " before training; an unpretrained start risks a training failure");
    ad::Vec x = model.params().flatten();
    ad::Vec best_x = x;
    Adam opt(x.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    TrainResult res;
    res.best_loss = std::numeric_limits<double>::infinity();
    double plateau_ref = std::numeric_limits<double>::infinity();
    int last_improve = 0;
    for (int epoch = 0; epoch <= cfg.main_epochs; ++epoch) {
        model.params().unflatten(x);
        auto [loss, grad] = ecs_loss_and_grad(model, fluids, ref, cfg.weights);
        if (!std::isfinite(loss)) throw NonFiniteLoss("training loss is not finite at epoch " + std::to_string(epoch));
        if (epoch == 0) res.initial_loss = loss;
        res.epochs = epoch;
        if (loss < res.best_loss) {
            res.best_loss = loss;
            res.best_epoch = epoch;
            best_x = x;
        }
        if (loss < plateau_ref * (1 - cfg.plateau_rel)) {
            plateau_ref = loss;
            last_improve = epoch;
        } else if (epoch - last_improve >= cfg.plateau_epochs) {
            break;
        }
        if (cfg.log_every > 0 && epoch % cfg.log_every == 0)
            log::info("epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
        if (epoch == cfg.main_epochs) break;
        opt.step(x, grad);
    }
    model.params().unflatten(best_x);
    return res;
}

// ---------------------------------------------------------------------------
// Models and checkpoints

inline NamedModel nn_ecs_model(std::shared_ptr<const NeuralShapeModel> net, std::shared_ptr<const HelmholtzModel> ref,
                               std::string name = "nn-ecs") {
    return {std::move(name), [net, ref](const Fluid& f) -> PropertyModelPtr {
                return std::make_shared<EcsModel>(ref, f, std::make_shared<NeuralShape>(net, f));
            }};
}

inline std::string hex64(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::uint64_t training_set_hash(const std::vector<TrainingFluid>& fluids) {
    std::vector<std::uint64_t> hs;
    for (const auto& f : fluids) hs.push_back(f.data_hash);
    std::sort(hs.begin(), hs.end());
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto x : hs) h = fnv1a(hex64(x), h);
    return h;
}

inline nlohmann::json make_checkpoint(const NeuralShapeModel& model, const TrainConfig& cfg, std::uint64_t corpus_hash,
                                      const std::string& fold_tag) {
    auto j = model.to_json();
    j["seed"] = model.seed();
    j["config_echo"] = cfg.to_json();
    j["corpus_hash"] = hex64(corpus_hash);
    j["fold_tag"] = fold_tag;
    return j;
}

/// Fresh model, pretraining, then main training.
struct FitOutcome {
    NeuralShapeModel model;
    PretrainResult pre;
    TrainResult main;
};

inline FitOutcome fit_neural_model(const Fluid& reference_fluid, const HelmholtzModel& ref,
                                   const std::vector<TrainingFluid>& fluids, const TrainConfig& cfg, std::uint64_t seed) {
    FitOutcome out{NeuralShapeModel(reference_fluid, seed, cfg.net), {}, {}};
    out.pre = pretrain(out.model, fluids, cfg);
    out.main = train(out.model, fluids, ref, cfg);
    return out;
}

struct FullModel {
    nlohmann::json checkpoint;
    std::shared_ptr<const NeuralShapeModel> model;
    PretrainResult pre;
    TrainResult main;
};

/// Trains on every fluid of `corpus`; the checkpoint is tagged "full-data".
inline FullModel finalize_full_model(const Corpus& corpus, const FluidRegistry& registry,
                                     std::shared_ptr<const HelmholtzModel> ref, const TrainConfig& cfg) {
    const auto fluids = prepare_corpus(corpus, registry);
    auto fit = fit_neural_model(ref->fluid(), *ref, fluids, cfg, derive_seed(cfg.seed, "full-data"));
    FullModel out;
    out.checkpoint = make_checkpoint(fit.model, cfg, training_set_hash(fluids), "full-data");
    out.pre = fit.pre;
    out.main = fit.main;
    out.model = std::make_shared<const NeuralShapeModel>(std::move(fit.model));
    return out;
}

// ---------------------------------------------------------------------------
// Leave-one-fluid-out

struct FoldReport {
    std::string held_out;
    std::vector<std::string> training_ids;
    AadTable table;                    ///< held-out fluid, model "nn-ecs"
    double final_train_loss = 0;
    double wall_seconds = 0;           ///< not serialised, so reports stay reproducible
    std::string error;                 ///< empty when the fold succeeded
    std::string held_out_hash;
    std::vector<std::string> training_hashes;
    nlohmann::json checkpoint;

    nlohmann::json to_json() const {
        return {{"held_out", held_out},
                {"training_ids", training_ids},
                {"aad", table.to_json()},
                {"final_train_loss", final_train_loss},
                {"error", error},
                {"held_out_hash", held_out_hash},
                {"training_hashes", training_hashes}};
    }
};

struct LoocvOptions {
    std::vector<std::string> holdouts; ///< empty: every fluid in turn
    std::vector<std::string> properties{"density", "s_r", "h_r"};
    bool keep_checkpoints = true;
};

/// One fold per held-out fluid; each fold seeds from (config seed, held-out
/// id), so results do not depend on the order or concurrency of folds. A
/// failing fold is recorded and the others continue.
inline std::vector<FoldReport> loocv(const Corpus& corpus, const FluidRegistry& registry,
                                     std::shared_ptr<const HelmholtzModel> ref, const TrainConfig& cfg,
                                     const LoocvOptions& lo = {}) {
    if (corpus.fluids.size() < 2) throw InputError("cross-validation needs at least two fluids");
    std::vector<std::string> holdouts = lo.holdouts;
    if (holdouts.empty())
        for (const auto& d : corpus.fluids) holdouts.push_back(d.fluid_id);
    for (const auto& h : holdouts)
        if (!corpus.contains(h)) throw InputError("held-out fluid '" + h + "' not in corpus");

    return parallel_map<FoldReport>(holdouts.size(), cfg.jobs, [&](std::size_t k) {
        const auto t0 = std::chrono::steady_clock::now();
        FoldReport rep;
        rep.held_out = holdouts[k];
        try {
            Corpus train_corpus, test_corpus;
            for (const auto& d : corpus.fluids) {
                if (d.fluid_id == rep.held_out) test_corpus.add(d);
                else train_corpus.add(d);
            }
            const auto fluids = prepare_corpus(train_corpus, registry);
            rep.held_out_hash = hex64(dataset_hash(test_corpus.fluids.front()));
            for (const auto& f : fluids) {
                rep.training_ids.push_back(f.fluid.id);
                rep.training_hashes.push_back(hex64(f.data_hash));
                if (f.fluid.id == rep.held_out) throw InputError("held-out fluid leaked into its training set");
            }
            if (std::find(rep.training_hashes.begin(), rep.training_hashes.end(), rep.held_out_hash) !=
                rep.training_hashes.end())
                throw InputError("held-out data hash found in the training set of fold " + rep.held_out);
            auto fit = fit_neural_model(ref->fluid(), *ref, fluids, cfg, derive_seed(cfg.seed, "fold:" + rep.held_out));
            rep.final_train_loss = fit.main.best_loss;
            if (lo.keep_checkpoints)
                rep.checkpoint = make_checkpoint(fit.model, cfg, training_set_hash(fluids), "loocv:" + rep.held_out);
            auto net = std::make_shared<const NeuralShapeModel>(std::move(fit.model));
            ReportOptions ro;
            ro.properties = lo.properties;
            rep.table = property_report({nn_ecs_model(net, ref)}, test_corpus, registry, ro);
        } catch (const Error& e) {
            rep.error = std::string(e.kind()) + ": " + e.what();
            log::warn("fold " + rep.held_out + " failed: " + rep.error);
        }
        rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    });
}

} // namespace ecslab
