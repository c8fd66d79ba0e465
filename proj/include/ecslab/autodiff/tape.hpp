#pragma once

// Reverse-mode differentiation over a recorded list of matrix-valued nodes.
//
// Every node holds a dense matrix value. Binary elementwise operations
// broadcast operands whose row or column count is 1. Gradients of state
// derivatives (needed when a loss contains d(theta)/d(tr)) are obtained by
// writing the tangent propagation itself with tape operations, so reverse mode
// differentiates through it.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ecslab/errors.hpp"
#include "ecslab/numerics.hpp"

namespace ecslab::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Mat& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
};

class Tape {
public:
    using Backward = std::function<void(Tape&, const Mat& grad_out)>;

    Var constant(Mat value) { return push(std::move(value), false, nullptr); }
    Var leaf(Mat value) { return push(std::move(value), true, nullptr); }

    /// Records a node; `backward` is only kept when some input needs gradients.
    Var record(Mat value, std::initializer_list<Var> inputs, Backward backward) {
        bool needs = false;
        for (const Var& v : inputs) needs = needs || nodes_[v.id].requires_grad;
        return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
    }
    Var record(Mat value, const std::vector<Var>& inputs, Backward backward) {
        bool needs = false;
        for (const Var& v : inputs) needs = needs || nodes_[v.id].requires_grad;
        return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
    }

    const Mat& value(int id) const { return nodes_[id].value; }
    bool requires_grad(int id) const { return nodes_[id].requires_grad; }

    /// Adds `g` into the gradient of node `id` (no-op for constants).
    void accumulate(int id, const Mat& g) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) n.grad = g;
        else n.grad += g;
    }

    /// Gradient of the 1x1 node `loss` with respect to every recorded node.
    void backward(Var loss) {
        if (loss.rows() != 1 || loss.cols() != 1) throw InputError("backward needs a scalar output");
        for (auto& n : nodes_) n.grad.resize(0, 0);
        nodes_[loss.id].grad = Mat::Ones(1, 1);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.backward || n.grad.size() == 0) continue;
            n.backward(*this, n.grad);
        }
    }

    /// Zero matrix of the right shape when nothing flowed into the node.
    Mat grad(Var v) const {
        const Node& n = nodes_[v.id];
        if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        bool requires_grad = false;
        Backward backward;
    };

    Var push(Mat value, bool requires_grad, Backward backward) {
        nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(backward)});
        return Var{this, static_cast<int>(nodes_.size() - 1)};
    }

    std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return tape->value(id); }

namespace detail {

inline Eigen::Index bdim(Eigen::Index a, Eigen::Index b, const char* op) {
    if (a == b || b == 1) return a;
    if (a == 1) return b;
    throw InputError(std::string("shape mismatch in ") + op);
}

/// Expands `m` to rows x cols by repeating singleton dimensions.
inline Mat expand(const Mat& m, Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() == rows && m.cols() == cols) return m;
    return m.replicate(rows / m.rows(), cols / m.cols());
}

/// Sums `g` down to the shape of an operand that was broadcast.
inline Mat reduce_to(const Mat& g, Eigen::Index rows, Eigen::Index cols) {
    Mat r = g;
    if (rows == 1 && r.rows() != 1) r = r.colwise().sum().eval();
    if (cols == 1 && r.cols() != 1) r = r.rowwise().sum().eval();
    return r;
}

template <typename Fwd, typename DA, typename DB>
Var binary(Var a, Var b, const char* name, Fwd fwd, DA da, DB db) {
    const Mat& A = a.value();
    const Mat& B = b.value();
    const auto r = bdim(A.rows(), B.rows(), name), c = bdim(A.cols(), B.cols(), name);
    Mat Ae = expand(A, r, c), Be = expand(B, r, c);
    Mat out = fwd(Ae, Be);
    const auto ar = A.rows(), ac = A.cols(), br = B.rows(), bc = B.cols();
    return a.tape->record(std::move(out), {a, b}, [a, b, Ae, Be, ar, ac, br, bc, da, db](Tape& t, const Mat& g) {
        if (t.requires_grad(a.id)) t.accumulate(a.id, reduce_to(da(g, Ae, Be), ar, ac));
        if (t.requires_grad(b.id)) t.accumulate(b.id, reduce_to(db(g, Ae, Be), br, bc));
    });
}

} // namespace detail

inline Var add(Var a, Var b) {
    return detail::binary(
        a, b, "add", [](const Mat& A, const Mat& B) { return Mat(A + B); },
        [](const Mat& g, const Mat&, const Mat&) { return g; }, [](const Mat& g, const Mat&, const Mat&) { return g; });
}
inline Var sub(Var a, Var b) {
    return detail::binary(
        a, b, "sub", [](const Mat& A, const Mat& B) { return Mat(A - B); },
        [](const Mat& g, const Mat&, const Mat&) { return g; },
        [](const Mat& g, const Mat&, const Mat&) { return Mat(-g); });
}
inline Var mul(Var a, Var b) {
    return detail::binary(
        a, b, "mul", [](const Mat& A, const Mat& B) { return Mat(A.cwiseProduct(B)); },
        [](const Mat& g, const Mat&, const Mat& B) { return Mat(g.cwiseProduct(B)); },
        [](const Mat& g, const Mat& A, const Mat&) { return Mat(g.cwiseProduct(A)); });
}
inline Var div(Var a, Var b) {
    return detail::binary(
        a, b, "div", [](const Mat& A, const Mat& B) { return Mat(A.cwiseQuotient(B)); },
        [](const Mat& g, const Mat&, const Mat& B) { return Mat(g.cwiseQuotient(B)); },
        [](const Mat& g, const Mat& A, const Mat& B) { return Mat(-g.cwiseProduct(A).cwiseQuotient(B.cwiseProduct(B))); });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }

inline Var scale(Var a, double c) {
    return a.tape->record(a.value() * c, {a}, [a, c](Tape& t, const Mat& g) { t.accumulate(a.id, g * c); });
}
inline Var add_scalar(Var a, double c) {
    return a.tape->record((a.value().array() + c).matrix(), {a}, [a](Tape& t, const Mat& g) { t.accumulate(a.id, g); });
}
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }
inline Var operator+(double c, Var a) { return add_scalar(a, c); }
inline Var operator-(Var a, double c) { return add_scalar(a, -c); }
inline Var operator-(double c, Var a) { return add_scalar(scale(a, -1.0), c); }
inline Var operator-(Var a) { return scale(a, -1.0); }

/// Dense product via Eigen's blocked kernels.
inline Var matmul(Var a, Var b) {
    Mat out = a.value() * b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
        if (t.requires_grad(a.id)) t.accumulate(a.id, g * b.value().transpose());
        if (t.requires_grad(b.id)) t.accumulate(b.id, a.value().transpose() * g);
    });
}

/// Product with a fixed left-to-right accumulation per output entry, so each
/// output row depends only on the matching input row (bitwise stable under row
/// permutations).
inline Var matmul_rowwise(Var a, Var b) {
    const Mat& A = a.value();
    const Mat& B = b.value();
    if (A.cols() != B.rows()) throw InputError("shape mismatch in matmul_rowwise");
    Mat out(A.rows(), B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.cols(); ++j) {
            double s = 0;
            for (Eigen::Index k = 0; k < A.cols(); ++k) s += A(i, k) * B(k, j);
            out(i, j) = s;
        }
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
        if (t.requires_grad(a.id)) t.accumulate(a.id, g * b.value().transpose());
        if (t.requires_grad(b.id)) t.accumulate(b.id, a.value().transpose() * g);
    });
}

template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
    Mat x = a.value();
    Mat y = x.unaryExpr(f);
    return a.tape->record(y, {a}, [a, x, y, dfdx](Tape& t, const Mat& g) {
        Mat d(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) d(i) = dfdx(x(i), y(i));
        t.accumulate(a.id, g.cwiseProduct(d));
    });
}

inline Var tanh(Var a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}
inline Var exp(Var a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
inline Var log(Var a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
inline Var sqrt(Var a) {
    return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}
inline Var square(Var a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2 * x; });
}
inline Var softplus(Var a) {
    return unary(
        a, [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
        [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}
/// Loss-only primitive; the subgradient at 0 is taken as 0.
inline Var abs(Var a) {
    return unary(a, [](double x) { return std::abs(x); }, [](double x, double) { return double((x > 0) - (x < 0)); });
}

inline Var col_slice(Var a, Eigen::Index start, Eigen::Index n) {
    Mat out = a.value().middleCols(start, n);
    const auto rows = a.rows(), cols = a.cols();
    return a.tape->record(std::move(out), {a}, [a, start, n, rows, cols](Tape& t, const Mat& g) {
        Mat full = Mat::Zero(rows, cols);
        full.middleCols(start, n) = g;
        t.accumulate(a.id, full);
    });
}

inline Var hcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw InputError("hcat of nothing");
    const auto rows = parts[0].rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw InputError("hcat row mismatch");
        cols += p.cols();
    }
    Mat out(rows, cols);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    return parts[0].tape->record(std::move(out), parts, [parts](Tape& t, const Mat& g) {
        Eigen::Index c0 = 0;
        for (const auto& p : parts) {
            if (t.requires_grad(p.id)) t.accumulate(p.id, g.middleCols(c0, p.cols()));
            c0 += p.cols();
        }
    });
}

/// out.row(i) = a.row(idx[i]).
inline Var gather_rows(Var a, std::vector<int> idx) {
    const Mat& A = a.value();
    Mat out(static_cast<Eigen::Index>(idx.size()), A.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = A.row(idx[i]);
    const auto rows = A.rows(), cols = A.cols();
    return a.tape->record(std::move(out), {a}, [a, idx, rows, cols](Tape& t, const Mat& g) {
        Mat full = Mat::Zero(rows, cols);
        for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(i);
        t.accumulate(a.id, full);
    });
}

/// out.row(s) = sum of a.row(i) over rows with seg[i] == s. Each sum is
/// order-free, so permuting the rows of `a` together with `seg` gives a
/// bitwise identical result.
inline Var segment_sum(Var a, std::vector<int> seg, int n_segments) {
    const Mat& A = a.value();
    Mat out = Mat::Zero(n_segments, A.cols());
    std::vector<std::vector<double>> bucket(n_segments);
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
        for (auto& b : bucket) b.clear();
        for (Eigen::Index i = 0; i < A.rows(); ++i) bucket[seg[i]].push_back(A(i, c));
        for (int s = 0; s < n_segments; ++s) out(s, c) = numerics::order_free_sum(bucket[s]);
    }
    return a.tape->record(std::move(out), {a}, [a, seg](Tape& t, const Mat& g) {
        Mat full(static_cast<Eigen::Index>(seg.size()), g.cols());
        for (std::size_t i = 0; i < seg.size(); ++i) full.row(i) = g.row(seg[i]);
        t.accumulate(a.id, full);
    });
}

/// n x 1 column of row sums (columns summed left to right).
inline Var row_sum(Var a) {
    Mat out = a.value().rowwise().sum();
    const auto cols = a.cols();
    return a.tape->record(std::move(out), {a}, [a, cols](Tape& t, const Mat& g) { t.accumulate(a.id, g.replicate(1, cols)); });
}

/// 1x1 sum of all entries, order-free.
inline Var sum(Var a) {
    const Mat& A = a.value();
    Mat out(1, 1);
    out(0, 0) = numerics::order_free_sum(std::vector<double>(A.data(), A.data() + A.size()));
    const auto rows = A.rows(), cols = A.cols();
    return a.tape->record(std::move(out), {a}, [a, rows, cols](Tape& t, const Mat& g) {
        t.accumulate(a.id, Mat::Constant(rows, cols, g(0, 0)));
    });
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

/// Softmax of a column vector within each segment. The per-segment maximum is
/// subtracted as a constant, which leaves both values and gradients unchanged.
inline Var segment_softmax(Var scores, const std::vector<int>& seg, int n_segments) {
    Tape& t = *scores.tape;
    const Mat& S = scores.value();
    Mat shift(S.rows(), 1);
    std::vector<double> mx(n_segments, -std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < S.rows(); ++i) mx[seg[i]] = std::max(mx[seg[i]], S(i, 0));
    for (Eigen::Index i = 0; i < S.rows(); ++i) shift(i, 0) = mx[seg[i]];
    Var e = exp(sub(scores, t.constant(shift)));
    Var denom = segment_sum(e, seg, n_segments);
    return div(e, gather_rows(denom, seg));
}

// ---------------------------------------------------------------------------
// Parameters

struct Param {
    std::string name;
    Mat value;
};

/// Ordered, named parameter matrices with a flat-vector view.
class ParamSet {
public:
    void add(std::string name, Mat value) { params_.push_back({std::move(name), std::move(value)}); }

    std::vector<Param>& items() { return params_; }
    const std::vector<Param>& items() const { return params_; }

    Mat& operator[](const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return p.value;
        throw InputError("unknown parameter '" + name + "'");
    }
    const Mat& operator[](const std::string& name) const {
        for (const auto& p : params_)
            if (p.name == name) return p.value;
        throw InputError("unknown parameter '" + name + "'");
    }

    Eigen::Index size() const {
        Eigen::Index n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    Vec flatten() const {
        Vec v(size());
        Eigen::Index k = 0;
        for (const auto& p : params_) {
            v.segment(k, p.value.size()) = Eigen::Map<const Vec>(p.value.data(), p.value.size());
            k += p.value.size();
        }
        return v;
    }

    void unflatten(const Vec& v) {
        if (v.size() != size()) throw InputError("parameter vector has the wrong length");
        Eigen::Index k = 0;
        for (auto& p : params_) {
            Eigen::Map<Vec>(p.value.data(), p.value.size()) = v.segment(k, p.value.size());
            k += p.value.size();
        }
    }

    /// Leaves on `tape` in parameter order.
    std::vector<Var> bind(Tape& tape) const {
        std::vector<Var> out;
        out.reserve(params_.size());
        for (const auto& p : params_) out.push_back(tape.leaf(p.value));
        return out;
    }

private:
    std::vector<Param> params_;
};

/// Parameters bound to one tape, looked up by name.
class BoundParams {
public:
    BoundParams(const ParamSet& ps, std::vector<Var> leaves) : ps_(&ps), leaves_(std::move(leaves)) {}
    BoundParams(Tape& tape, const ParamSet& ps) : BoundParams(ps, ps.bind(tape)) {}

    Var operator[](const std::string& name) const {
        const auto& items = ps_->items();
        for (std::size_t i = 0; i < items.size(); ++i)
            if (items[i].name == name) return leaves_[i];
        throw InputError("unknown parameter '" + name + "'");
    }
    const std::vector<Var>& leaves() const { return leaves_; }

private:
    const ParamSet* ps_;
    std::vector<Var> leaves_;
};

/// Gradient of a scalar loss with respect to every parameter, flattened in
/// ParamSet order. `loss_forward(tape, leaves)` must return a 1x1 Var.
template <typename F>
std::pair<double, Vec> grad_params(F&& loss_forward, const ParamSet& params) {
    Tape tape;
    auto leaves = params.bind(tape);
    Var loss = loss_forward(tape, leaves);
    tape.backward(loss);
    Vec g(params.size());
    Eigen::Index k = 0;
    for (const auto& leaf : leaves) {
        Mat gl = tape.grad(leaf);
        g.segment(k, gl.size()) = Eigen::Map<const Vec>(gl.data(), gl.size());
        k += gl.size();
    }
    return {loss.scalar(), g};
}

} // namespace ecslab::ad
