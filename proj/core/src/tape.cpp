#include "ccp/tape.hpp"

#include <cmath>
#include <string>

#include "ccp/errors.hpp"
#include "ccp/rng.hpp"

namespace ccp {

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::kLeaf: return "leaf";
        case OpKind::kMatmul: return "matmul";
        case OpKind::kTranspose: return "transpose";
        case OpKind::kAdd: return "add";
        case OpKind::kSub: return "sub";
        case OpKind::kMul: return "elementwise-mul";
        case OpKind::kDiv: return "elementwise-div";
        case OpKind::kScalarMul: return "scalar-mul";
        case OpKind::kAddScalar: return "add-scalar";
        case OpKind::kScaleBy: return "scale-by";
        case OpKind::kShiftBy: return "shift-by";
        case OpKind::kRowSoftmax: return "row-softmax";
        case OpKind::kSigmoid: return "sigmoid";
        case OpKind::kElu: return "elu";
        case OpKind::kExp: return "exp";
        case OpKind::kLog: return "log";
        case OpKind::kSumAll: return "sum-all";
        case OpKind::kSumRows: return "sum-rows";
        case OpKind::kClampMin: return "clamp-min";
        case OpKind::kPowNegHalf: return "pow(-1/2)";
        case OpKind::kZeroDiag: return "zero-diag";
        case OpKind::kDiagVec: return "diag-vec";
        case OpKind::kGatherRows: return "gather-rows";
        case OpKind::kGatherPairs: return "gather-pairs";
        case OpKind::kConcatRows: return "concat-rows";
        case OpKind::kScaleRows: return "scale-rows";
        case OpKind::kScaleCols: return "scale-cols";
        case OpKind::kAddRowVec: return "add-rowvec";
        case OpKind::kTileRows: return "tile-rows";
        case OpKind::kReshape: return "reshape";
        case OpKind::kDropout: return "dropout";
        case OpKind::kCrossEntropy: return "cross-entropy";
    }
    return "?";
}

namespace {

[[noreturn]] void shape_fail(OpKind op, const std::string& detail) {
    throw ShapeError(std::string(op_name(op)) + ": " + detail);
}

void require_2d(OpKind op, const Tensor& t, const char* which) {
    if (t.rank() != 2) {
        shape_fail(op, std::string(which) + " must be 2-d, got " + t.shape_str());
    }
}

Tape* same_tape(Var a, Var b) {
    if (a.tape != b.tape || a.tape == nullptr) {
        throw Error("operands belong to different tapes");
    }
    return a.tape;
}

}  // namespace

Var Tape::leaf(const Tensor& value, bool trainable) {
    Node n;
    n.op = OpKind::kLeaf;
    n.value = value;
    n.trainable_leaf = trainable;
    n.needs_grad = trainable;
    return emit(std::move(n));
}

Var Tape::emit(Node&& node) {
    if (node.op != OpKind::kLeaf) {
        bool needs = false;
        if (node.a >= 0) needs = needs || nodes_[node.a].needs_grad;
        if (node.b >= 0) needs = needs || nodes_[node.b].needs_grad;
        node.needs_grad = needs;
    }
    const int id = static_cast<int>(nodes_.size());
    if (check_finite_) check_node(node, id);
    nodes_.push_back(std::move(node));
    return Var{this, id};
}

void Tape::check_node(const Node& node, int id) const {
    if (!node.value.all_finite()) {
        throw NumericError("non-finite values in output of op '" +
                           std::string(op_name(node.op)) + "' (node " +
                           std::to_string(id) + ")");
    }
}

const Tensor& Tape::value(Var v) const { return nodes_[v.id].value; }

bool Tape::has_grad(Var v) const {
    return v.id < static_cast<int>(adjoints_.size()) &&
           adjoints_[v.id].size() > 0;
}

Tensor Tape::grad(Var v) const {
    if (!nodes_[v.id].needs_grad) {
        throw Error("grad requested for a non-trainable node (op '" +
                    std::string(op_name(nodes_[v.id].op)) + "')");
    }
    if (has_grad(v)) return adjoints_[v.id];
    return Tensor::zeros(nodes_[v.id].value.shape());
}

void Tape::backward(Var output) {
    if (output.tape != this) throw Error("backward: output from another tape");
    const Tensor& out = nodes_[output.id].value;
    if (!out.is_scalar()) {
        throw ShapeError("backward: output must be scalar, got " + out.shape_str());
    }

    adjoints_.assign(nodes_.size(), Tensor());
    adjoints_[output.id] = Tensor::scalar(1.0);

    auto adj_of = [&](int id) -> Tensor& {
        if (adjoints_[id].size() == 0) {
            adjoints_[id] = Tensor::zeros(nodes_[id].value.shape());
        }
        return adjoints_[id];
    };
    auto wants = [&](int id) { return id >= 0 && nodes_[id].needs_grad; };

    for (int id = output.id; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (!n.needs_grad || adjoints_[id].size() == 0) continue;
        const Tensor& g = adjoints_[id];

        switch (n.op) {
            case OpKind::kLeaf:
                break;

            case OpKind::kMatmul: {
                const Tensor& a = nodes_[n.a].value;
                const Tensor& b = nodes_[n.b].value;
                if (wants(n.a)) {
                    // dA = g * B^T
                    Tensor& da = adj_of(n.a);
                    const std::size_t m = a.rows(), k = a.cols(), c = b.cols();
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < c; ++j) {
                            const double gv = g.at(i, j);
                            if (gv == 0.0) continue;
                            for (std::size_t kk = 0; kk < k; ++kk) {
                                da.at(i, kk) += gv * b.at(kk, j);
                            }
                        }
                    }
                }
                if (wants(n.b)) {
                    // dB = A^T * g
                    Tensor& db = adj_of(n.b);
                    const std::size_t m = a.rows(), k = a.cols(), c = b.cols();
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t kk = 0; kk < k; ++kk) {
                            const double av = a.at(i, kk);
                            if (av == 0.0) continue;
                            for (std::size_t j = 0; j < c; ++j) {
                                db.at(kk, j) += av * g.at(i, j);
                            }
                        }
                    }
                }
                break;
            }

            case OpKind::kTranspose: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const std::size_t r = n.value.rows(), c = n.value.cols();
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                            da.at(j, i) += g.at(i, j);
                }
                break;
            }

            case OpKind::kAdd:
            case OpKind::kSub: {
                const double sign = n.op == OpKind::kAdd ? 1.0 : -1.0;
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                if (wants(n.b)) {
                    Tensor& db = adj_of(n.b);
                    for (std::size_t i = 0; i < g.size(); ++i) db[i] += sign * g[i];
                }
                break;
            }

            case OpKind::kMul: {
                const Tensor& a = nodes_[n.a].value;
                const Tensor& b = nodes_[n.b].value;
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b[i];
                }
                if (wants(n.b)) {
                    Tensor& db = adj_of(n.b);
                    for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a[i];
                }
                break;
            }

            case OpKind::kDiv: {
                const Tensor& a = nodes_[n.a].value;
                const Tensor& b = nodes_[n.b].value;
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] / b[i];
                }
                if (wants(n.b)) {
                    Tensor& db = adj_of(n.b);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        db[i] -= g[i] * a[i] / (b[i] * b[i]);
                }
                break;
            }

            case OpKind::kScalarMul: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += n.scalar * g[i];
                }
                break;
            }

            case OpKind::kAddScalar: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                break;
            }

            case OpKind::kScaleBy: {
                const Tensor& a = nodes_[n.a].value;
                const double s = nodes_[n.b].value[0];
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += s * g[i];
                }
                if (wants(n.b)) {
                    Tensor& ds = adj_of(n.b);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * a[i];
                    ds[0] += acc;
                }
                break;
            }

            case OpKind::kShiftBy: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                if (wants(n.b)) {
                    Tensor& ds = adj_of(n.b);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
                    ds[0] += acc;
                }
                break;
            }

            case OpKind::kRowSoftmax: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const Tensor& y = n.value;
                    const std::size_t r = y.rows(), c = y.cols();
                    for (std::size_t i = 0; i < r; ++i) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < c; ++j) dot += g.at(i, j) * y.at(i, j);
                        for (std::size_t j = 0; j < c; ++j)
                            da.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                    }
                }
                break;
            }

            case OpKind::kSigmoid: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const Tensor& y = n.value;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] += g[i] * y[i] * (1.0 - y[i]);
                }
                break;
            }

            case OpKind::kElu: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const Tensor& x = nodes_[n.a].value;
                    const Tensor& y = n.value;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] += g[i] * (x[i] > 0.0 ? 1.0 : y[i] + 1.0);
                }
                break;
            }

            case OpKind::kExp: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const Tensor& y = n.value;
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
                }
                break;
            }

            case OpKind::kLog: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const Tensor& x = nodes_[n.a].value;
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] / x[i];
                }
                break;
            }

            case OpKind::kSumAll: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const double gv = g[0];
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += gv;
                }
                break;
            }

            case OpKind::kSumRows: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const std::size_t r = da.rows(), c = da.cols();
                    for (std::size_t i = 0; i < r; ++i) {
                        const double gv = g[i];
                        for (std::size_t j = 0; j < c; ++j) da.at(i, j) += gv;
                    }
                }
                break;
            }

            case OpKind::kClampMin: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const Tensor& x = nodes_[n.a].value;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (x[i] >= n.scalar) da[i] += g[i];
                }
                break;
            }

            case OpKind::kPowNegHalf: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const Tensor& x = nodes_[n.a].value;
                    const Tensor& y = n.value;
                    // d/dx x^{-1/2} = -y / (2x)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] += g[i] * (-0.5) * y[i] / x[i];
                }
                break;
            }

            case OpKind::kZeroDiag: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const std::size_t r = da.rows();
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < r; ++j)
                            if (i != j) da.at(i, j) += g.at(i, j);
                }
                break;
            }

            case OpKind::kDiagVec: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const std::size_t r = da.rows();
                    for (std::size_t i = 0; i < r; ++i) da.at(i, i) += g[i];
                }
                break;
            }

            case OpKind::kGatherRows: {
                if (wants(n.a)) {
                    // scatter-add: duplicate indices accumulate
                    Tensor& da = adj_of(n.a);
                    const std::size_t c = da.cols();
                    for (std::size_t p = 0; p < n.idx.size(); ++p) {
                        const std::size_t src = n.idx[p];
                        for (std::size_t j = 0; j < c; ++j)
                            da.at(src, j) += g.at(p, j);
                    }
                }
                break;
            }

            case OpKind::kGatherPairs: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t p = 0; p < n.idx.size(); ++p)
                        da.at(n.idx[p], n.idx2[p]) += g[p];
                }
                break;
            }

            case OpKind::kConcatRows: {
                const std::size_t ra = nodes_[n.a].value.rows();
                const std::size_t c = nodes_[n.a].value.cols();
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < ra; ++i)
                        for (std::size_t j = 0; j < c; ++j) da.at(i, j) += g.at(i, j);
                }
                if (wants(n.b)) {
                    Tensor& db = adj_of(n.b);
                    const std::size_t rb = db.rows();
                    for (std::size_t i = 0; i < rb; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                            db.at(i, j) += g.at(ra + i, j);
                }
                break;
            }

            case OpKind::kScaleRows: {
                const Tensor& a = nodes_[n.a].value;
                const Tensor& s = nodes_[n.b].value;
                const std::size_t r = a.rows(), c = a.cols();
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < r; ++i) {
                        const double sv = s[i];
                        for (std::size_t j = 0; j < c; ++j)
                            da.at(i, j) += g.at(i, j) * sv;
                    }
                }
                if (wants(n.b)) {
                    Tensor& ds = adj_of(n.b);
                    for (std::size_t i = 0; i < r; ++i) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < c; ++j)
                            acc += g.at(i, j) * a.at(i, j);
                        ds[i] += acc;
                    }
                }
                break;
            }

            case OpKind::kScaleCols: {
                const Tensor& a = nodes_[n.a].value;
                const Tensor& s = nodes_[n.b].value;
                const std::size_t r = a.rows(), c = a.cols();
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                            da.at(i, j) += g.at(i, j) * s[j];
                }
                if (wants(n.b)) {
                    Tensor& ds = adj_of(n.b);
                    for (std::size_t j = 0; j < c; ++j) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < r; ++i)
                            acc += g.at(i, j) * a.at(i, j);
                        ds[j] += acc;
                    }
                }
                break;
            }

            case OpKind::kAddRowVec: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                if (wants(n.b)) {
                    Tensor& db = adj_of(n.b);
                    const std::size_t r = g.rows(), c = g.cols();
                    for (std::size_t j = 0; j < c; ++j) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < r; ++i) acc += g.at(i, j);
                        db[j] += acc;
                    }
                }
                break;
            }

            case OpKind::kTileRows: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const std::size_t block = da.size();
                    for (std::size_t t = 0; t < n.count; ++t)
                        for (std::size_t i = 0; i < block; ++i)
                            da[i] += g[t * block + i];
                }
                break;
            }

            case OpKind::kReshape: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                break;
            }

            case OpKind::kDropout: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * n.aux[i];
                }
                break;
            }

            case OpKind::kCrossEntropy: {
                if (wants(n.a)) {
                    Tensor& da = adj_of(n.a);
                    const std::size_t rows = da.rows(), cols = da.cols();
                    const double gv = g[0] / static_cast<double>(rows);
                    for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t j = 0; j < cols; ++j) {
                            double v = n.aux[i * cols + j];
                            if (j == n.idx[i]) v -= 1.0;
                            da.at(i, j) += gv * v;
                        }
                    }
                }
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Forward primitives
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
    Tape* t = same_tape(a, b);
    const Tensor& va = t->value(a);
    const Tensor& vb = t->value(b);
    require_2d(OpKind::kMatmul, va, "lhs");
    require_2d(OpKind::kMatmul, vb, "rhs");
    if (va.cols() != vb.rows()) {
        shape_fail(OpKind::kMatmul, va.shape_str() + " * " + vb.shape_str());
    }
    Tape::Node n;
    n.op = OpKind::kMatmul;
    n.a = a.id;
    n.b = b.id;
    n.value = Tensor({va.rows(), vb.cols()});
    matmul_into(va, vb, n.value);
    return t->emit(std::move(n));
}

Var transpose(Var a) {
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    require_2d(OpKind::kTranspose, va, "input");
    Tape::Node n;
    n.op = OpKind::kTranspose;
    n.a = a.id;
    n.value = Tensor({va.cols(), va.rows()});
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < va.cols(); ++j)
            n.value.at(j, i) = va.at(i, j);
    return t->emit(std::move(n));
}

namespace {

Var binary_same_shape(OpKind op, Var a, Var b) {
    Tape* t = same_tape(a, b);
    const Tensor& va = t->value(a);
    const Tensor& vb = t->value(b);
    if (!va.same_shape(vb)) {
        shape_fail(op, va.shape_str() + " vs " + vb.shape_str());
    }
    Tape::Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.value = va;
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        switch (op) {
            case OpKind::kAdd: n.value[i] = va[i] + vb[i]; break;
            case OpKind::kSub: n.value[i] = va[i] - vb[i]; break;
            case OpKind::kMul: n.value[i] = va[i] * vb[i]; break;
            case OpKind::kDiv: n.value[i] = va[i] / vb[i]; break;
            default: break;
        }
    }
    return t->emit(std::move(n));
}

template <typename F>
Var unary_map(OpKind op, Var a, F&& f) {
    Tape* t = a.tape;
    Tape::Node n;
    n.op = op;
    n.a = a.id;
    n.value = t->value(a);
    for (double& v : n.value.data()) v = f(v);
    return t->emit(std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return binary_same_shape(OpKind::kAdd, a, b); }
Var sub(Var a, Var b) { return binary_same_shape(OpKind::kSub, a, b); }
Var mul(Var a, Var b) { return binary_same_shape(OpKind::kMul, a, b); }
Var div(Var a, Var b) { return binary_same_shape(OpKind::kDiv, a, b); }

Var scalar_mul(Var a, double c) {
    Tape::Node n;
    n.op = OpKind::kScalarMul;
    n.a = a.id;
    n.scalar = c;
    n.value = a.tape->value(a);
    for (double& v : n.value.data()) v *= c;
    return a.tape->emit(std::move(n));
}

Var add_scalar(Var a, double c) {
    Tape::Node n;
    n.op = OpKind::kAddScalar;
    n.a = a.id;
    n.scalar = c;
    n.value = a.tape->value(a);
    for (double& v : n.value.data()) v += c;
    return a.tape->emit(std::move(n));
}

Var scale_by(Var a, Var s) {
    Tape* t = same_tape(a, s);
    if (!t->value(s).is_scalar()) {
        shape_fail(OpKind::kScaleBy, "scale must be scalar, got " + t->value(s).shape_str());
    }
    const double sv = t->value(s)[0];
    Tape::Node n;
    n.op = OpKind::kScaleBy;
    n.a = a.id;
    n.b = s.id;
    n.value = t->value(a);
    for (double& v : n.value.data()) v *= sv;
    return t->emit(std::move(n));
}

Var shift_by(Var a, Var s) {
    Tape* t = same_tape(a, s);
    if (!t->value(s).is_scalar()) {
        shape_fail(OpKind::kShiftBy, "shift must be scalar, got " + t->value(s).shape_str());
    }
    const double sv = t->value(s)[0];
    Tape::Node n;
    n.op = OpKind::kShiftBy;
    n.a = a.id;
    n.b = s.id;
    n.value = t->value(a);
    for (double& v : n.value.data()) v += sv;
    return t->emit(std::move(n));
}

Var row_softmax(Var a) {
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    require_2d(OpKind::kRowSoftmax, va, "input");
    Tape::Node n;
    n.op = OpKind::kRowSoftmax;
    n.a = a.id;
    n.value = va;
    const std::size_t r = va.rows(), c = va.cols();
    for (std::size_t i = 0; i < r; ++i) {
        // per-row max subtraction; exact by shift invariance
        double mx = va.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, va.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(va.at(i, j) - mx);
            n.value.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < c; ++j) n.value.at(i, j) /= sum;
    }
    return t->emit(std::move(n));
}

Var sigmoid(Var a) {
    return unary_map(OpKind::kSigmoid, a, [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
    });
}

Var elu(Var a) {
    return unary_map(OpKind::kElu, a,
                     [](double x) { return x > 0.0 ? x : std::expm1(x); });
}

Var exp(Var a) {
    return unary_map(OpKind::kExp, a, [](double x) { return std::exp(x); });
}

Var log(Var a) {
    return unary_map(OpKind::kLog, a, [](double x) { return std::log(x); });
}

Var sum_all(Var a) {
    Tape::Node n;
    n.op = OpKind::kSumAll;
    n.a = a.id;
    double acc = 0.0;
    for (double v : a.tape->value(a).data()) acc += v;
    n.value = Tensor::scalar(acc);
    return a.tape->emit(std::move(n));
}

Var sum_rows(Var a) {
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    require_2d(OpKind::kSumRows, va, "input");
    Tape::Node n;
    n.op = OpKind::kSumRows;
    n.a = a.id;
    n.value = Tensor({va.rows(), 1});
    for (std::size_t i = 0; i < va.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < va.cols(); ++j) acc += va.at(i, j);
        n.value[i] = acc;
    }
    return t->emit(std::move(n));
}

Var clamp_min(Var a, double floor) {
    Tape::Node n;
    n.op = OpKind::kClampMin;
    n.a = a.id;
    n.scalar = floor;
    n.value = a.tape->value(a);
    for (double& v : n.value.data()) v = std::max(v, floor);
    return a.tape->emit(std::move(n));
}

Var pow_neg_half(Var a) {
    return unary_map(OpKind::kPowNegHalf, a,
                     [](double x) { return 1.0 / std::sqrt(x); });
}

Var zero_diag(Var a) {
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    require_2d(OpKind::kZeroDiag, va, "input");
    if (va.rows() != va.cols()) {
        shape_fail(OpKind::kZeroDiag, "matrix must be square, got " + va.shape_str());
    }
    Tape::Node n;
    n.op = OpKind::kZeroDiag;
    n.a = a.id;
    n.value = va;
    for (std::size_t i = 0; i < va.rows(); ++i) n.value.at(i, i) = 0.0;
    return t->emit(std::move(n));
}

Var diag_vec(Var a) {
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    require_2d(OpKind::kDiagVec, va, "input");
    if (va.rows() != va.cols()) {
        shape_fail(OpKind::kDiagVec, "matrix must be square, got " + va.shape_str());
    }
    Tape::Node n;
    n.op = OpKind::kDiagVec;
    n.a = a.id;
    n.value = Tensor({va.rows(), 1});
    for (std::size_t i = 0; i < va.rows(); ++i) n.value[i] = va.at(i, i);
    return t->emit(std::move(n));
}

Var gather_rows(Var a, std::vector<std::size_t> rows) {
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    require_2d(OpKind::kGatherRows, va, "input");
    for (std::size_t r : rows) {
        if (r >= va.rows()) {
            shape_fail(OpKind::kGatherRows, "row index " + std::to_string(r) +
                                                " out of range for " + va.shape_str());
        }
    }
    Tape::Node n;
    n.op = OpKind::kGatherRows;
    n.a = a.id;
    n.value = Tensor({rows.size(), va.cols()});
    for (std::size_t p = 0; p < rows.size(); ++p)
        for (std::size_t j = 0; j < va.cols(); ++j)
            n.value.at(p, j) = va.at(rows[p], j);
    n.idx = std::move(rows);
    return t->emit(std::move(n));
}

Var gather_pairs(Var a, std::vector<std::size_t> rows, std::vector<std::size_t> cols,
                 std::size_t out_rows, std::size_t out_cols) {
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    require_2d(OpKind::kGatherPairs, va, "input");
    if (rows.size() != cols.size() || rows.size() != out_rows * out_cols) {
        shape_fail(OpKind::kGatherPairs, "index lists do not fill the output shape");
    }
    for (std::size_t p = 0; p < rows.size(); ++p) {
        if (rows[p] >= va.rows() || cols[p] >= va.cols()) {
            shape_fail(OpKind::kGatherPairs, "index (" + std::to_string(rows[p]) + "," +
                                                 std::to_string(cols[p]) +
                                                 ") out of range for " + va.shape_str());
        }
    }
    Tape::Node n;
    n.op = OpKind::kGatherPairs;
    n.a = a.id;
    n.value = Tensor({out_rows, out_cols});
    for (std::size_t p = 0; p < rows.size(); ++p)
        n.value[p] = va.at(rows[p], cols[p]);
    n.idx = std::move(rows);
    n.idx2 = std::move(cols);
    return t->emit(std::move(n));
}

Var concat_rows(Var a, Var b) {
    Tape* t = same_tape(a, b);
    const Tensor& va = t->value(a);
    const Tensor& vb = t->value(b);
    require_2d(OpKind::kConcatRows, va, "lhs");
    require_2d(OpKind::kConcatRows, vb, "rhs");
    if (va.cols() != vb.cols()) {
        shape_fail(OpKind::kConcatRows, va.shape_str() + " over " + vb.shape_str());
    }
    Tape::Node n;
    n.op = OpKind::kConcatRows;
    n.a = a.id;
    n.b = b.id;
    n.value = Tensor({va.rows() + vb.rows(), va.cols()});
    std::copy(va.data().begin(), va.data().end(), n.value.data().begin());
    std::copy(vb.data().begin(), vb.data().end(),
              n.value.data().begin() + static_cast<std::ptrdiff_t>(va.size()));
    return t->emit(std::move(n));
}

Var scale_rows(Var a, Var s) {
    Tape* t = same_tape(a, s);
    const Tensor& va = t->value(a);
    const Tensor& vs = t->value(s);
    require_2d(OpKind::kScaleRows, va, "input");
    if (vs.size() != va.rows()) {
        shape_fail(OpKind::kScaleRows, "scales " + vs.shape_str() + " vs rows of " + va.shape_str());
    }
    Tape::Node n;
    n.op = OpKind::kScaleRows;
    n.a = a.id;
    n.b = s.id;
    n.value = va;
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < va.cols(); ++j)
            n.value.at(i, j) *= vs[i];
    return t->emit(std::move(n));
}

Var scale_cols(Var a, Var s) {
    Tape* t = same_tape(a, s);
    const Tensor& va = t->value(a);
    const Tensor& vs = t->value(s);
    require_2d(OpKind::kScaleCols, va, "input");
    if (vs.size() != va.cols()) {
        shape_fail(OpKind::kScaleCols, "scales " + vs.shape_str() + " vs cols of " + va.shape_str());
    }
    Tape::Node n;
    n.op = OpKind::kScaleCols;
    n.a = a.id;
    n.b = s.id;
    n.value = va;
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < va.cols(); ++j)
            n.value.at(i, j) *= vs[j];
    return t->emit(std::move(n));
}

Var add_rowvec(Var a, Var b) {
    Tape* t = same_tape(a, b);
    const Tensor& va = t->value(a);
    const Tensor& vb = t->value(b);
    require_2d(OpKind::kAddRowVec, va, "input");
    if (vb.size() != va.cols()) {
        shape_fail(OpKind::kAddRowVec, "vector " + vb.shape_str() + " vs cols of " + va.shape_str());
    }
    Tape::Node n;
    n.op = OpKind::kAddRowVec;
    n.a = a.id;
    n.b = b.id;
    n.value = va;
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < va.cols(); ++j)
            n.value.at(i, j) += vb[j];
    return t->emit(std::move(n));
}

Var tile_rows(Var a, std::size_t times) {
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    require_2d(OpKind::kTileRows, va, "input");
    if (times == 0) shape_fail(OpKind::kTileRows, "times must be positive");
    Tape::Node n;
    n.op = OpKind::kTileRows;
    n.a = a.id;
    n.count = times;
    n.value = Tensor({va.rows() * times, va.cols()});
    for (std::size_t rep = 0; rep < times; ++rep)
        std::copy(va.data().begin(), va.data().end(),
                  n.value.data().begin() + static_cast<std::ptrdiff_t>(rep * va.size()));
    return t->emit(std::move(n));
}

Var reshape(Var a, std::vector<std::size_t> shape) {
    Tape::Node n;
    n.op = OpKind::kReshape;
    n.a = a.id;
    n.value = a.tape->value(a).reshaped(std::move(shape));
    return a.tape->emit(std::move(n));
}

Var dropout(Var a, double p, std::uint64_t seed) {
    if (p < 0.0 || p >= 1.0) {
        throw Error("dropout: rate must be in [0,1), got " + std::to_string(p));
    }
    Tape* t = a.tape;
    const Tensor& va = t->value(a);
    Tape::Node n;
    n.op = OpKind::kDropout;
    n.a = a.id;
    n.scalar = p;
    n.value = va;
    n.aux.resize(va.size());
    Rng rng(seed);
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < va.size(); ++i) {
        const double m = rng.uniform() < p ? 0.0 : keep_scale;
        n.aux[i] = m;
        n.value[i] *= m;
    }
    return t->emit(std::move(n));
}

Var cross_entropy(Var logits, const std::vector<std::size_t>& labels) {
    Tape* t = logits.tape;
    const Tensor& z = t->value(logits);
    require_2d(OpKind::kCrossEntropy, z, "logits");
    if (labels.empty()) throw Error("cross-entropy: empty batch");
    if (labels.size() != z.rows()) {
        shape_fail(OpKind::kCrossEntropy,
                   std::to_string(labels.size()) + " labels vs logits " + z.shape_str());
    }
    const std::size_t rows = z.rows(), cols = z.cols();
    for (std::size_t lab : labels) {
        if (lab >= cols) {
            throw Error("cross-entropy: label " + std::to_string(lab) + " out of range");
        }
    }
    Tape::Node n;
    n.op = OpKind::kCrossEntropy;
    n.a = logits.id;
    n.idx = labels;
    n.aux.resize(rows * cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double mx = z.at(i, 0);
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, z.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double e = std::exp(z.at(i, j) - mx);
            n.aux[i * cols + j] = e;
            sum += e;
        }
        for (std::size_t j = 0; j < cols; ++j) n.aux[i * cols + j] /= sum;
        loss += std::log(sum) - (z.at(i, labels[i]) - mx);
    }
    n.value = Tensor::scalar(loss / static_cast<double>(rows));
    return t->emit(std::move(n));
}

}  // namespace ccp
