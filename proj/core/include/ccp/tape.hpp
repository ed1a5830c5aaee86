#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "ccp/tensor.hpp"

namespace ccp {

class Tape;

/// Lightweight handle to a node on a Tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
};

enum class OpKind {
    kLeaf,
    kMatmul,
    kTranspose,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kScalarMul,
    kAddScalar,
    kScaleBy,
    kShiftBy,
    kRowSoftmax,
    kSigmoid,
    kElu,
    kExp,
    kLog,
    kSumAll,
    kSumRows,
    kClampMin,
    kPowNegHalf,
    kZeroDiag,
    kDiagVec,
    kGatherRows,
    kGatherPairs,
    kConcatRows,
    kScaleRows,
    kScaleCols,
    kAddRowVec,
    kTileRows,
    kReshape,
    kDropout,
    kCrossEntropy,
};

const char* op_name(OpKind k);

/// Append-only record of a forward computation. Nodes are stored in
/// topological order by construction; backward() walks them once in reverse.
/// A Tape is single-threaded; several tapes may run concurrently over shared
/// read-only parameter tensors.
class Tape {
public:
    struct Node {
        OpKind op = OpKind::kLeaf;
        int a = -1;
        int b = -1;
        Tensor value;
        bool needs_grad = false;
        bool trainable_leaf = false;
        double scalar = 0.0;               // scalar_mul / add_scalar / clamp floor / dropout p
        std::size_t count = 0;             // tile_rows repetition count
        std::vector<std::size_t> idx;      // gather_rows rows / gather_pairs rows / labels
        std::vector<std::size_t> idx2;     // gather_pairs cols
        std::vector<double> aux;           // dropout mask / cross-entropy probabilities
    };

    /// Inserts an input tensor. Only trainable leaves receive gradients.
    Var leaf(const Tensor& value, bool trainable = false);
    Var constant(const Tensor& value) { return leaf(value, false); }

    /// Reverse sweep from a scalar output; fills adjoints for every node that
    /// can influence it. Throws if `output` is not scalar.
    void backward(Var output);

    const Tensor& value(Var v) const;
    bool has_grad(Var v) const;
    /// Adjoint of `v` after backward(); zeros if backward never reached it.
    Tensor grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }

    /// When enabled (default), every primitive verifies its output is finite
    /// and throws NumericError naming the offending op otherwise.
    void set_check_finite(bool on) { check_finite_ = on; }

    Var emit(Node&& node);

private:
    void check_node(const Node& node, int id) const;

    // deque keeps value() references stable while the tape grows
    std::deque<Node> nodes_;
    std::vector<Tensor> adjoints_;
    bool check_finite_ = true;
};

// ---------------------------------------------------------------------------
// Primitives. Shape preconditions are checked; violations throw ShapeError
// naming the op and the offending shapes.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b);  // elementwise
Var scalar_mul(Var a, double c);
Var add_scalar(Var a, double c);
Var scale_by(Var a, Var s);  // s is a scalar tensor; gradient reaches s
Var shift_by(Var a, Var s);
Var row_softmax(Var a);
Var sigmoid(Var a);
Var elu(Var a);
Var exp(Var a);
Var log(Var a);
Var sum_all(Var a);
Var sum_rows(Var a);  // {r,c} -> {r,1}
Var clamp_min(Var a, double floor);
Var pow_neg_half(Var a);
Var zero_diag(Var a);
Var diag_vec(Var a);  // {n,n} -> {n,1}
Var gather_rows(Var a, std::vector<std::size_t> rows);
/// out[p/C, p%C] = a[rows[p], cols[p]] for an {R,C} result.
Var gather_pairs(Var a, std::vector<std::size_t> rows, std::vector<std::size_t> cols,
                 std::size_t out_rows, std::size_t out_cols);
Var concat_rows(Var a, Var b);
Var scale_rows(Var a, Var s);   // s {r,1}
Var scale_cols(Var a, Var s);   // s {c,1}
Var add_rowvec(Var a, Var b);   // b {1,c}, broadcast over rows
Var tile_rows(Var a, std::size_t times);
Var reshape(Var a, std::vector<std::size_t> shape);
/// Inverted dropout with a mask drawn deterministically from `seed`.
Var dropout(Var a, double p, std::uint64_t seed);
/// Mean negative log-likelihood of the true class under row softmax.
Var cross_entropy(Var logits, const std::vector<std::size_t>& labels);

}  // namespace ccp
