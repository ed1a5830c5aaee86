#pragma once

#include <optional>
#include <vector>

#include "ccp/rng.hpp"
#include "ccp/tape.hpp"
#include "ccp/tensor.hpp"

namespace ccp {

inline constexpr double kDegreeEps = 1e-8;

/// The L highest-rank candidates of one cluster, in descending rank order
/// (ties broken by ascending node index). Gates are filled by the layer
/// forward pass; select_neighborhood leaves them empty.
struct OrderedNeighborhood {
    std::size_t cluster = 0;
    std::vector<std::size_t> members;
    std::vector<double> ranks;
    std::vector<double> gates;
};

/// Hierarchy values cached for the frozen-clustering schema: memberships,
/// normalized coarse affinity, neighborhoods and their rank values are
/// computed once and reused by every forward pass.
struct FrozenCache {
    Tensor memberships;
    Tensor a_norm;
    Tensor rank_sel;  // {k_out, L} ranks of the selected nodes, slot order
    std::vector<OrderedNeighborhood> neighborhoods;
};

/// One Convolutional Cluster Pooling layer: membership logits U, the shared
/// kernel W with bias b, and the gate parameters.
struct CcpLayer {
    std::size_t k_in = 0;
    std::size_t k_out = 0;
    std::size_t L = 0;
    std::size_t d_in = 0;
    std::size_t d_out = 0;

    Tensor u;      // {k_in, k_out} trainable logits
    Tensor w;      // {L, d_in, d_out} shared kernel
    Tensor b;      // {1, d_out}
    Tensor alpha;  // {1} gate slope
    Tensor beta;   // {1} gate offset

    /// Fixed per-cluster slot permutations; empty for centrality ordering.
    std::vector<std::vector<std::size_t>> slot_perms;

    std::optional<FrozenCache> frozen;
};

/// Initializes a layer: U ~ N(0, 0.01^2), W uniform in +-sqrt(6/(L*d_in+d_out)),
/// b zero, alpha ~ N(1, 0.1^2), beta ~ N(0, 0.1^2).
CcpLayer make_ccp_layer(std::size_t k_in, std::size_t k_out, std::size_t L,
                        std::size_t d_in, std::size_t d_out, Rng& rng);

/// Draws the fixed random slot permutations used by the random-ordering
/// ablation, one per cluster, before training starts.
void assign_random_ordering(CcpLayer& layer, Rng& rng);

/// Leaves for one layer's parameters on a tape. u_trainable=false realizes
/// the gradient masks of the frozen-membership ablations.
struct LayerVars {
    Var u, w, b, alpha, beta;
};
LayerVars leaf_layer(Tape& tape, const CcpLayer& layer, bool u_trainable);

/// Cluster step on tape: K = row_softmax(U), A_out = K^T (A - diag A) K,
/// A_norm = D^{-1/2} A_out D^{-1/2} with degrees floored at eps.
struct CoarsenStep {
    Var memberships;  // K
    Var a_out;        // unnormalized coarsened affinity
    Var a_norm;       // degree-normalized coarsened affinity
    Var azd_k;        // (A - diag A) K, shared with the rank computation
};
CoarsenStep cluster_step(Var a_in, Var u_logits, double eps = kDegreeEps);

// ---------------------------------------------------------------------------
// Centrality ranking (value level)
// ---------------------------------------------------------------------------

/// (1 + K_ik) * sum_{j != i} A_ij K_jk.
double rank(const Tensor& a, const Tensor& memberships, std::size_t node, std::size_t cluster);

/// All ranks at once: {k_in, k_out}.
Tensor rank_matrix(const Tensor& a, const Tensor& memberships);

/// Top-L nodes of one cluster by descending rank, ties by ascending index.
/// Greedy selection equals the subset argmax because the objective is a sum
/// of per-node ranks.
OrderedNeighborhood select_neighborhood(const Tensor& a, const Tensor& memberships,
                                        std::size_t cluster, std::size_t L);

/// Logistic gate at a rank value, using the layer's current alpha and beta.
double gate(const CcpLayer& layer, double rank_value);

// ---------------------------------------------------------------------------
// Filter step and full layer forward (tape level)
// ---------------------------------------------------------------------------

/// Shared-kernel aggregation over `batch` stacked signals: f_in is
/// {batch*k_in, d_in}; each cluster k contributes row
/// F_out[k,:] = sum_l sum_i W[l,i,:] * (gates[k,l] * F_in[member(k,l), i]) + b.
/// Returns {batch*k_out, d_out}, pre-activation.
Var filter_step(Var f_in, std::size_t batch,
                const std::vector<OrderedNeighborhood>& neighborhoods,
                Var gates, const LayerVars& vars, const CcpLayer& layer);

struct LayerForwardOptions {
    bool u_trainable = true;
    bool frozen = false;
    double eps = kDegreeEps;
};

struct LayerForward {
    LayerVars vars;  // this tape's parameter leaves
    CoarsenStep coarsen;
    Var rank_mat;  // invalid when frozen
    std::vector<OrderedNeighborhood> neighborhoods;
    Var gates;  // {k_out, L}
    Var f_out;  // {batch*k_out, d_out}, after ELU
};

/// Full CCP layer: cluster step, per-cluster neighborhood selection, gating,
/// shared-kernel aggregation, ELU. The selected permutation is a constant of
/// the forward pass; gradients flow through rank values only via the gates.
/// With frozen=true, the cached hierarchy is reused and memberships receive
/// no gradient.
LayerForward layer_forward(Tape& tape, CcpLayer& layer, Var a_in, Var f_in,
                           std::size_t batch, const LayerForwardOptions& opts);

/// Computes and stores the frozen hierarchy for a layer from the given input
/// affinity; returns the cached normalized affinity for the next layer.
const Tensor& freeze_layer(CcpLayer& layer, const Tensor& a_in, double eps = kDegreeEps);

}  // namespace ccp
