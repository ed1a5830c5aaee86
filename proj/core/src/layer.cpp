#include "ccp/layer.hpp"

#include <algorithm>
#include <cmath>

#include "ccp/errors.hpp"

namespace ccp {

CcpLayer make_ccp_layer(std::size_t k_in, std::size_t k_out, std::size_t L,
                        std::size_t d_in, std::size_t d_out, Rng& rng) {
    if (k_out > k_in) {
        throw ConfigError("ccp layer: k_out " + std::to_string(k_out) +
                          " exceeds k_in " + std::to_string(k_in));
    }
    if (L == 0 || L > k_in) {
        throw ConfigError("ccp layer: L " + std::to_string(L) +
                          " must be in [1, " + std::to_string(k_in) + "]");
    }
    CcpLayer layer;
    layer.k_in = k_in;
    layer.k_out = k_out;
    layer.L = L;
    layer.d_in = d_in;
    layer.d_out = d_out;

    layer.u = Tensor({k_in, k_out});
    for (double& v : layer.u.data()) v = rng.normal(0.0, 0.01);

    const double bound = std::sqrt(6.0 / static_cast<double>(L * d_in + d_out));
    layer.w = Tensor({L, d_in, d_out});
    for (double& v : layer.w.data()) v = rng.uniform(-bound, bound);

    layer.b = Tensor({1, d_out});
    layer.alpha = Tensor::scalar(rng.normal(1.0, 0.1));
    layer.beta = Tensor::scalar(rng.normal(0.0, 0.1));
    return layer;
}

void assign_random_ordering(CcpLayer& layer, Rng& rng) {
    layer.slot_perms.assign(layer.k_out, {});
    for (auto& perm : layer.slot_perms) {
        perm.resize(layer.L);
        for (std::size_t l = 0; l < layer.L; ++l) perm[l] = l;
        rng.shuffle(perm);
    }
}

LayerVars leaf_layer(Tape& tape, const CcpLayer& layer, bool u_trainable) {
    LayerVars vars;
    vars.u = tape.leaf(layer.u, u_trainable);
    vars.w = tape.leaf(layer.w, true);
    vars.b = tape.leaf(layer.b, true);
    vars.alpha = tape.leaf(layer.alpha, true);
    vars.beta = tape.leaf(layer.beta, true);
    return vars;
}

CoarsenStep cluster_step(Var a_in, Var u_logits, double eps) {
    Tape* tape = a_in.tape;
    const Tensor& a = tape->value(a_in);
    const Tensor& u = tape->value(u_logits);
    if (a.rank() != 2 || a.rows() != a.cols() || u.rows() != a.rows()) {
        throw ShapeError("cluster_step: affinity " + a.shape_str() +
                         " does not match logits " + u.shape_str());
    }
    CoarsenStep step;
    step.memberships = row_softmax(u_logits);
    Var azd = zero_diag(a_in);
    step.azd_k = matmul(azd, step.memberships);
    step.a_out = matmul(transpose(step.memberships), step.azd_k);
    Var inv_sqrt_deg = pow_neg_half(clamp_min(sum_rows(step.a_out), eps));
    step.a_norm = scale_cols(scale_rows(step.a_out, inv_sqrt_deg), inv_sqrt_deg);
    return step;
}

double rank(const Tensor& a, const Tensor& memberships, std::size_t node, std::size_t cluster) {
    const std::size_t n = a.rows();
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == node) continue;
        acc += a.at(node, j) * memberships.at(j, cluster);
    }
    return (1.0 + memberships.at(node, cluster)) * acc;
}

Tensor rank_matrix(const Tensor& a, const Tensor& memberships) {
    const std::size_t n = a.rows();
    const std::size_t k_out = memberships.cols();
    if (memberships.rows() != n) {
        throw ShapeError("rank_matrix: memberships " + memberships.shape_str() +
                         " vs affinity " + a.shape_str());
    }
    Tensor r({n, k_out});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < k_out; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                acc += a.at(i, j) * memberships.at(j, k);
            }
            r.at(i, k) = (1.0 + memberships.at(i, k)) * acc;
        }
    }
    return r;
}

namespace {

/// Top-L rows of one rank-matrix column, descending rank then ascending index.
OrderedNeighborhood select_from_ranks(const Tensor& rank_mat, std::size_t cluster, std::size_t L) {
    const std::size_t n = rank_mat.rows();
    if (L > n) {
        throw ShapeError("select_neighborhood: L " + std::to_string(L) +
                         " exceeds node count " + std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
        const double rl = rank_mat.at(lhs, cluster), rr = rank_mat.at(rhs, cluster);
        if (rl != rr) return rl > rr;
        return lhs < rhs;
    });
    OrderedNeighborhood nb;
    nb.cluster = cluster;
    nb.members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(L));
    nb.ranks.resize(L);
    for (std::size_t l = 0; l < L; ++l) nb.ranks[l] = rank_mat.at(nb.members[l], cluster);
    return nb;
}

void apply_slot_perm(OrderedNeighborhood& nb, const std::vector<std::size_t>& perm) {
    if (perm.empty()) return;
    OrderedNeighborhood src = nb;
    for (std::size_t l = 0; l < perm.size(); ++l) {
        nb.members[l] = src.members[perm[l]];
        nb.ranks[l] = src.ranks[perm[l]];
    }
}

std::vector<OrderedNeighborhood> select_all(const Tensor& rank_mat, const CcpLayer& layer) {
    std::vector<OrderedNeighborhood> nbhds;
    nbhds.reserve(layer.k_out);
    for (std::size_t k = 0; k < layer.k_out; ++k) {
        OrderedNeighborhood nb = select_from_ranks(rank_mat, k, layer.L);
        if (!layer.slot_perms.empty()) apply_slot_perm(nb, layer.slot_perms[k]);
        nbhds.push_back(std::move(nb));
    }
    return nbhds;
}

Var gates_from_ranks(Var rank_sel, const LayerVars& vars) {
    return sigmoid(shift_by(scale_by(rank_sel, vars.alpha), vars.beta));
}

}  // namespace

OrderedNeighborhood select_neighborhood(const Tensor& a, const Tensor& memberships,
                                        std::size_t cluster, std::size_t L) {
    return select_from_ranks(rank_matrix(a, memberships), cluster, L);
}

double gate(const CcpLayer& layer, double rank_value) {
    const double x = layer.alpha[0] * rank_value + layer.beta[0];
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

Var filter_step(Var f_in, std::size_t batch,
                const std::vector<OrderedNeighborhood>& neighborhoods,
                Var gates, const LayerVars& vars, const CcpLayer& layer) {
    Tape* tape = f_in.tape;
    const Tensor& f = tape->value(f_in);
    if (neighborhoods.size() != layer.k_out) {
        throw ShapeError("filter_step: " + std::to_string(neighborhoods.size()) +
                         " neighborhoods for " + std::to_string(layer.k_out) + " clusters");
    }
    if (f.rank() != 2 || f.rows() != batch * layer.k_in || f.cols() != layer.d_in) {
        throw ShapeError("filter_step: signal " + f.shape_str() + " does not match " +
                         std::to_string(batch) + " stacked signals of shape [" +
                         std::to_string(layer.k_in) + "x" + std::to_string(layer.d_in) + "]");
    }

    std::vector<std::size_t> rows;
    rows.reserve(batch * layer.k_out * layer.L);
    for (std::size_t s = 0; s < batch; ++s) {
        const std::size_t base = s * layer.k_in;
        for (const auto& nb : neighborhoods) {
            if (nb.members.size() != layer.L) {
                throw ShapeError("filter_step: neighborhood of cluster " +
                                 std::to_string(nb.cluster) + " has " +
                                 std::to_string(nb.members.size()) + " members, expected " +
                                 std::to_string(layer.L));
            }
            for (std::size_t m : nb.members) rows.push_back(base + m);
        }
    }

    Var gathered = gather_rows(f_in, std::move(rows));
    Var gate_col = reshape(gates, {layer.k_out * layer.L, 1});
    if (batch > 1) gate_col = tile_rows(gate_col, batch);
    Var gated = scale_rows(gathered, gate_col);
    Var stacked = reshape(gated, {batch * layer.k_out, layer.L * layer.d_in});
    Var kernel = reshape(vars.w, {layer.L * layer.d_in, layer.d_out});
    return add_rowvec(matmul(stacked, kernel), vars.b);
}

LayerForward layer_forward(Tape& tape, CcpLayer& layer, Var a_in, Var f_in,
                           std::size_t batch, const LayerForwardOptions& opts) {
    LayerVars vars = leaf_layer(tape, layer, opts.u_trainable && !opts.frozen);
    LayerForward out;
    out.vars = vars;

    if (opts.frozen) {
        if (!layer.frozen) freeze_layer(layer, tape.value(a_in), opts.eps);
        const FrozenCache& cache = *layer.frozen;
        out.coarsen.memberships = tape.constant(cache.memberships);
        out.coarsen.a_norm = tape.constant(cache.a_norm);
        out.neighborhoods = cache.neighborhoods;
        Var rank_sel = tape.constant(cache.rank_sel);
        out.gates = gates_from_ranks(rank_sel, vars);
    } else {
        out.coarsen = cluster_step(a_in, vars.u, opts.eps);
        // Rank(i -> k) = (1 + K_ik) * [(A - diag A) K]_ik
        out.rank_mat = mul(add_scalar(out.coarsen.memberships, 1.0), out.coarsen.azd_k);
        out.neighborhoods = select_all(tape.value(out.rank_mat), layer);

        std::vector<std::size_t> sel_rows, sel_cols;
        sel_rows.reserve(layer.k_out * layer.L);
        sel_cols.reserve(layer.k_out * layer.L);
        for (const auto& nb : out.neighborhoods) {
            for (std::size_t m : nb.members) {
                sel_rows.push_back(m);
                sel_cols.push_back(nb.cluster);
            }
        }
        Var rank_sel = gather_pairs(out.rank_mat, std::move(sel_rows), std::move(sel_cols),
                                    layer.k_out, layer.L);
        out.gates = gates_from_ranks(rank_sel, vars);
    }

    const Tensor& gate_values = tape.value(out.gates);
    for (std::size_t k = 0; k < layer.k_out; ++k) {
        out.neighborhoods[k].gates.assign(layer.L, 0.0);
        for (std::size_t l = 0; l < layer.L; ++l) {
            out.neighborhoods[k].gates[l] = gate_values.at(k, l);
        }
    }

    out.f_out = elu(filter_step(f_in, batch, out.neighborhoods, out.gates, vars, layer));
    return out;
}

const Tensor& freeze_layer(CcpLayer& layer, const Tensor& a_in, double eps) {
    Tape tape;
    Var a = tape.constant(a_in);
    Var u = tape.constant(layer.u);
    CoarsenStep step = cluster_step(a, u, eps);
    Tensor rank_mat = tape.value(mul(add_scalar(step.memberships, 1.0), step.azd_k));

    FrozenCache cache;
    cache.memberships = tape.value(step.memberships);
    cache.a_norm = tape.value(step.a_norm);
    cache.neighborhoods = select_all(rank_mat, layer);
    cache.rank_sel = Tensor({layer.k_out, layer.L});
    for (std::size_t k = 0; k < layer.k_out; ++k) {
        for (std::size_t l = 0; l < layer.L; ++l) {
            cache.rank_sel.at(k, l) = cache.neighborhoods[k].ranks[l];
        }
    }
    layer.frozen = std::move(cache);
    return layer.frozen->a_norm;
}

}  // namespace ccp
