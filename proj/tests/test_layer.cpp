#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ccp/errors.hpp"
#include "ccp/grad_check.hpp"
#include "ccp/graph.hpp"
#include "ccp/layer.hpp"
#include "support.hpp"

using namespace ccp;
using namespace testsupport;

TEST_SUITE_BEGIN("ccp_layer");

namespace {

Tensor near_hard_identity_logits(std::size_t n) {
    Tensor u({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) u.at(i, j) = i == j ? 30.0 : -30.0;
    return u;
}

CcpLayer layer_with(std::size_t k_in, std::size_t k_out, std::size_t L, std::size_t d_in,
                    std::size_t d_out, std::uint64_t seed = 1) {
    Rng rng(seed);
    return make_ccp_layer(k_in, k_out, L, d_in, d_out, rng);
}

/// Scalar loss sum(elu-activated layer output) for the FD harness.
double layer_loss_value(CcpLayer layer, const Tensor& a, const Tensor& f) {
    Tape tape;
    LayerForwardOptions opts;
    LayerForward lf = layer_forward(tape, layer, tape.constant(a), tape.constant(f), 1, opts);
    return tape.value(sum_all(lf.f_out))[0];
}

/// Smallest gap between consecutive sorted ranks across all clusters; FD
/// instances must keep this above the perturbation scale so the selected
/// permutation stays constant.
double min_rank_gap(const Tensor& a, const Tensor& u) {
    Tape tape;
    const Tensor k = tape.value(row_softmax(tape.constant(u)));
    const Tensor r = rank_matrix(a, k);
    double gap = 1e300;
    for (std::size_t c = 0; c < r.cols(); ++c) {
        std::vector<double> column(r.rows());
        for (std::size_t i = 0; i < r.rows(); ++i) column[i] = r.at(i, c);
        std::sort(column.begin(), column.end());
        for (std::size_t i = 1; i < column.size(); ++i) {
            gap = std::min(gap, column[i] - column[i - 1]);
        }
    }
    return gap;
}

struct TieFreeInstance {
    Tensor a;
    Tensor f;
    CcpLayer layer;
};

TieFreeInstance tie_free_instance(std::uint64_t seed) {
    Rng rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        TieFreeInstance inst{random_symmetric(6, rng), random_tensor({6, 2}, rng),
                             layer_with(6, 3, 3, 2, 4, rng.next_u64())};
        for (double& v : inst.layer.u.data()) v = rng.uniform(-1.0, 1.0);
        if (min_rank_gap(inst.a, inst.layer.u) > 1e-3) return inst;
    }
    throw std::runtime_error("no tie-free instance found");
}

}  // namespace

// ---------------------------------------------------------------------------
// Cluster step
// ---------------------------------------------------------------------------

TEST_CASE("near-identity memberships reproduce the zero-diagonal input") {
    Rng rng(5);
    Tensor a = random_symmetric(4, rng);
    Tape tape;
    CoarsenStep step = cluster_step(tape.constant(a),
                                    tape.constant(near_hard_identity_logits(4)));
    const Tensor& out = tape.value(step.a_out);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double expect = i == j ? 0.0 : a.at(i, j);
            CHECK(std::fabs(out.at(i, j) - expect) < 1e-9);
        }
    }
}

TEST_CASE("a triangle pooled into one cluster doubles the edge count") {
    Tensor a({3, 3});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) a.at(i, j) = 1.0;
    Tape tape;
    Tensor hard({3, 1});
    for (double& v : hard.data()) v = 30.0;  // one column: softmax gives all ones
    CoarsenStep step = cluster_step(tape.constant(a), tape.constant(hard));
    CHECK(tape.value(step.a_out).size() == 1);
    CHECK(tape.value(step.a_out)[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("the quadratic form matches the nested-loop evaluation") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_symmetric(4, rng);
        Tensor u = random_tensor({4, 2}, rng, -1.5, 1.5);
        Tape tape;
        CoarsenStep step = cluster_step(tape.constant(a), tape.constant(u));
        const Tensor oracle = coarse_affinity_oracle(a, tape.value(step.memberships));
        const Tensor& out = tape.value(step.a_out);
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(std::fabs(out[i] - oracle[i]) < 1e-10);
        }
    }
}

TEST_CASE("cluster step validates shapes") {
    Tape tape;
    Var a = tape.constant(Tensor({4, 4}));
    Var u = tape.constant(Tensor({5, 2}));
    CHECK_THROWS_AS(cluster_step(a, u), ShapeError);
}

TEST_CASE("coarsening conserves mass and preserves symmetry") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng.uniform_int(5);
        const std::size_t k_out = 1 + rng.uniform_int(n - 1);
        Tensor a = random_symmetric(n, rng);
        Tape tape;
        CoarsenStep step = cluster_step(tape.constant(a),
                                        tape.constant(random_tensor({n, k_out}, rng, -2.0, 2.0)));
        const Tensor& out = tape.value(step.a_out);
        const Tensor& norm = tape.value(step.a_norm);

        double mass_in = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) mass_in += a.at(i, j);
        double mass_out = 0.0;
        for (double v : out.data()) mass_out += v;
        CHECK(std::fabs(mass_out - mass_in) <= 1e-8 * std::fabs(mass_in));

        for (std::size_t i = 0; i < k_out; ++i) {
            for (std::size_t j = 0; j < k_out; ++j) {
                CHECK(std::fabs(out.at(i, j) - out.at(j, i)) < 1e-10);
                CHECK(std::fabs(norm.at(i, j) - norm.at(j, i)) < 1e-10);
                CHECK(out.at(i, j) >= 0.0);
            }
        }

        // row-stochastic memberships
        const Tensor& k = tape.value(step.memberships);
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t c = 0; c < k_out; ++c) sum += k.at(i, c);
            CHECK(std::fabs(sum - 1.0) < 1e-10);
        }
    }
}

// ---------------------------------------------------------------------------
// Rank and neighborhood selection
// ---------------------------------------------------------------------------

TEST_CASE("the worked ranking example reproduces exactly") {
    const AffinityGraph g = ranking_example_graph();
    Tape tape;
    const Tensor k = tape.value(row_softmax(tape.constant(ranking_example_logits())));

    // spot values of the worked example (1-indexed nodes v1..v14)
    CHECK(rank(g.affinity(), k, 2, 0) == 6.0);  // v3 -> N1
    CHECK(rank(g.affinity(), k, 5, 0) == 1.0);  // v6 -> N1
    CHECK(rank(g.affinity(), k, 4, 1) == 8.0);  // v5 -> N2

    struct Expected {
        std::size_t cluster;
        std::vector<std::size_t> members;
        std::vector<double> ranks;
    };
    const std::vector<Expected> tables = {
        {0, {2, 1, 3, 0, 5}, {6, 4, 4, 2, 1}},      // v3 v2 v4 v1 v6
        {1, {4, 7, 8, 5, 6}, {8, 6, 6, 4, 4}},      // v5 v8 v9 v6 v7
        {2, {11, 10, 12, 9, 13}, {8, 6, 6, 4, 4}},  // v12 v11 v13 v10 v14
    };
    for (const Expected& expect : tables) {
        OrderedNeighborhood nb = select_neighborhood(g.affinity(), k, expect.cluster, 5);
        CHECK(nb.members == expect.members);
        REQUIRE(nb.ranks.size() == 5);
        for (std::size_t l = 0; l < 5; ++l) CHECK(nb.ranks[l] == expect.ranks[l]);
    }
}

TEST_CASE("an isolated node has rank zero in every cluster") {
    Tensor a({3, 3});
    a.at(0, 1) = a.at(1, 0) = 1.0;  // node 2 isolated
    Rng rng(19);
    const Tensor k = random_stochastic(3, 2, rng);
    CHECK(rank(a, k, 2, 0) == 0.0);
    CHECK(rank(a, k, 2, 1) == 0.0);
}

TEST_CASE("uniform memberships give the closed-form rank") {
    const AffinityGraph g = build_grid8(3, 3);
    const std::size_t k_out = 3;
    Tensor k({9, k_out});
    for (double& v : k.data()) v = 1.0 / k_out;
    for (std::size_t i = 0; i < 9; ++i) {
        const double expect = (1.0 + 1.0 / k_out) * g.degree(i) / k_out;
        for (std::size_t c = 0; c < k_out; ++c) {
            CHECK(rank(g.affinity(), k, i, c) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("selecting all nodes sorts the whole graph") {
    Rng rng(23);
    Tensor a = random_symmetric(5, rng);
    Tensor k = random_stochastic(5, 2, rng);
    OrderedNeighborhood nb = select_neighborhood(a, k, 0, 5);
    CHECK(nb.members.size() == 5);
    for (std::size_t l = 1; l < 5; ++l) CHECK(nb.ranks[l - 1] >= nb.ranks[l]);
    std::vector<std::size_t> sorted_members = nb.members;
    std::sort(sorted_members.begin(), sorted_members.end());
    CHECK(sorted_members == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("selection rejects oversized neighborhoods") {
    Rng rng(29);
    Tensor a = random_symmetric(4, rng);
    Tensor k = random_stochastic(4, 2, rng);
    CHECK_THROWS_AS(select_neighborhood(a, k, 0, 5), ShapeError);
}

TEST_CASE("greedy selection equals the exhaustive subset argmax") {
    Rng rng(31);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t n = 4 + rng.uniform_int(4);  // up to 7
        const std::size_t L = 1 + rng.uniform_int(std::min<std::size_t>(4, n));
        Tensor a = random_symmetric(n, rng);
        Tensor k = random_stochastic(n, 2, rng);
        for (std::size_t c = 0; c < 2; ++c) {
            OrderedNeighborhood nb = select_neighborhood(a, k, c, L);
            std::vector<double> ranks(n);
            for (std::size_t i = 0; i < n; ++i) ranks[i] = rank(a, k, i, c);
            std::vector<std::size_t> greedy = nb.members;
            std::sort(greedy.begin(), greedy.end());
            CHECK(greedy == best_subset_oracle(ranks, L));
        }
    }
}

TEST_CASE("scaling the affinity scales ranks and keeps the ordering") {
    Rng rng(37);
    Tensor a = random_symmetric(6, rng);
    Tensor k = random_stochastic(6, 2, rng);
    const double c = 3.7;
    Tensor scaled = a;
    for (double& v : scaled.data()) v *= c;

    const Tensor r1 = rank_matrix(a, k);
    const Tensor r2 = rank_matrix(scaled, k);
    for (std::size_t i = 0; i < r1.size(); ++i) {
        CHECK(r2[i] == doctest::Approx(c * r1[i]).epsilon(1e-12));
    }
    CHECK(select_neighborhood(a, k, 0, 3).members ==
          select_neighborhood(scaled, k, 0, 3).members);
}

// ---------------------------------------------------------------------------
// Gate
// ---------------------------------------------------------------------------

TEST_CASE("gate values at reference points") {
    CcpLayer layer = layer_with(4, 2, 2, 1, 1);
    layer.alpha = Tensor::scalar(1.0);
    layer.beta = Tensor::scalar(0.0);
    CHECK(gate(layer, 0.0) == 0.5);
    CHECK(gate(layer, 6.0) == doctest::Approx(0.997527376843365).epsilon(1e-10));

    layer.alpha = Tensor::scalar(0.0);
    CHECK(gate(layer, -3.0) == 0.5);
    CHECK(gate(layer, 100.0) == 0.5);

    // gates stay strictly inside (0,1) across the operational rank range
    layer.alpha = Tensor::scalar(1.0);
    for (double r : {-30.0, -1.0, 0.0, 2.0, 30.0}) {
        CHECK(gate(layer, r) > 0.0);
        CHECK(gate(layer, r) < 1.0);
    }
    // far outside it the correctly rounded double saturates from above
    CHECK(gate(layer, 500.0) == 1.0);
    CHECK(gate(layer, -500.0) > 0.0);
}

// ---------------------------------------------------------------------------
// Filter step
// ---------------------------------------------------------------------------

TEST_CASE("zero kernels reduce the filter step to the bias") {
    CcpLayer layer = layer_with(5, 2, 3, 2, 4);
    for (double& v : layer.w.data()) v = 0.0;
    layer.b = Tensor::from_rows({{1.0, -2.0, 0.5, 3.0}});

    Rng rng(41);
    Tensor a = random_symmetric(5, rng);
    Tensor f = random_tensor({5, 2}, rng);
    Tape tape;
    LayerForwardOptions opts;
    LayerForward lf = layer_forward(tape, layer, tape.constant(a), tape.constant(f), 1, opts);
    // pre-activation rows all equal the bias; after ELU the values pass
    // through wherever the bias is positive
    Tape check_tape;
    const Tensor expect = check_tape.value(elu(check_tape.constant(layer.b)));
    const Tensor& out = tape.value(lf.f_out);
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(out.at(k, j) == doctest::Approx(expect[j]).epsilon(1e-14));
        }
    }
}

TEST_CASE("single-node filter step by hand") {
    CcpLayer layer = layer_with(1, 1, 1, 1, 1);
    layer.u = Tensor::from_rows({{0.0}});
    layer.w = Tensor({1, 1, 1}, {3.0});
    layer.b = Tensor::from_rows({{1.0}});
    layer.alpha = Tensor::scalar(1.0);
    layer.beta = Tensor::scalar(0.0);

    Tensor a({1, 1});
    Tensor f = Tensor::from_rows({{2.0}});
    Tape tape;
    LayerVars vars = leaf_layer(tape, layer, true);
    OrderedNeighborhood nb{0, {0}, {0.0}, {}};
    Var gates = tape.constant(Tensor::from_rows({{0.5}}));
    Var out = filter_step(tape.constant(f), 1, {nb}, gates, vars, layer);
    CHECK(tape.value(out)[0] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("weight sharing: permuting clusters permutes output rows") {
    CcpLayer layer = layer_with(6, 3, 2, 2, 3);
    Rng rng(43);
    Tensor f = random_tensor({6, 2}, rng);
    Tensor gates = random_tensor({3, 2}, rng, 0.1, 0.9);
    std::vector<OrderedNeighborhood> nbhds = {
        {0, {0, 3}, {2.0, 1.0}, {}},
        {1, {2, 5}, {3.0, 0.5}, {}},
        {2, {4, 1}, {1.5, 1.0}, {}},
    };

    Tape tape;
    LayerVars vars = leaf_layer(tape, layer, true);
    const Tensor base =
        tape.value(filter_step(tape.constant(f), 1, nbhds, tape.constant(gates), vars, layer));

    // rotate the cluster order together with the gate rows
    std::vector<OrderedNeighborhood> rotated = {nbhds[2], nbhds[0], nbhds[1]};
    Tensor gates_rot({3, 2});
    for (std::size_t j = 0; j < 2; ++j) {
        gates_rot.at(0, j) = gates.at(2, j);
        gates_rot.at(1, j) = gates.at(0, j);
        gates_rot.at(2, j) = gates.at(1, j);
    }
    Tape tape2;
    LayerVars vars2 = leaf_layer(tape2, layer, true);
    const Tensor rotated_out = tape2.value(
        filter_step(tape2.constant(f), 1, rotated, tape2.constant(gates_rot), vars2, layer));

    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(rotated_out.at(0, j) == base.at(2, j));
        CHECK(rotated_out.at(1, j) == base.at(0, j));
        CHECK(rotated_out.at(2, j) == base.at(1, j));
    }
}

// ---------------------------------------------------------------------------
// Full layer forward
// ---------------------------------------------------------------------------

TEST_CASE("frozen layers reuse the cached hierarchy across signals") {
    CcpLayer layer = layer_with(6, 3, 3, 2, 4);
    Rng rng(47);
    Tensor a = random_symmetric(6, rng);
    LayerForwardOptions opts;
    opts.frozen = true;

    Tape t1;
    LayerForward first = layer_forward(t1, layer, t1.constant(a), t1.constant(random_tensor({6, 2}, rng)), 1, opts);
    Tape t2;
    LayerForward second = layer_forward(t2, layer, t2.constant(a), t2.constant(random_tensor({6, 2}, rng)), 1, opts);

    CHECK(t1.value(first.coarsen.a_norm).data() == t2.value(second.coarsen.a_norm).data());
    REQUIRE(first.neighborhoods.size() == second.neighborhoods.size());
    for (std::size_t k = 0; k < first.neighborhoods.size(); ++k) {
        CHECK(first.neighborhoods[k].members == second.neighborhoods[k].members);
        CHECK(first.neighborhoods[k].ranks == second.neighborhoods[k].ranks);
    }

    // memberships receive no gradient in frozen mode
    t1.backward(sum_all(first.f_out));
    CHECK_FALSE(t1.has_grad(first.vars.u));
    CHECK(t1.has_grad(first.vars.w));
}

TEST_CASE("a terminal layer pools to a single row") {
    CcpLayer layer = layer_with(5, 1, 3, 2, 4);
    Rng rng(53);
    Tensor a = random_symmetric(5, rng);
    Tensor f = random_tensor({5, 2}, rng);
    Tape tape;
    LayerForwardOptions opts;
    LayerForward lf = layer_forward(tape, layer, tape.constant(a), tape.constant(f), 1, opts);
    CHECK(tape.value(lf.f_out).rows() == 1);
    CHECK(tape.value(lf.f_out).cols() == 4);
}

TEST_CASE("the unfrozen forward on the example graph matches its ranking tables") {
    const AffinityGraph g = ranking_example_graph();
    CcpLayer layer = layer_with(14, 3, 5, 2, 4);
    layer.u = ranking_example_logits();

    Rng rng(59);
    Tensor f = random_tensor({14, 2}, rng);
    Tape tape;
    LayerForwardOptions opts;
    LayerForward lf = layer_forward(tape, layer, tape.constant(g.affinity()), tape.constant(f), 1, opts);

    CHECK(lf.neighborhoods[0].members == std::vector<std::size_t>{2, 1, 3, 0, 5});
    CHECK(lf.neighborhoods[1].members == std::vector<std::size_t>{4, 7, 8, 5, 6});
    CHECK(lf.neighborhoods[2].members == std::vector<std::size_t>{11, 10, 12, 9, 13});
    // gate activations recorded for inspection
    for (const auto& nb : lf.neighborhoods) {
        REQUIRE(nb.gates.size() == 5);
        for (double gv : nb.gates) {
            CHECK(gv > 0.0);
            CHECK(gv < 1.0);
        }
    }
}

TEST_CASE("batched forward equals stacked single-sample forwards") {
    CcpLayer layer = layer_with(5, 2, 3, 2, 3);
    Rng rng(61);
    Tensor a = random_symmetric(5, rng);
    Tensor f1 = random_tensor({5, 2}, rng);
    Tensor f2 = random_tensor({5, 2}, rng);
    Tensor stacked({10, 2});
    std::copy(f1.data().begin(), f1.data().end(), stacked.data().begin());
    std::copy(f2.data().begin(), f2.data().end(), stacked.data().begin() + 10);

    LayerForwardOptions opts;
    Tape tb;
    const Tensor batched =
        tb.value(layer_forward(tb, layer, tb.constant(a), tb.constant(stacked), 2, opts).f_out);
    Tape ta;
    const Tensor alone1 =
        ta.value(layer_forward(ta, layer, ta.constant(a), ta.constant(f1), 1, opts).f_out);
    Tape tc;
    const Tensor alone2 =
        tc.value(layer_forward(tc, layer, tc.constant(a), tc.constant(f2), 1, opts).f_out);

    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(batched.at(k, j) == alone1.at(k, j));
            CHECK(batched.at(2 + k, j) == alone2.at(k, j));
        }
    }
}

TEST_CASE("random ordering keeps the member set but fixes a permutation") {
    CcpLayer layer = layer_with(6, 2, 4, 1, 2);
    Rng order_rng(67);
    assign_random_ordering(layer, order_rng);
    Rng rng(71);
    Tensor a = random_symmetric(6, rng);
    Tensor f = random_tensor({6, 1}, rng);

    LayerForwardOptions opts;
    Tape tape;
    LayerForward lf = layer_forward(tape, layer, tape.constant(a), tape.constant(f), 1, opts);
    Tensor k = tape.value(lf.coarsen.memberships);
    for (std::size_t c = 0; c < 2; ++c) {
        OrderedNeighborhood sorted_nb = select_neighborhood(a, k, c, 4);
        std::vector<std::size_t> got = lf.neighborhoods[c].members;
        std::vector<std::size_t> want = sorted_nb.members;
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        CHECK(got == want);
        // ranks still follow the members through the permutation
        for (std::size_t l = 0; l < 4; ++l) {
            const std::size_t member = lf.neighborhoods[c].members[l];
            CHECK(lf.neighborhoods[c].ranks[l] ==
                  doctest::Approx(rank(a, k, member, c)).epsilon(1e-12));
        }
    }

    // the same layer plays the same permutation again
    Tape tape2;
    LayerForward lf2 = layer_forward(tape2, layer, tape2.constant(a), tape2.constant(f), 1, opts);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(lf.neighborhoods[c].members == lf2.neighborhoods[c].members);
    }
}

// ---------------------------------------------------------------------------
// Gradient completeness
// ---------------------------------------------------------------------------

TEST_CASE("layer gradients match finite differences on a tie-free instance") {
    TieFreeInstance inst = tie_free_instance(73);

    Tape tape;
    LayerForwardOptions opts;
    LayerForward lf = layer_forward(tape, inst.layer, tape.constant(inst.a),
                                    tape.constant(inst.f), 1, opts);
    tape.backward(sum_all(lf.f_out));

    struct Target {
        const char* name;
        Tensor CcpLayer::* member;
        Var LayerVars::* leaf;
        double tol;
    };
    const Target targets[] = {
        {"U", &CcpLayer::u, &LayerVars::u, 1e-4},
        {"W", &CcpLayer::w, &LayerVars::w, 1e-6},  // output is linear in W
        {"b", &CcpLayer::b, &LayerVars::b, 1e-6},
        {"alpha", &CcpLayer::alpha, &LayerVars::alpha, 1e-4},
        {"beta", &CcpLayer::beta, &LayerVars::beta, 1e-4},
    };
    for (const Target& target : targets) {
        CAPTURE(target.name);
        const Tensor analytic = tape.grad(lf.vars.*(target.leaf));
        const Tensor fd = fd_gradient(
            [&](const Tensor& probe) {
                CcpLayer layer = inst.layer;
                layer.*(target.member) = probe;
                return layer_loss_value(layer, inst.a, inst.f);
            },
            inst.layer.*(target.member), 1e-5);
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            CAPTURE(i);
            CHECK(ccp::relative_error(analytic[i], fd[i]) < target.tol);
        }
    }
}

TEST_SUITE_END();
