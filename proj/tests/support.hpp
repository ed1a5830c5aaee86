// Shared fixtures and independent oracles for the test suites. Everything
// here evaluates the definitions directly (nested loops, exhaustive
// enumeration, finite differences) so it stays independent of the library's
// computation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ccp/graph.hpp"
#include "ccp/rng.hpp"
#include "ccp/tensor.hpp"

namespace testsupport {

inline ccp::Tensor random_symmetric(std::size_t n, ccp::Rng& rng, double lo = 0.1,
                                    double hi = 1.0) {
    ccp::Tensor a({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double w = rng.uniform(lo, hi);
            a.at(i, j) = w;
            a.at(j, i) = w;
        }
    }
    return a;
}

inline ccp::Tensor random_stochastic(std::size_t rows, std::size_t cols, ccp::Rng& rng) {
    ccp::Tensor k({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            k.at(i, j) = rng.uniform(0.05, 1.0);
            sum += k.at(i, j);
        }
        for (std::size_t j = 0; j < cols; ++j) k.at(i, j) /= sum;
    }
    return k;
}

inline ccp::Tensor random_tensor(std::vector<std::size_t> shape, ccp::Rng& rng, double lo = -1.0,
                                 double hi = 1.0) {
    ccp::Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

/// Central finite differences of a scalar function over every element.
inline ccp::Tensor fd_gradient(const std::function<double(const ccp::Tensor&)>& f,
                               const ccp::Tensor& at, double step) {
    ccp::Tensor grad(at.shape());
    ccp::Tensor probe = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + step;
        const double fp = f(probe);
        probe[i] = saved - step;
        const double fm = f(probe);
        probe[i] = saved;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

/// Entrywise coarse affinity by the explicit double sum:
/// out[k,k'] = sum_i K_ik sum_{j != i} K_jk' A_ij.
inline ccp::Tensor coarse_affinity_oracle(const ccp::Tensor& a, const ccp::Tensor& k) {
    const std::size_t n = a.rows(), c = k.cols();
    ccp::Tensor out({c, c});
    for (std::size_t p = 0; p < c; ++p) {
        for (std::size_t q = 0; q < c; ++q) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i == j) continue;
                    acc += k.at(i, p) * k.at(j, q) * a.at(i, j);
                }
            }
            out.at(p, q) = acc;
        }
    }
    return out;
}

/// Cohesion by the unordered-pair loop: 2 * sum_{i<j} K_ik K_jk A_ij.
inline double cohesion_pair_oracle(const ccp::Tensor& a, const ccp::Tensor& k, std::size_t cluster) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.rows(); ++j) {
            acc += k.at(i, cluster) * k.at(j, cluster) * a.at(i, j);
        }
    }
    return 2.0 * acc;
}

/// Exhaustive subset argmax of the summed ranks; ties resolved to the
/// lexicographically smallest index set.
inline std::vector<std::size_t> best_subset_oracle(const std::vector<double>& ranks,
                                                   std::size_t L) {
    const std::size_t n = ranks.size();
    std::vector<std::size_t> best;
    double best_sum = -1.0;
    std::vector<std::size_t> subset(L);
    std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t start,
                                                                std::size_t depth) {
        if (depth == L) {
            double sum = 0.0;
            for (std::size_t i : subset) sum += ranks[i];
            if (sum > best_sum + 1e-15 || (std::fabs(sum - best_sum) <= 1e-15 &&
                                           (best.empty() || subset < best))) {
                best_sum = sum;
                best = subset;
            }
            return;
        }
        for (std::size_t i = start; i + (L - depth) <= n; ++i) {
            subset[depth] = i;
            recurse(i + 1, depth + 1);
        }
    };
    recurse(0, 0);
    return best;
}

/// Worked ranking example: a 14-node unit-weight graph with three hard
/// clusters of sizes 4, 5, 5 and two bridge edges. Under hard memberships
/// the rank of a member is twice its within-cluster degree and the rank of
/// an outsider is its cross-degree, so the ordered neighborhoods can be read
/// off the construction.
inline ccp::AffinityGraph ranking_example_graph() {
    ccp::Tensor a({14, 14});
    auto edge = [&](std::size_t i, std::size_t j) {
        a.at(i, j) = 1.0;
        a.at(j, i) = 1.0;
    };
    // cluster 1: nodes 0..3
    edge(0, 2);
    edge(1, 2);
    edge(2, 3);
    edge(1, 3);
    // cluster 2: nodes 4..8, hub at 4
    edge(4, 5);
    edge(4, 6);
    edge(4, 7);
    edge(4, 8);
    edge(7, 8);
    edge(5, 7);
    edge(6, 8);
    // cluster 3: nodes 9..13, hub at 11
    edge(11, 9);
    edge(11, 10);
    edge(11, 12);
    edge(11, 13);
    edge(10, 12);
    edge(9, 10);
    edge(12, 13);
    // bridges keeping the graph connected
    edge(0, 5);
    edge(8, 9);
    return ccp::AffinityGraph(std::move(a));
}

/// Near-hard membership logits (+/-30) for the example's three clusters.
inline ccp::Tensor ranking_example_logits() {
    ccp::Tensor u({14, 3});
    for (std::size_t i = 0; i < 14; ++i) {
        const std::size_t cluster = i < 4 ? 0 : (i < 9 ? 1 : 2);
        for (std::size_t k = 0; k < 3; ++k) u.at(i, k) = k == cluster ? 30.0 : -30.0;
    }
    return u;
}

/// Two 4-cliques joined by a single bridge edge (nodes 3-4).
inline ccp::AffinityGraph two_clique_graph() {
    ccp::Tensor a({8, 8});
    auto edge = [&](std::size_t i, std::size_t j) {
        a.at(i, j) = 1.0;
        a.at(j, i) = 1.0;
    };
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) edge(i, j);
    for (std::size_t i = 4; i < 8; ++i)
        for (std::size_t j = i + 1; j < 8; ++j) edge(i, j);
    edge(3, 4);
    return ccp::AffinityGraph(std::move(a));
}

/// One-vs-all ridge regression on flattened signals; the linear baseline for
/// the synthetic grid task. Returns test accuracy.
double linear_baseline_accuracy(const std::vector<ccp::Tensor>& signals,
                                const std::vector<std::size_t>& labels,
                                const std::vector<std::size_t>& train_idx,
                                const std::vector<std::size_t>& test_idx, std::size_t classes);

/// Adam ascent on the single-level clustering objective over the two-clique
/// bridge graph from logits ~ N(0, 0.01^2); true when the argmax memberships
/// split exactly along the cliques.
bool recovers_two_cliques(std::uint64_t seed, std::size_t steps = 500, double lr = 0.05);

}  // namespace testsupport
