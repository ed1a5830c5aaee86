#include "support.hpp"

#include "ccp/adam.hpp"
#include "ccp/objectives.hpp"
#include "ccp/tape.hpp"

namespace testsupport {

namespace {

/// Cholesky solve of (X^T X + lambda I) w = X^T y.
std::vector<double> ridge_solve(std::vector<std::vector<double>>& gram,
                                std::vector<double> rhs) {
    const std::size_t d = rhs.size();
    // in-place LL^T factorization
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = gram[i][j];
            for (std::size_t k = 0; k < j; ++k) sum -= gram[i][k] * gram[j][k];
            gram[i][j] = i == j ? std::sqrt(sum) : sum / gram[j][j];
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        double sum = rhs[i];
        for (std::size_t k = 0; k < i; ++k) sum -= gram[i][k] * rhs[k];
        rhs[i] = sum / gram[i][i];
    }
    for (std::size_t i = d; i-- > 0;) {
        double sum = rhs[i];
        for (std::size_t k = i + 1; k < d; ++k) sum -= gram[k][i] * rhs[k];
        rhs[i] = sum / gram[i][i];
    }
    return rhs;
}

}  // namespace

double linear_baseline_accuracy(const std::vector<ccp::Tensor>& signals,
                                const std::vector<std::size_t>& labels,
                                const std::vector<std::size_t>& train_idx,
                                const std::vector<std::size_t>& test_idx, std::size_t classes) {
    const std::size_t d = signals.front().size() + 1;  // + bias column
    std::vector<std::vector<double>> gram(d, std::vector<double>(d, 0.0));
    for (std::size_t idx : train_idx) {
        const auto& x = signals[idx].data();
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = i + 1 == d ? 1.0 : x[i];
            for (std::size_t j = 0; j <= i; ++j) {
                gram[i][j] += xi * (j + 1 == d ? 1.0 : x[j]);
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        gram[i][i] += 1e-6;
        for (std::size_t j = i + 1; j < d; ++j) gram[i][j] = gram[j][i];
    }

    std::vector<std::vector<double>> weights(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> rhs(d, 0.0);
        for (std::size_t idx : train_idx) {
            const double y = labels[idx] == c ? 1.0 : 0.0;
            const auto& x = signals[idx].data();
            for (std::size_t i = 0; i < d; ++i) rhs[i] += (i + 1 == d ? 1.0 : x[i]) * y;
        }
        auto gram_copy = gram;
        weights[c] = ridge_solve(gram_copy, std::move(rhs));
    }

    std::size_t correct = 0;
    for (std::size_t idx : test_idx) {
        const auto& x = signals[idx].data();
        std::size_t best = 0;
        double best_score = -1e300;
        for (std::size_t c = 0; c < classes; ++c) {
            double score = weights[c][d - 1];
            for (std::size_t i = 0; i + 1 < d; ++i) score += weights[c][i] * x[i];
            if (score > best_score) {
                best_score = score;
                best = c;
            }
        }
        if (best == labels[idx]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_idx.size());
}

bool recovers_two_cliques(std::uint64_t seed, std::size_t steps, double lr) {
    const ccp::AffinityGraph graph = two_clique_graph();
    ccp::Rng rng(seed);
    ccp::Tensor u({8, 2});
    for (double& v : u.data()) v = rng.normal(0.0, 0.01);

    ccp::AdamState adam(u.shape());
    for (std::size_t step = 0; step < steps; ++step) {
        ccp::Tape tape;
        ccp::Var logits = tape.leaf(u, true);
        ccp::Var objective = ccp::cluster_loss_chain(tape.constant(graph.affinity()),
                                                     {ccp::row_softmax(logits)}, 1e-8);
        tape.backward(objective);
        ccp::Tensor grad = tape.grad(logits);
        for (double& g : grad.data()) g = -g;  // ascend
        ccp::adam_step(adam, u, grad, lr);
    }

    ccp::Tape tape;
    const ccp::Tensor k = tape.value(ccp::row_softmax(tape.constant(u)));
    auto argmax_row = [&](std::size_t i) -> std::size_t { return k.at(i, 0) >= k.at(i, 1) ? 0 : 1; };
    const std::size_t first = argmax_row(0);
    for (std::size_t i = 1; i < 4; ++i) {
        if (argmax_row(i) != first) return false;
    }
    for (std::size_t i = 4; i < 8; ++i) {
        if (argmax_row(i) == first) return false;
    }
    return true;
}

}  // namespace testsupport
