#include "ccp/objectives.hpp"

#include <cmath>

#include "ccp/errors.hpp"

namespace ccp {

double cohesion(const Tensor& a, const Tensor& memberships, std::size_t k) {
    const std::size_t n = a.rows();
    if (memberships.rows() != n) {
        throw ShapeError("cohesion: memberships " + memberships.shape_str() +
                         " vs affinity " + a.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ki = memberships.at(i, k);
        if (ki == 0.0) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            acc += ki * memberships.at(j, k) * a.at(i, j);
        }
    }
    return 2.0 * acc;
}

double volume(const std::vector<double>& degrees, const Tensor& memberships, std::size_t k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < degrees.size(); ++i) {
        acc += degrees[i] * memberships.at(i, k);
    }
    return acc;
}

double objective_c(const Tensor& a, const Tensor& memberships, double eps) {
    const std::size_t n = a.rows();
    std::vector<double> degrees(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) d += a.at(i, j);
        degrees[i] = d;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < memberships.cols(); ++k) {
        acc += cohesion(a, memberships, k) /
               std::max(volume(degrees, memberships, k), eps);
    }
    return 0.5 * acc;
}

double cluster_loss(const std::vector<std::pair<Tensor, Tensor>>& levels, double eps) {
    double acc = 0.0;
    for (const auto& [a, k] : levels) acc += objective_c(a, k, eps);
    return acc;
}

double cross_entropy_value(const Tensor& logits, const std::vector<std::size_t>& labels) {
    Tape tape;
    Var z = tape.constant(logits);
    return tape.value(cross_entropy(z, labels))[0];
}

LossBreakdown total_loss(double task, double cluster, const std::vector<double>& kernel_sq_norms,
                         double lambda_k, double weight_decay, std::vector<double> per_level) {
    LossBreakdown out;
    out.task = task;
    out.cluster = cluster;
    for (double sq : kernel_sq_norms) out.reg += weight_decay * sq;
    out.total = task - lambda_k * cluster + out.reg;
    out.per_level = std::move(per_level);
    return out;
}

ObjectiveNode objective_c_node(Var a, Var memberships, double eps) {
    Var azd = zero_diag(a);
    Var coarsened = matmul(transpose(memberships), matmul(azd, memberships));
    Var coh = diag_vec(coarsened);
    Var vol = matmul(transpose(memberships), sum_rows(a));
    Var ratios = div(coh, clamp_min(vol, eps));
    return ObjectiveNode{scalar_mul(sum_all(ratios), 0.5), coarsened};
}

Var cluster_loss_chain(Var a0, const std::vector<Var>& memberships, double eps,
                       std::vector<Var>* level_terms) {
    if (memberships.empty()) throw Error("cluster_loss_chain: no levels");
    Var level_a = a0;
    Var total;
    for (std::size_t m = 0; m < memberships.size(); ++m) {
        ObjectiveNode node = objective_c_node(level_a, memberships[m], eps);
        if (level_terms) level_terms->push_back(node.value);
        total = m == 0 ? node.value : add(total, node.value);
        level_a = node.coarsened;
    }
    return total;
}

}  // namespace ccp
