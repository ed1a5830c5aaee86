#pragma once

#include <utility>
#include <vector>

#include "ccp/tape.hpp"
#include "ccp/tensor.hpp"

namespace ccp {

inline constexpr double kVolumeEps = 1e-8;

/// All pieces of the training objective for one step.
/// total = task - lambda_k * cluster + reg.
struct LossBreakdown {
    double task = 0.0;
    double cluster = 0.0;
    double reg = 0.0;
    double total = 0.0;
    std::vector<double> per_level;  // half-sum of cohesion/volume ratios per level
};

// ---------------------------------------------------------------------------
// Value-level objectives (no tape). The matrix A is the affinity of the level
// being partitioned; its diagonal is excluded from cohesion sums.
// ---------------------------------------------------------------------------

/// Twice the soft-weighted internal edge mass of cluster k:
/// 2 * sum over unordered pairs i<j of K_ik K_jk A_ij.
double cohesion(const Tensor& a, const Tensor& memberships, std::size_t k);

/// Degree-weighted soft mass of cluster k: sum_i D_i K_ik.
double volume(const std::vector<double>& degrees, const Tensor& memberships, std::size_t k);

/// Half-sum of cohesion/volume ratios over clusters, volumes floored at eps.
double objective_c(const Tensor& a, const Tensor& memberships, double eps);

/// Multi-level clustering objective: sum of objective_c over the provided
/// (affinity, membership) pairs. Level m's affinity is expected to be the
/// unnormalized coarsened output of level m-1.
double cluster_loss(const std::vector<std::pair<Tensor, Tensor>>& levels, double eps = kVolumeEps);

/// Mean negative log of the softmax probability of the true class.
double cross_entropy_value(const Tensor& logits, const std::vector<std::size_t>& labels);

/// Combines the pieces; `kernel_sq_norms` holds ||W||^2 of every array that
/// weight decay applies to (kernels and FC weights; never U, gates, biases).
LossBreakdown total_loss(double task, double cluster, const std::vector<double>& kernel_sq_norms,
                         double lambda_k, double weight_decay,
                         std::vector<double> per_level = {});

// ---------------------------------------------------------------------------
// Tape-level objectives, used when gradients must reach the membership logits.
// ---------------------------------------------------------------------------

struct ObjectiveNode {
    Var value;      // scalar: half-sum of ratios at this level
    Var coarsened;  // unnormalized K^T (A - diag A) K, input of the next level
};

ObjectiveNode objective_c_node(Var a, Var memberships, double eps);

/// Chains objective_c over levels starting at a0: level m partitions the
/// unnormalized coarsened affinity produced by level m-1.
Var cluster_loss_chain(Var a0, const std::vector<Var>& memberships, double eps,
                       std::vector<Var>* level_terms = nullptr);

}  // namespace ccp
