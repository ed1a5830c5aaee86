#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccp/graph.hpp"
#include "ccp/layer.hpp"
#include "ccp/objectives.hpp"
#include "ccp/rng.hpp"
#include "ccp/tape.hpp"

namespace ccp {

/// Objective and gradient-masking modes.
///   kJoint:              minimize L0 - lambda_k * LK, full gradients
///   kTaskOnly:           lambda_k = 0
///   kTaskOnlyFrozenU:    lambda_k = 0 and U receives no gradient at all
///   kJointFrozenUFromTask: both losses, the task gradient on U is dropped
enum class TrainMode { kJoint, kTaskOnly, kTaskOnlyFrozenU, kJointFrozenUFromTask };

enum class Ordering { kCentrality, kRandom };

TrainMode parse_train_mode(const std::string& name);
Ordering parse_ordering(const std::string& name);
std::string to_string(TrainMode mode);
std::string to_string(Ordering ordering);

struct LayerSpec {
    std::size_t k_out = 0;
    std::size_t d_out = 0;
    std::size_t L = 0;
};

struct NetworkConfig {
    std::vector<LayerSpec> layer_specs;  // strictly decreasing k_out, last is 1
    std::size_t fc_width = 32;
    std::size_t classes = 2;
    double dropout_p = 0.5;
    double lambda_k = 1.0;
    double weight_decay = 1e-4;
    double learning_rate = 1e-3;
    TrainMode mode = TrainMode::kJoint;
    Ordering ordering = Ordering::kCentrality;
    std::uint64_t seed = 0;
};

/// A stack of CCP layers ending at a single cluster, followed by two fully
/// connected layers producing class logits.
class Network {
public:
    Network(NetworkConfig cfg, const AffinityGraph& graph, std::size_t d_in);

    const NetworkConfig& config() const { return cfg_; }
    const AffinityGraph& graph() const { return graph_; }
    std::size_t input_dim() const { return d_in_; }

    std::vector<CcpLayer>& layers() { return layers_; }
    const std::vector<CcpLayer>& layers() const { return layers_; }

    /// Named trainable arrays in a fixed order: layer{m}.{U,W,b,alpha,beta}
    /// for m = 1..M, then fc1.W, fc1.b, fc2.W, fc2.b.
    struct ParamRef {
        std::string name;
        Tensor* tensor;
        bool weight_decayed;  // kernels and FC weights only
        bool is_membership;   // U logits
    };
    std::vector<ParamRef> params();
    std::size_t parameter_count() const;

    struct Forward {
        Var logits;
        std::vector<LayerForward> layers;
        std::vector<Var> param_leaves;  // aligned with params() order
    };

    /// Runs the stack on `batch` signals stacked into {batch*n, d_in}.
    /// Dropout is applied to the fully connected inputs in training mode;
    /// its masks are drawn from `dropout_rng`.
    Forward forward(Tape& tape, const Tensor& stacked_signals, std::size_t batch,
                    bool training, Rng* dropout_rng, bool u_trainable, bool frozen);

    /// The multi-level clustering objective on its own tape, chained over the
    /// unnormalized coarsened affinities.
    struct ClusterObjective {
        Var loss;
        std::vector<Var> u_leaves;
        std::vector<Var> level_terms;
    };
    ClusterObjective cluster_objective(Tape& tape, bool u_trainable);

    /// Precomputes the frozen hierarchy for the whole stack.
    void freeze_hierarchy();

private:
    NetworkConfig cfg_;
    AffinityGraph graph_;
    std::size_t d_in_;
    std::vector<CcpLayer> layers_;
    Tensor fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

/// Validates the config against the graph and builds the network with all
/// parameters drawn from cfg.seed (identical seeds give identical networks).
Network build_network(const NetworkConfig& cfg, const AffinityGraph& graph, std::size_t d_in);

}  // namespace ccp
