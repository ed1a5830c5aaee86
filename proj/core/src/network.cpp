#include "ccp/network.hpp"

#include <cmath>

#include "ccp/errors.hpp"

namespace ccp {

TrainMode parse_train_mode(const std::string& name) {
    if (name == "joint") return TrainMode::kJoint;
    if (name == "task-only") return TrainMode::kTaskOnly;
    if (name == "task-only-frozen-u") return TrainMode::kTaskOnlyFrozenU;
    if (name == "joint-frozen-u-from-task") return TrainMode::kJointFrozenUFromTask;
    throw ConfigError("unknown mode '" + name +
                      "' (expected joint | task-only | task-only-frozen-u | joint-frozen-u-from-task)");
}

Ordering parse_ordering(const std::string& name) {
    if (name == "centrality") return Ordering::kCentrality;
    if (name == "random") return Ordering::kRandom;
    throw ConfigError("unknown ordering '" + name + "' (expected centrality | random)");
}

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::kJoint: return "joint";
        case TrainMode::kTaskOnly: return "task-only";
        case TrainMode::kTaskOnlyFrozenU: return "task-only-frozen-u";
        case TrainMode::kJointFrozenUFromTask: return "joint-frozen-u-from-task";
    }
    return "?";
}

std::string to_string(Ordering ordering) {
    return ordering == Ordering::kCentrality ? "centrality" : "random";
}

namespace {

void validate_config(const NetworkConfig& cfg, std::size_t n) {
    if (cfg.layer_specs.empty()) throw ConfigError("network: no CCP layers");
    std::size_t k_in = n;
    for (const LayerSpec& spec : cfg.layer_specs) {
        if (spec.k_out >= k_in) {
            throw ConfigError("network: layer k_out values must be strictly decreasing (" +
                              std::to_string(spec.k_out) + " after " + std::to_string(k_in) + ")");
        }
        if (spec.k_out == 0 || spec.d_out == 0) {
            throw ConfigError("network: layer sizes must be positive");
        }
        if (spec.L == 0 || spec.L > k_in) {
            throw ConfigError("network: L " + std::to_string(spec.L) + " must be in [1, " +
                              std::to_string(k_in) + "]");
        }
        k_in = spec.k_out;
    }
    if (cfg.layer_specs.back().k_out != 1) {
        throw ConfigError("network: last layer must pool to a single cluster");
    }
    if (cfg.classes < 2) throw ConfigError("network: need at least two classes");
    if (cfg.fc_width == 0) throw ConfigError("network: fc_width must be positive");
    if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0) {
        throw ConfigError("network: dropout must be in [0, 1)");
    }
}

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t({rows, cols});
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

Network::Network(NetworkConfig cfg, const AffinityGraph& graph, std::size_t d_in)
    : cfg_(std::move(cfg)), graph_(graph), d_in_(d_in) {
    validate_config(cfg_, graph_.node_count());

    Rng init = Rng(cfg_.seed).stream(0x696e6974);  // "init"
    std::size_t k_in = graph_.node_count();
    std::size_t feat = d_in_;
    for (const LayerSpec& spec : cfg_.layer_specs) {
        layers_.push_back(make_ccp_layer(k_in, spec.k_out, spec.L, feat, spec.d_out, init));
        k_in = spec.k_out;
        feat = spec.d_out;
    }
    if (cfg_.ordering == Ordering::kRandom) {
        Rng order_rng = Rng(cfg_.seed).stream(0x6f726465);  // "orde"
        for (CcpLayer& layer : layers_) assign_random_ordering(layer, order_rng);
    }

    fc1_w_ = glorot(feat, cfg_.fc_width, init);
    fc1_b_ = Tensor({1, cfg_.fc_width});
    fc2_w_ = glorot(cfg_.fc_width, cfg_.classes, init);
    fc2_b_ = Tensor({1, cfg_.classes});
}

std::vector<Network::ParamRef> Network::params() {
    std::vector<ParamRef> out;
    for (std::size_t m = 0; m < layers_.size(); ++m) {
        const std::string prefix = "layer" + std::to_string(m + 1) + ".";
        out.push_back({prefix + "U", &layers_[m].u, false, true});
        out.push_back({prefix + "W", &layers_[m].w, true, false});
        out.push_back({prefix + "b", &layers_[m].b, false, false});
        out.push_back({prefix + "alpha", &layers_[m].alpha, false, false});
        out.push_back({prefix + "beta", &layers_[m].beta, false, false});
    }
    out.push_back({"fc1.W", &fc1_w_, true, false});
    out.push_back({"fc1.b", &fc1_b_, false, false});
    out.push_back({"fc2.W", &fc2_w_, true, false});
    out.push_back({"fc2.b", &fc2_b_, false, false});
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t count = 0;
    for (const CcpLayer& layer : layers_) {
        count += layer.u.size() + layer.w.size() + layer.b.size() + 2;
    }
    count += fc1_w_.size() + fc1_b_.size() + fc2_w_.size() + fc2_b_.size();
    return count;
}

Network::Forward Network::forward(Tape& tape, const Tensor& stacked_signals, std::size_t batch,
                                  bool training, Rng* dropout_rng, bool u_trainable, bool frozen) {
    const std::size_t n = graph_.node_count();
    if (batch == 0 || stacked_signals.rank() != 2 || stacked_signals.rows() != batch * n ||
        stacked_signals.cols() != d_in_) {
        throw ShapeError("network forward: signals " + stacked_signals.shape_str() +
                         " do not match " + std::to_string(batch) + " samples of [" +
                         std::to_string(n) + "x" + std::to_string(d_in_) + "]");
    }

    Forward fwd;
    Var a = tape.constant(graph_.affinity());
    Var f = tape.constant(stacked_signals);

    LayerForwardOptions opts;
    opts.u_trainable = u_trainable;
    opts.frozen = frozen;
    for (CcpLayer& layer : layers_) {
        LayerForward lf = layer_forward(tape, layer, a, f, batch, opts);
        a = lf.coarsen.a_norm;
        f = lf.f_out;
        fwd.param_leaves.push_back(lf.vars.u);
        fwd.param_leaves.push_back(lf.vars.w);
        fwd.param_leaves.push_back(lf.vars.b);
        fwd.param_leaves.push_back(lf.vars.alpha);
        fwd.param_leaves.push_back(lf.vars.beta);
        fwd.layers.push_back(std::move(lf));
    }

    // f is {batch, d_last} once the stack has pooled to a single cluster
    Var fc1_w = tape.leaf(fc1_w_, true);
    Var fc1_b = tape.leaf(fc1_b_, true);
    Var fc2_w = tape.leaf(fc2_w_, true);
    Var fc2_b = tape.leaf(fc2_b_, true);

    const bool use_dropout = training && cfg_.dropout_p > 0.0;
    if (use_dropout && dropout_rng == nullptr) {
        throw Error("network forward: dropout requires an rng in training mode");
    }
    Var h = f;
    if (use_dropout) h = dropout(h, cfg_.dropout_p, dropout_rng->next_u64());
    h = elu(add_rowvec(matmul(h, fc1_w), fc1_b));
    if (use_dropout) h = dropout(h, cfg_.dropout_p, dropout_rng->next_u64());
    fwd.logits = add_rowvec(matmul(h, fc2_w), fc2_b);

    fwd.param_leaves.push_back(fc1_w);
    fwd.param_leaves.push_back(fc1_b);
    fwd.param_leaves.push_back(fc2_w);
    fwd.param_leaves.push_back(fc2_b);
    return fwd;
}

Network::ClusterObjective Network::cluster_objective(Tape& tape, bool u_trainable) {
    ClusterObjective obj;
    Var a0 = tape.constant(graph_.affinity());
    std::vector<Var> memberships;
    memberships.reserve(layers_.size());
    for (CcpLayer& layer : layers_) {
        Var u = tape.leaf(layer.u, u_trainable);
        obj.u_leaves.push_back(u);
        memberships.push_back(row_softmax(u));
    }
    obj.loss = cluster_loss_chain(a0, memberships, kVolumeEps, &obj.level_terms);
    return obj;
}

void Network::freeze_hierarchy() {
    const Tensor* a = &graph_.affinity();
    for (CcpLayer& layer : layers_) {
        layer.frozen.reset();
        a = &freeze_layer(layer, *a);
    }
}

Network build_network(const NetworkConfig& cfg, const AffinityGraph& graph, std::size_t d_in) {
    return Network(cfg, graph, d_in);
}

}  // namespace ccp
