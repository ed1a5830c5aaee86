#include "ccp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccp/errors.hpp"

namespace ccp {

namespace {

Tensor stack_signals(const GraphDataset& dataset, const std::vector<std::size_t>& indices,
                     Rng* noise_rng) {
    const std::size_t n = dataset.graph.node_count();
    const std::size_t d = dataset.d_in();
    Tensor out({indices.size() * n, d});
    std::size_t row = 0;
    for (std::size_t idx : indices) {
        const Tensor& s = dataset.signals[idx];
        std::copy(s.data().begin(), s.data().end(), out.data().begin() + row * n * d);
        row += 1;
    }
    if (noise_rng) {
        for (double& v : out.data()) v += noise_rng->normal(0.0, 0.01);
    }
    return out;
}

std::vector<std::size_t> batch_labels(const GraphDataset& dataset,
                                      const std::vector<std::size_t>& indices) {
    std::vector<std::size_t> labels;
    labels.reserve(indices.size());
    for (std::size_t idx : indices) labels.push_back(dataset.labels[idx]);
    return labels;
}

void check_compatible(const Network& net, const GraphDataset& dataset) {
    if (dataset.graph.node_count() != net.graph().node_count()) {
        throw Error("dataset graph has " + std::to_string(dataset.graph.node_count()) +
                    " nodes, network expects " + std::to_string(net.graph().node_count()));
    }
    if (dataset.d_in() != net.input_dim()) {
        throw Error("dataset signals have " + std::to_string(dataset.d_in()) +
                    " features, network expects " + std::to_string(net.input_dim()));
    }
    if (dataset.class_names.size() != net.config().classes) {
        throw Error("dataset has " + std::to_string(dataset.class_names.size()) +
                    " classes, network expects " + std::to_string(net.config().classes));
    }
}

}  // namespace

Trainer::Trainer(Network& net)
    : net_(net), train_rng_(Rng(net.config().seed).stream(0x74726169)) {  // "trai"
    for (auto& p : net_.params()) {
        adam_.emplace_back(p.tensor->shape());
    }
    const TrainMode mode = net_.config().mode;
    lambda_k_ = net_.config().lambda_k;
    if (mode == TrainMode::kTaskOnly || mode == TrainMode::kTaskOnlyFrozenU) lambda_k_ = 0.0;
    u_on_task_tape_ =
        mode == TrainMode::kJoint || mode == TrainMode::kTaskOnly;
    u_optimized_ = mode != TrainMode::kTaskOnlyFrozenU;
    frozen_ = mode == TrainMode::kTaskOnlyFrozenU;
    if (frozen_) net_.freeze_hierarchy();
}

LossBreakdown Trainer::step(const GraphDataset& dataset,
                            const std::vector<std::size_t>& batch_idx) {
    auto params = net_.params();

    // task tape: cross entropy plus l2 on kernels and FC weights
    Tape task_tape;
    Rng* noise = nullptr;
    Rng noise_rng(0);
    if (noise_on_) {
        noise_rng = Rng(train_rng_.next_u64());
        noise = &noise_rng;
    }
    const Tensor batch = stack_signals(dataset, batch_idx, noise);
    Network::Forward fwd = net_.forward(task_tape, batch, batch_idx.size(), true, &train_rng_,
                                        u_on_task_tape_, frozen_);
    Var ce = cross_entropy(fwd.logits, batch_labels(dataset, batch_idx));
    Var task_total = ce;
    if (net_.config().weight_decay > 0.0) {
        Var sq;
        bool first = true;
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i].weight_decayed) continue;
            Var leaf = fwd.param_leaves[i];
            Var flat = leaf;
            if (task_tape.value(leaf).rank() != 2) {
                flat = reshape(leaf, {task_tape.value(leaf).size(), 1});
            }
            Var term = sum_all(mul(flat, flat));
            sq = first ? term : add(sq, term);
            first = false;
        }
        task_total = add(ce, scalar_mul(sq, net_.config().weight_decay));
    }
    task_tape.backward(task_total);

    // cluster tape: the multi-level objective, maximized
    Tape cluster_tape;
    Network::ClusterObjective cluster =
        net_.cluster_objective(cluster_tape, u_optimized_);
    if (lambda_k_ != 0.0) cluster_tape.backward(cluster.loss);

    LossBreakdown breakdown;
    breakdown.task = task_tape.value(ce)[0];
    breakdown.cluster = cluster_tape.value(cluster.loss)[0];
    breakdown.reg = task_tape.value(task_total)[0] - breakdown.task;
    breakdown.total = breakdown.task - lambda_k_ * breakdown.cluster + breakdown.reg;
    for (Var term : cluster.level_terms) {
        breakdown.per_level.push_back(cluster_tape.value(term)[0]);
    }

    std::size_t u_index = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (p.is_membership) {
            const std::size_t level = u_index++;
            if (!u_optimized_) continue;
            Tensor grad = Tensor::zeros(p.tensor->shape());
            if (u_on_task_tape_ && task_tape.has_grad(fwd.param_leaves[i])) {
                grad = task_tape.grad(fwd.param_leaves[i]);
            }
            if (lambda_k_ != 0.0) {
                const Tensor cg = cluster_tape.grad(cluster.u_leaves[level]);
                for (std::size_t j = 0; j < grad.size(); ++j) grad[j] -= lambda_k_ * cg[j];
            }
            adam_step(adam_[i], *p.tensor, grad, net_.config().learning_rate);
        } else {
            adam_step(adam_[i], *p.tensor, task_tape.grad(fwd.param_leaves[i]),
                      net_.config().learning_rate);
        }
    }
    return breakdown;
}

std::vector<EpochMetrics> Trainer::train(const GraphDataset& dataset, const TrainOptions& opts) {
    check_compatible(net_, dataset);
    if (dataset.train_idx.empty() || dataset.test_idx.empty()) {
        throw Error("train: dataset must provide non-empty train and test splits");
    }
    noise_on_ = opts.noise_injection;

    std::vector<EpochMetrics> history;
    std::vector<std::size_t> order = dataset.train_idx;
    for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
        train_rng_.shuffle(order);
        double sum_total = 0.0, sum_task = 0.0, sum_lk = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
            const std::size_t stop = std::min(start + opts.batch_size, order.size());
            std::vector<std::size_t> batch_idx(order.begin() + start, order.begin() + stop);
            LossBreakdown loss;
            try {
                loss = step(dataset, batch_idx);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batches) + ": " + e.what());
            }
            sum_total += loss.total;
            sum_task += loss.task;
            sum_lk += loss.cluster;
            ++batches;
        }
        EpochMetrics row;
        row.epoch = epoch;
        row.train_loss = sum_total / batches;
        row.l0 = sum_task / batches;
        row.lk = sum_lk / batches;
        row.train_acc = evaluate(net_, dataset, dataset.train_idx).accuracy;
        row.test_acc = evaluate(net_, dataset, dataset.test_idx).accuracy;
        history.push_back(row);
    }
    return history;
}

EvalResult evaluate(Network& net, const GraphDataset& dataset,
                    const std::vector<std::size_t>& indices) {
    check_compatible(net, dataset);
    const std::size_t classes = net.config().classes;
    EvalResult result;
    result.confusion = Tensor({classes, classes});
    if (indices.empty()) return result;

    const bool frozen = net.config().mode == TrainMode::kTaskOnlyFrozenU;
    std::size_t correct = 0;
    const std::size_t chunk = 64;
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
        const std::size_t stop = std::min(start + chunk, indices.size());
        std::vector<std::size_t> batch_idx(indices.begin() + start, indices.begin() + stop);
        Tape tape;
        const Tensor batch = stack_signals(dataset, batch_idx, nullptr);
        Network::Forward fwd =
            net.forward(tape, batch, batch_idx.size(), false, nullptr, false, frozen);
        const Tensor& logits = tape.value(fwd.logits);
        for (std::size_t r = 0; r < batch_idx.size(); ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes; ++c) {
                if (logits.at(r, c) > logits.at(r, best)) best = c;
            }
            const std::size_t truth = dataset.labels[batch_idx[r]];
            result.confusion.at(truth, best) += 1.0;
            if (best == truth) ++correct;
        }
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
    return result;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    std::fprintf(f, "epoch,train_loss,L0,LK,train_acc,test_acc\n");
    for (const EpochMetrics& row : history) {
        std::fprintf(f, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", row.epoch, row.train_loss,
                     row.l0, row.lk, row.train_acc, row.test_acc);
    }
    std::fclose(f);
}

std::vector<EpochMetrics> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty metrics file");
    std::vector<EpochMetrics> history;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochMetrics row;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        if (!(ss >> row.epoch >> row.train_loss >> row.l0 >> row.lk >> row.train_acc >>
              row.test_acc)) {
            throw IoError(path + ": malformed metrics line '" + line + "'");
        }
        history.push_back(row);
    }
    return history;
}

}  // namespace ccp
