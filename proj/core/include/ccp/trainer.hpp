#pragma once

#include <string>
#include <vector>

#include "ccp/adam.hpp"
#include "ccp/dataset.hpp"
#include "ccp/network.hpp"
#include "ccp/objectives.hpp"

namespace ccp {

struct TrainOptions {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    bool noise_injection = false;  // N(0, 0.01^2) added to training inputs
};

struct EpochMetrics {
    std::size_t epoch = 0;   // 1-based
    double train_loss = 0.0; // mean total objective over the epoch's batches
    double l0 = 0.0;         // mean task loss
    double lk = 0.0;         // mean clustering objective
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct EvalResult {
    double accuracy = 0.0;
    Tensor confusion;  // {classes, classes}, rows true, cols predicted
};

/// Mini-batch Adam training of a network on a dataset. Task gradients and
/// cluster gradients live on separate tapes, so the frozen-membership modes
/// reduce to marking U non-trainable on one of them.
class Trainer {
public:
    explicit Trainer(Network& net);

    std::vector<EpochMetrics> train(const GraphDataset& dataset, const TrainOptions& opts);

    /// One optimization step on the given sample indices; returns the loss
    /// pieces at the parameters before the update.
    LossBreakdown step(const GraphDataset& dataset, const std::vector<std::size_t>& batch_idx);

private:
    Network& net_;
    std::vector<AdamState> adam_;
    Rng train_rng_;
    double lambda_k_ = 0.0;
    bool u_on_task_tape_ = true;
    bool u_optimized_ = true;
    bool frozen_ = false;
    bool noise_on_ = false;
};

/// Deterministic accuracy and confusion matrix over the given sample indices
/// (dropout disabled). Throws when the dataset does not match the network.
EvalResult evaluate(Network& net, const GraphDataset& dataset,
                    const std::vector<std::size_t>& indices);

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history);
std::vector<EpochMetrics> read_metrics_csv(const std::string& path);

}  // namespace ccp
