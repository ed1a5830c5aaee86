#pragma once

#include <string>
#include <vector>

#include "ccp/dataset.hpp"
#include "ccp/network.hpp"
#include "ccp/trainer.hpp"

namespace ccp {

/// Checkpoint directory layout:
///   manifest.json   config echo, epoch count, metric history, array names
///   graph.txt       the training graph as an edge list
///   <name>.bin      one flat binary per array: magic CCP1, u32 rank,
///                   u32 dims[rank], little-endian f64 values
/// Array names follow the parameter registry: layer{m}.{U,W,b,alpha,beta},
/// fc{1,2}.{W,b}. Round trips are bit-exact.
void save_checkpoint(const std::string& dir, Network& net, const GraphMeta& graph_meta,
                     const std::vector<std::string>& class_names,
                     const std::vector<EpochMetrics>& history);

struct LoadedCheckpoint {
    Network net;
    GraphMeta graph_meta;
    std::vector<std::string> class_names;
    std::vector<EpochMetrics> history;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

/// Single-array helpers shared with tests and tools.
void save_array(const std::string& path, const Tensor& tensor);
Tensor load_array(const std::string& path);

}  // namespace ccp
