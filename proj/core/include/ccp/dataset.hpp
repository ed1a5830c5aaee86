#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccp/graph.hpp"
#include "ccp/tensor.hpp"

namespace ccp {

/// How the shared graph was constructed; carried into checkpoints so the
/// cluster-map visualization knows the pixel layout.
struct GraphMeta {
    std::string kind = "custom";  // grid8 | spatiotemporal | custom
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t joints = 0;
    std::size_t frames = 0;
};

/// Signals on a fixed graph with labels and a train/test split.
struct GraphDataset {
    AffinityGraph graph;
    GraphMeta meta;
    std::vector<Tensor> signals;  // each {n, d_in}
    std::vector<std::size_t> labels;
    std::vector<std::string> class_names;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;

    std::size_t d_in() const { return signals.empty() ? 0 : signals.front().cols(); }
    std::size_t size() const { return signals.size(); }
};

/// Four shape classes rendered on a size x size grid8 graph at random
/// positions: horizontal bar, vertical bar, (wrapped) diagonal bar, and a
/// filled blob of matching mass. Intensity 1 on background 0 plus Gaussian
/// pixel noise. Split 80/20 by a seeded shuffle.
GraphDataset gen_grid_shapes(std::size_t size, std::size_t n_per_class, std::uint64_t seed,
                             double noise_sigma = 0.1);

/// Three motion classes (oscillation, drift, rotation) as 2-d trajectories of
/// a star skeleton on the joints x frames spatio-temporal graph.
GraphDataset gen_skeleton_motion(std::size_t joints, std::size_t frames,
                                 std::size_t n_per_class, std::uint64_t seed);

/// Replaces the graph while keeping the signals; used by the random-graph
/// ablation. The new graph is connected with matching node and edge counts.
GraphDataset with_random_graph(const GraphDataset& dataset, std::uint64_t seed);

/// Dataset directory layout: graph.txt (edge list), samples.bin (CCPD
/// binary), meta.json (class names, split, graph meta). Round trips are
/// bit-exact.
void save_dataset(const GraphDataset& dataset, const std::string& dir);
GraphDataset load_dataset(const std::string& dir);

}  // namespace ccp
