#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ccp/tensor.hpp"

namespace ccp {

/// The fixed domain shared by every sample: a symmetric nonnegative affinity
/// matrix with its degree vector. Immutable after construction and freely
/// shareable across threads.
class AffinityGraph {
public:
    /// Validates symmetry and nonnegativity, recomputes degrees.
    explicit AffinityGraph(Tensor affinity);

    std::size_t node_count() const { return n_; }
    const Tensor& affinity() const { return a_; }

    /// Degree of node i: sum of row i of the affinity matrix.
    double degree(std::size_t i) const { return degrees_[i]; }
    const std::vector<double>& degrees() const { return degrees_; }

    /// Number of undirected edges (unordered pairs with positive weight).
    std::size_t edge_count() const;

    /// True when a BFS from node 0 reaches every node.
    bool connected() const;

private:
    std::size_t n_ = 0;
    Tensor a_;
    std::vector<double> degrees_;
};

/// width x height pixel grid where every pixel links to its horizontal,
/// vertical and diagonal neighbours with unit weight.
AffinityGraph build_grid8(std::size_t width, std::size_t height);

/// joints x frames graph: per-frame skeleton edges plus unit edges linking
/// the same joint in adjacent frames. Node (joint j, frame t) has index
/// t * joints + j.
AffinityGraph build_spatiotemporal(std::size_t joints, std::size_t frames,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& skeleton_edges);

/// Connected unit-weight graph with the same node and edge counts as the
/// template, generated deterministically from the seed (random spanning
/// tree plus uniformly sampled extra edges).
AffinityGraph build_random_isomorphic(const AffinityGraph& tmpl, std::uint64_t seed);

/// Symmetric degree normalization: D^{-1/2} A D^{-1/2} with each degree
/// floored at eps. Rejects matrices with negative entries.
Tensor normalize_affinity(const Tensor& a, double eps);

/// Text edge list: header "n m", then one "i j w" line per undirected edge.
void save_edge_list(const AffinityGraph& graph, const std::string& path);
AffinityGraph load_edge_list(const std::string& path);

}  // namespace ccp
