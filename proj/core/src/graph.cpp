#include "ccp/graph.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ccp/errors.hpp"
#include "ccp/rng.hpp"

namespace ccp {

AffinityGraph::AffinityGraph(Tensor affinity) : a_(std::move(affinity)) {
    if (a_.rank() != 2 || a_.rows() != a_.cols()) {
        throw ShapeError("affinity matrix must be square, got " + a_.shape_str());
    }
    n_ = a_.rows();
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            const double w = a_.at(i, j);
            if (w < 0.0) {
                throw Error("affinity entry (" + std::to_string(i) + "," +
                            std::to_string(j) + ") is negative");
            }
            if (w != a_.at(j, i)) {
                throw Error("affinity matrix is not symmetric at (" +
                            std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    degrees_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n_; ++j) d += a_.at(i, j);
        degrees_[i] = d;
    }
}

std::size_t AffinityGraph::edge_count() const {
    std::size_t m = 0;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = i + 1; j < n_; ++j)
            if (a_.at(i, j) > 0.0) ++m;
    return m;
}

bool AffinityGraph::connected() const {
    if (n_ == 0) return true;
    std::vector<char> seen(n_, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < n_; ++v) {
            if (!seen[v] && a_.at(u, v) > 0.0) {
                seen[v] = 1;
                ++reached;
                stack.push_back(v);
            }
        }
    }
    return reached == n_;
}

AffinityGraph build_grid8(std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) {
        throw Error("build_grid8: dimensions must be positive");
    }
    const std::size_t n = width * height;
    Tensor a({n, n});
    auto id = [width](std::size_t r, std::size_t c) { return r * width + c; };
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(r) + dr;
                    const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(c) + dc;
                    if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(height) ||
                        nc >= static_cast<std::ptrdiff_t>(width)) {
                        continue;
                    }
                    a.at(id(r, c), id(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc))) = 1.0;
                }
            }
        }
    }
    return AffinityGraph(std::move(a));
}

AffinityGraph build_spatiotemporal(std::size_t joints, std::size_t frames,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& skeleton_edges) {
    if (joints == 0 || frames == 0) {
        throw Error("build_spatiotemporal: joints and frames must be positive");
    }
    for (const auto& [i, j] : skeleton_edges) {
        if (i >= joints || j >= joints || i == j) {
            throw Error("build_spatiotemporal: invalid skeleton edge (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }
    const std::size_t n = joints * frames;
    Tensor a({n, n});
    auto id = [joints](std::size_t t, std::size_t j) { return t * joints + j; };
    for (std::size_t t = 0; t < frames; ++t) {
        for (const auto& [i, j] : skeleton_edges) {
            a.at(id(t, i), id(t, j)) = 1.0;
            a.at(id(t, j), id(t, i)) = 1.0;
        }
    }
    for (std::size_t t = 0; t + 1 < frames; ++t) {
        for (std::size_t j = 0; j < joints; ++j) {
            a.at(id(t, j), id(t + 1, j)) = 1.0;
            a.at(id(t + 1, j), id(t, j)) = 1.0;
        }
    }
    return AffinityGraph(std::move(a));
}

AffinityGraph build_random_isomorphic(const AffinityGraph& tmpl, std::uint64_t seed) {
    const std::size_t n = tmpl.node_count();
    const std::size_t m = tmpl.edge_count();
    if (m + 1 < n) {
        throw Error("build_random_isomorphic: template has fewer than n-1 edges");
    }
    if (!tmpl.connected()) {
        throw Error("build_random_isomorphic: template graph is not connected");
    }

    Rng rng(seed);
    Tensor a({n, n});
    std::set<std::pair<std::size_t, std::size_t>> edges;
    auto insert_edge = [&](std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        if (edges.insert({i, j}).second) {
            a.at(i, j) = 1.0;
            a.at(j, i) = 1.0;
            return true;
        }
        return false;
    };

    // random spanning tree over a shuffled node order
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 1; i < n; ++i) {
        insert_edge(order[i], order[rng.uniform_int(i)]);
    }
    // extra edges sampled uniformly among the remaining pairs
    while (edges.size() < m) {
        const std::size_t i = rng.uniform_int(n);
        const std::size_t j = rng.uniform_int(n);
        if (i == j) continue;
        insert_edge(i, j);
    }
    return AffinityGraph(std::move(a));
}

Tensor normalize_affinity(const Tensor& a, double eps) {
    if (a.rank() != 2 || a.rows() != a.cols()) {
        throw ShapeError("normalize: matrix must be square, got " + a.shape_str());
    }
    const std::size_t n = a.rows();
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = a.at(i, j);
            if (w < 0.0) {
                throw Error("normalize: entry (" + std::to_string(i) + "," +
                            std::to_string(j) + ") is negative");
            }
            d += w;
        }
        inv_sqrt[i] = 1.0 / std::sqrt(std::max(d, eps));
    }
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.at(i, j) = inv_sqrt[i] * a.at(i, j) * inv_sqrt[j];
    return out;
}

void save_edge_list(const AffinityGraph& graph, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    const std::size_t n = graph.node_count();
    std::fprintf(f, "%zu %zu\n", n, graph.edge_count());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double w = graph.affinity().at(i, j);
            if (w > 0.0) std::fprintf(f, "%zu %zu %.17g\n", i, j, w);
        }
    }
    std::fclose(f);
}

AffinityGraph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::size_t n = 0, m = 0;
    if (!(in >> n >> m)) throw IoError(path + ": malformed header, expected 'n m'");
    Tensor a({n, n});
    for (std::size_t e = 0; e < m; ++e) {
        std::size_t i = 0, j = 0;
        double w = 0.0;
        if (!(in >> i >> j >> w)) {
            throw IoError(path + ": truncated edge list at edge " + std::to_string(e));
        }
        if (i >= n || j >= n) {
            throw IoError(path + ": edge " + std::to_string(e) + " references node out of range");
        }
        a.at(i, j) = w;
        a.at(j, i) = w;
    }
    return AffinityGraph(std::move(a));
}

}  // namespace ccp
