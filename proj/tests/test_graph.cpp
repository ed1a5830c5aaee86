#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ccp/errors.hpp"
#include "ccp/graph.hpp"
#include "support.hpp"

using namespace ccp;

TEST_SUITE_BEGIN("graph_core");

namespace {

void check_builder_invariants(const AffinityGraph& g) {
    const Tensor& a = g.affinity();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        CHECK(a.at(i, i) == 0.0);
        for (std::size_t j = 0; j < g.node_count(); ++j) {
            CHECK(a.at(i, j) >= 0.0);
            CHECK(a.at(i, j) == a.at(j, i));
        }
    }
    // stored degrees match a recomputation exactly
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < g.node_count(); ++j) d += a.at(i, j);
        CHECK(g.degree(i) == d);
    }
}

}  // namespace

TEST_CASE("grid8 on 2x2 is the complete graph on four nodes") {
    AffinityGraph g = build_grid8(2, 2);
    CHECK(g.node_count() == 4);
    CHECK(g.edge_count() == 6);
    check_builder_invariants(g);
}

TEST_CASE("grid8 on 3x3 has the expected degrees") {
    AffinityGraph g = build_grid8(3, 3);
    CHECK(g.degree(4) == 8.0);  // center
    CHECK(g.degree(0) == 3.0);  // corner
    CHECK(g.degree(1) == 5.0);  // edge midpoint
}

TEST_CASE("grid8 at image scale has 1024 nodes") {
    AffinityGraph g = build_grid8(32, 32);
    CHECK(g.node_count() == 1024);
    CHECK(g.connected());
}

TEST_CASE("grid8 rejects zero dimensions") {
    CHECK_THROWS_AS(build_grid8(0, 5), Error);
}

TEST_CASE("spatio-temporal graph on two joints and two frames") {
    AffinityGraph g = build_spatiotemporal(2, 2, {{0, 1}});
    CHECK(g.node_count() == 4);
    CHECK(g.edge_count() == 4);  // two spatial, two temporal
    check_builder_invariants(g);
}

TEST_CASE("spatio-temporal graph at skeleton-sequence scale has 2000 nodes") {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t j = 1; j < 25; ++j) edges.emplace_back(j - 1, j);
    AffinityGraph g = build_spatiotemporal(25, 80, edges);
    CHECK(g.node_count() == 2000);
}

TEST_CASE("a single frame leaves only the skeleton edges") {
    AffinityGraph g = build_spatiotemporal(3, 1, {{0, 1}, {1, 2}});
    CHECK(g.node_count() == 3);
    CHECK(g.edge_count() == 2);
}

TEST_CASE("spatio-temporal rejects invalid joints") {
    CHECK_THROWS_AS(build_spatiotemporal(2, 2, {{0, 5}}), Error);
}

TEST_CASE("random isomorphic graph of a path must be a path") {
    Tensor p3({3, 3});
    p3.at(0, 1) = p3.at(1, 0) = 1.0;
    p3.at(1, 2) = p3.at(2, 1) = 1.0;
    AffinityGraph g = build_random_isomorphic(AffinityGraph(p3), 5);
    CHECK(g.node_count() == 3);
    CHECK(g.edge_count() == 2);
    CHECK(g.connected());
}

TEST_CASE("random isomorphic graph preserves node and edge counts of grid8(4,4)") {
    AffinityGraph tmpl = build_grid8(4, 4);
    // independent enumeration: pairs at Chebyshev distance one
    std::size_t expected = 0;
    for (std::size_t a = 0; a < 16; ++a) {
        for (std::size_t b = a + 1; b < 16; ++b) {
            const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(a / 4) - static_cast<std::ptrdiff_t>(b / 4);
            const std::ptrdiff_t dc = static_cast<std::ptrdiff_t>(a % 4) - static_cast<std::ptrdiff_t>(b % 4);
            if (std::max(std::abs(dr), std::abs(dc)) == 1) ++expected;
        }
    }
    CHECK(expected == 42);
    CHECK(tmpl.edge_count() == expected);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        AffinityGraph g = build_random_isomorphic(tmpl, seed);
        CHECK(g.node_count() == 16);
        CHECK(g.edge_count() == 42);
        CHECK(g.connected());
        check_builder_invariants(g);
    }
}

TEST_CASE("random isomorphic graphs are deterministic in the seed") {
    AffinityGraph tmpl = build_grid8(4, 4);
    AffinityGraph a = build_random_isomorphic(tmpl, 77);
    AffinityGraph b = build_random_isomorphic(tmpl, 77);
    CHECK(a.affinity().data() == b.affinity().data());
}

TEST_CASE("random isomorphic rejects disconnected templates") {
    Tensor sparse({3, 3});
    sparse.at(0, 1) = sparse.at(1, 0) = 1.0;  // node 2 isolated
    CHECK_THROWS_AS(build_random_isomorphic(AffinityGraph(sparse), 1), Error);
}

TEST_CASE("normalize leaves a single unit edge unchanged") {
    Tensor a = Tensor::from_rows({{0, 1}, {1, 0}});
    Tensor n = normalize_affinity(a, 1e-8);
    CHECK(n.at(0, 1) == doctest::Approx(1.0));
    CHECK(n.at(0, 0) == 0.0);
}

TEST_CASE("normalize divides a regular graph by its degree") {
    // 4-cycle: every node has degree 2
    Tensor a({4, 4});
    for (std::size_t i = 0; i < 4; ++i) {
        a.at(i, (i + 1) % 4) = 1.0;
        a.at((i + 1) % 4, i) = 1.0;
    }
    Tensor n = normalize_affinity(a, 1e-8);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(n[i] == doctest::Approx(a[i] / 2.0));
    }
}

TEST_CASE("normalize on the 3-path gives 1/sqrt(2) off-diagonals") {
    Tensor a({3, 3});
    a.at(0, 1) = a.at(1, 0) = 1.0;
    a.at(1, 2) = a.at(2, 1) = 1.0;
    Tensor n = normalize_affinity(a, 1e-8);
    CHECK(n.at(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(n.at(1, 2) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("normalize preserves symmetry and zero pattern, entries stay in [0,1]") {
    AffinityGraph g = build_grid8(5, 4);
    Tensor n = normalize_affinity(g.affinity(), 1e-8);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        for (std::size_t j = 0; j < g.node_count(); ++j) {
            CHECK(n.at(i, j) == n.at(j, i));
            CHECK((g.affinity().at(i, j) == 0.0) == (n.at(i, j) == 0.0));
            CHECK(n.at(i, j) >= 0.0);
            CHECK(n.at(i, j) <= 1.0);
        }
    }
}

TEST_CASE("normalize rejects negative entries") {
    Tensor a = Tensor::from_rows({{0, -1}, {-1, 0}});
    CHECK_THROWS_AS(normalize_affinity(a, 1e-8), Error);
}

TEST_CASE("edge list round trip is exact for unit weights") {
    AffinityGraph g = build_grid8(4, 3);
    const std::string path = (std::filesystem::temp_directory_path() / "ccp_graph_rt.txt").string();
    save_edge_list(g, path);
    AffinityGraph back = load_edge_list(path);
    CHECK(back.node_count() == g.node_count());
    CHECK(back.affinity().data() == g.affinity().data());
    std::filesystem::remove(path);
}

TEST_CASE("edge list loader reports truncation") {
    const std::string path = (std::filesystem::temp_directory_path() / "ccp_graph_bad.txt").string();
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fprintf(f, "3 2\n0 1 1\n");  // header promises two edges
    std::fclose(f);
    CHECK_THROWS_AS(load_edge_list(path), IoError);
    std::filesystem::remove(path);
}

TEST_SUITE_END();
