// Microbenchmarks for the hot paths: dense matmul, the cluster step, a full
// layer forward, and one training step at desk scale.

#include <benchmark/benchmark.h>

#include "ccp/dataset.hpp"
#include "ccp/layer.hpp"
#include "ccp/network.hpp"
#include "ccp/rng.hpp"
#include "ccp/tape.hpp"
#include "ccp/trainer.hpp"

namespace {

ccp::Tensor random_matrix(std::size_t rows, std::size_t cols, ccp::Rng& rng) {
    ccp::Tensor t({rows, cols});
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_Matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    ccp::Rng rng(1);
    ccp::Tensor a = random_matrix(n, n, rng);
    ccp::Tensor b = random_matrix(n, n, rng);
    ccp::Tensor c({n, n});
    for (auto _ : state) {
        ccp::matmul_into(a, b, c);
        benchmark::DoNotOptimize(c.data().data());
    }
    state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256)->Complexity();

void BM_ClusterStep(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    ccp::AffinityGraph graph = ccp::build_grid8(n, n);
    ccp::Rng rng(2);
    ccp::Tensor u = random_matrix(graph.node_count(), graph.node_count() / 8, rng);
    for (auto _ : state) {
        ccp::Tape tape;
        auto step = ccp::cluster_step(tape.constant(graph.affinity()), tape.constant(u));
        benchmark::DoNotOptimize(tape.value(step.a_norm).data().data());
    }
}
BENCHMARK(BM_ClusterStep)->Arg(8)->Arg(16);

void BM_LayerForwardBackward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    ccp::AffinityGraph graph = ccp::build_grid8(16, 16);
    ccp::Rng rng(3);
    ccp::CcpLayer layer = ccp::make_ccp_layer(256, 32, 8, 1, 12, rng);
    ccp::Tensor f = random_matrix(batch * 256, 1, rng);
    for (auto _ : state) {
        ccp::Tape tape;
        ccp::LayerForwardOptions opts;
        auto lf = ccp::layer_forward(tape, layer, tape.constant(graph.affinity()),
                                     tape.constant(f), batch, opts);
        tape.backward(ccp::sum_all(lf.f_out));
        benchmark::DoNotOptimize(tape.grad(lf.vars.w).data().data());
    }
}
BENCHMARK(BM_LayerForwardBackward)->Arg(1)->Arg(8)->Arg(32);

void BM_TrainStep(benchmark::State& state) {
    ccp::GraphDataset data = ccp::gen_grid_shapes(16, 40, 7);
    ccp::NetworkConfig cfg;
    cfg.layer_specs = {{32, 12, 8}, {8, 24, 6}, {1, 48, 4}};
    cfg.fc_width = 32;
    cfg.classes = 4;
    cfg.seed = 7;
    ccp::Network net = ccp::build_network(cfg, data.graph, 1);
    ccp::Trainer trainer(net);
    std::vector<std::size_t> batch(data.train_idx.begin(), data.train_idx.begin() + 32);
    for (auto _ : state) {
        benchmark::DoNotOptimize(trainer.step(data, batch).total);
    }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
