// Command-line driver: dataset generation, training, evaluation, the three
// ablation grids, and cluster-map visualization. See README for the config
// schema; unknown config keys are rejected.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccp/checkpoint.hpp"
#include "ccp/dataset.hpp"
#include "ccp/errors.hpp"
#include "ccp/network.hpp"
#include "ccp/trainer.hpp"
#include "ccp/viz.hpp"

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ccp::ConfigError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw ccp::ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ccp::IoError("cannot open config '" + path + "'");
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw ccp::ConfigError(path + ": " + e.what());
    }
    check_keys(cfg, {"dataset", "network", "train", "ablate", "eval", "inspect"}, "config");
    return cfg;
}

// ---------------------------------------------------------------------------
// Config sections
// ---------------------------------------------------------------------------

ccp::GraphDataset make_dataset(const json& cfg, std::optional<std::uint64_t> seed_override) {
    if (!cfg.contains("dataset")) throw ccp::ConfigError("config has no 'dataset' section");
    const json& d = cfg.at("dataset");
    check_keys(d, {"kind", "size", "n_per_class", "noise_sigma", "joints", "frames", "path", "seed"},
               "dataset");
    const std::string kind = d.value("kind", "grid_shapes");
    const std::uint64_t seed = seed_override.value_or(d.value("seed", 0ULL));
    if (kind == "grid_shapes") {
        return ccp::gen_grid_shapes(d.value("size", 16ULL), d.value("n_per_class", 200ULL), seed,
                                    d.value("noise_sigma", 0.1));
    }
    if (kind == "skeleton_motion") {
        return ccp::gen_skeleton_motion(d.value("joints", 9ULL), d.value("frames", 16ULL),
                                        d.value("n_per_class", 100ULL), seed);
    }
    if (kind == "file") {
        if (!d.contains("path")) throw ccp::ConfigError("dataset.kind=file requires 'path'");
        return ccp::load_dataset(d.at("path").get<std::string>());
    }
    throw ccp::ConfigError("unknown dataset.kind '" + kind +
                           "' (expected grid_shapes | skeleton_motion | file)");
}

struct TrainSettings {
    ccp::NetworkConfig net;
    ccp::TrainOptions opts;
    bool random_graph = false;
};

TrainSettings make_settings(const json& cfg, const ccp::GraphDataset& dataset) {
    TrainSettings s;
    if (!cfg.contains("network")) throw ccp::ConfigError("config has no 'network' section");
    const json& n = cfg.at("network");
    check_keys(n, {"layers", "fc_width", "dropout"}, "network");
    if (!n.contains("layers")) throw ccp::ConfigError("network.layers is required");
    for (const json& layer : n.at("layers")) {
        check_keys(layer, {"k_out", "d_out", "L"}, "network.layers[]");
        s.net.layer_specs.push_back({layer.at("k_out").get<std::size_t>(),
                                     layer.at("d_out").get<std::size_t>(),
                                     layer.at("L").get<std::size_t>()});
    }
    s.net.fc_width = n.value("fc_width", 32ULL);
    s.net.dropout_p = n.value("dropout", 0.5);
    s.net.classes = dataset.class_names.size();

    const json t = cfg.contains("train") ? cfg.at("train") : json::object();
    check_keys(t,
               {"epochs", "batch_size", "learning_rate", "weight_decay", "lambda_k", "mode",
                "ordering", "graph", "noise_injection", "seed"},
               "train");
    s.net.learning_rate = t.value("learning_rate", 1e-3);
    s.net.weight_decay = t.value("weight_decay", 1e-4);
    s.net.lambda_k = t.value("lambda_k", 1.0);
    s.net.mode = ccp::parse_train_mode(t.value("mode", "joint"));
    s.net.ordering = ccp::parse_ordering(t.value("ordering", "centrality"));
    s.net.seed = t.value("seed", 1ULL);
    s.opts.epochs = t.value("epochs", 50ULL);
    s.opts.batch_size = t.value("batch_size", 32ULL);
    s.opts.noise_injection = t.value("noise_injection", false);

    const std::string graph = t.value("graph", "structured");
    if (graph == "random") {
        s.random_graph = true;
    } else if (graph != "structured") {
        throw ccp::ConfigError("unknown train.graph '" + graph + "' (expected structured | random)");
    }
    return s;
}

struct CliOverrides {
    std::string mode, ordering, graph;
    std::int64_t seed = -1;
    int level = -1;
};

void apply_overrides(TrainSettings& s, const CliOverrides& o) {
    if (!o.mode.empty()) s.net.mode = ccp::parse_train_mode(o.mode);
    if (!o.ordering.empty()) s.net.ordering = ccp::parse_ordering(o.ordering);
    if (!o.graph.empty()) {
        if (o.graph == "random") {
            s.random_graph = true;
        } else if (o.graph == "structured") {
            s.random_graph = false;
        } else {
            throw ccp::ConfigError("unknown --graph '" + o.graph + "'");
        }
    }
    if (o.seed >= 0) s.net.seed = static_cast<std::uint64_t>(o.seed);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct RunOutcome {
    std::vector<ccp::EpochMetrics> history;
    double final_test_acc = 0.0;
    double final_lk = 0.0;
};

RunOutcome run_training(ccp::GraphDataset dataset, TrainSettings s,
                        const std::string& out_dir = "") {
    if (s.random_graph) {
        dataset = ccp::with_random_graph(dataset, s.net.seed ^ 0x67726170);  // "grap"
    }
    ccp::Network net = ccp::build_network(s.net, dataset.graph, dataset.d_in());
    ccp::Trainer trainer(net);
    RunOutcome outcome;
    outcome.history = trainer.train(dataset, s.opts);
    outcome.final_test_acc = outcome.history.back().test_acc;
    outcome.final_lk = outcome.history.back().lk;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        ccp::write_metrics_csv(out_dir + "/metrics.csv", outcome.history);
        ccp::save_checkpoint(out_dir + "/model.ckpt", net, dataset.meta, dataset.class_names,
                             outcome.history);
    }
    return outcome;
}

int cmd_gen(const json& cfg, const std::string& out_dir, const CliOverrides& o) {
    std::optional<std::uint64_t> seed;
    if (o.seed >= 0) seed = static_cast<std::uint64_t>(o.seed);
    ccp::GraphDataset dataset = make_dataset(cfg, seed);
    const std::string dir = out_dir + "/dataset";
    ccp::save_dataset(dataset, dir);
    std::printf("wrote %zu samples (%zu classes, %zu nodes) to %s\n", dataset.size(),
                dataset.class_names.size(), dataset.graph.node_count(), dir.c_str());
    return 0;
}

int cmd_train(const json& cfg, const std::string& out_dir, const CliOverrides& o) {
    ccp::GraphDataset dataset = make_dataset(cfg, std::nullopt);
    TrainSettings s = make_settings(cfg, dataset);
    apply_overrides(s, o);
    RunOutcome outcome = run_training(std::move(dataset), s, out_dir);
    for (const auto& row : outcome.history) {
        std::printf("epoch %3zu  loss %9.5f  L0 %8.5f  LK %8.5f  train %6.4f  test %6.4f\n",
                    row.epoch, row.train_loss, row.l0, row.lk, row.train_acc, row.test_acc);
    }
    std::printf("final test accuracy %.4f; wrote %s/metrics.csv and %s/model.ckpt\n",
                outcome.final_test_acc, out_dir.c_str(), out_dir.c_str());
    return 0;
}

int cmd_eval(const json& cfg, const std::string& out_dir, const CliOverrides&) {
    if (!cfg.contains("eval")) throw ccp::ConfigError("config has no 'eval' section");
    const json& e = cfg.at("eval");
    check_keys(e, {"checkpoint"}, "eval");
    ccp::LoadedCheckpoint loaded = ccp::load_checkpoint(e.at("checkpoint").get<std::string>());
    ccp::GraphDataset dataset = make_dataset(cfg, std::nullopt);
    ccp::EvalResult result = ccp::evaluate(loaded.net, dataset, dataset.test_idx);

    std::printf("test accuracy: %.4f over %zu samples\n", result.accuracy,
                dataset.test_idx.size());
    std::printf("confusion (rows true, cols predicted):\n");
    const std::size_t c = loaded.net.config().classes;
    for (std::size_t i = 0; i < c; ++i) {
        std::printf("  %-16s", dataset.class_names[i].c_str());
        for (std::size_t j = 0; j < c; ++j) {
            std::printf(" %6.0f", result.confusion.at(i, j));
        }
        std::printf("\n");
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        json report;
        report["accuracy"] = result.accuracy;
        report["confusion"] = json::array();
        for (std::size_t i = 0; i < c; ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < c; ++j) row.push_back(result.confusion.at(i, j));
            report["confusion"].push_back(row);
        }
        std::ofstream out(out_dir + "/eval.json");
        out << report.dump(2) << "\n";
    }
    return 0;
}

int cmd_inspect(const json& cfg, const std::string& out_dir, const CliOverrides& o) {
    if (!cfg.contains("inspect")) throw ccp::ConfigError("config has no 'inspect' section");
    const json& i = cfg.at("inspect");
    check_keys(i, {"checkpoint", "level"}, "inspect");
    ccp::LoadedCheckpoint loaded = ccp::load_checkpoint(i.at("checkpoint").get<std::string>());
    const std::size_t level =
        o.level > 0 ? static_cast<std::size_t>(o.level) : i.value("level", 1ULL);

    if (loaded.graph_meta.kind != "grid8") {
        throw ccp::Error("inspect: cluster maps are defined for grid graphs only, checkpoint has '" +
                         loaded.graph_meta.kind + "'");
    }
    const auto assignment = ccp::cluster_assignments(loaded.net, level);
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/clusters_level" + std::to_string(level) + ".ppm";
    ccp::write_ppm(path, assignment, loaded.graph_meta.width, loaded.graph_meta.height,
                   loaded.net.layers()[level - 1].k_out);
    const double contiguity =
        ccp::cluster_contiguity(assignment, loaded.graph_meta.width, loaded.graph_meta.height);
    std::printf("wrote %s (contiguity %.4f)\n", path.c_str(), contiguity);
    return 0;
}

int cmd_ablate(const json& cfg, const std::string& out_dir, const CliOverrides& o) {
    const json a = cfg.contains("ablate") ? cfg.at("ablate") : json::object();
    check_keys(a, {"seeds", "epochs", "jobs"}, "ablate");
    const std::size_t seeds = a.value("seeds", 5ULL);
    const std::size_t jobs = std::max<std::size_t>(1, a.value("jobs", 1ULL));
    ccp::GraphDataset base_dataset = make_dataset(cfg, std::nullopt);
    TrainSettings base = make_settings(cfg, base_dataset);
    apply_overrides(base, o);
    if (a.contains("epochs")) base.opts.epochs = a.at("epochs").get<std::size_t>();

    struct Cell {
        ccp::TrainMode mode;
        ccp::Ordering ordering;
        bool random_graph;
        std::vector<double> accs;
    };
    std::vector<Cell> cells;
    for (ccp::TrainMode mode :
         {ccp::TrainMode::kJoint, ccp::TrainMode::kTaskOnly, ccp::TrainMode::kTaskOnlyFrozenU,
          ccp::TrainMode::kJointFrozenUFromTask}) {
        for (ccp::Ordering ordering : {ccp::Ordering::kCentrality, ccp::Ordering::kRandom}) {
            for (bool random_graph : {false, true}) {
                cells.push_back({mode, ordering, random_graph, {}});
            }
        }
    }
    for (Cell& cell : cells) cell.accs.resize(seeds, 0.0);

    struct Job {
        std::size_t cell;
        std::size_t seed_slot;
    };
    std::vector<Job> job_list;
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (std::size_t s = 0; s < seeds; ++s) job_list.push_back({c, s});

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t j = next.fetch_add(1);
            if (j >= job_list.size()) return;
            const Job job = job_list[j];
            Cell& cell = cells[job.cell];
            TrainSettings s = base;
            s.net.mode = cell.mode;
            s.net.ordering = cell.ordering;
            s.random_graph = cell.random_graph;
            s.net.seed = base.net.seed + job.seed_slot;
            RunOutcome outcome = run_training(base_dataset, s);
            cell.accs[job.seed_slot] = outcome.final_test_acc;
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::filesystem::create_directories(out_dir);
    std::FILE* report = std::fopen((out_dir + "/report.csv").c_str(), "w");
    if (!report) throw ccp::IoError("cannot open '" + out_dir + "/report.csv' for writing");
    std::fprintf(report, "mode,ordering,graph,mean_acc,std_acc,seeds\n");
    std::printf("%-26s %-11s %-11s %8s %8s\n", "mode", "ordering", "graph", "mean", "std");
    for (const Cell& cell : cells) {
        double mean = 0.0;
        for (double v : cell.accs) mean += v;
        mean /= static_cast<double>(seeds);
        double var = 0.0;
        for (double v : cell.accs) var += (v - mean) * (v - mean);
        const double stddev = seeds > 1 ? std::sqrt(var / static_cast<double>(seeds - 1)) : 0.0;
        const std::string graph_name = cell.random_graph ? "random" : "structured";
        std::fprintf(report, "%s,%s,%s,%.6f,%.6f,%zu\n", ccp::to_string(cell.mode).c_str(),
                     ccp::to_string(cell.ordering).c_str(), graph_name.c_str(), mean, stddev,
                     seeds);
        std::printf("%-26s %-11s %-11s %8.4f %8.4f\n", ccp::to_string(cell.mode).c_str(),
                    ccp::to_string(cell.ordering).c_str(), graph_name.c_str(), mean, stddev);
    }
    std::fclose(report);
    std::printf("wrote %s/report.csv\n", out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convolutional cluster pooling for signals on a fixed graph"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    CliOverrides overrides;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", overrides.seed, "seed override");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a dataset and save it");
    add_common(gen);
    CLI::App* train = app.add_subcommand("train", "train a network, write checkpoint and metrics");
    add_common(train);
    train->add_option("--mode", overrides.mode,
                      "joint | task-only | task-only-frozen-u | joint-frozen-u-from-task");
    train->add_option("--ordering", overrides.ordering, "centrality | random");
    train->add_option("--graph", overrides.graph, "structured | random");
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the dataset's test split");
    add_common(eval);
    CLI::App* ablate = app.add_subcommand("ablate", "run the mode/ordering/graph ablation grid");
    add_common(ablate);
    CLI::App* inspect = app.add_subcommand("inspect", "write a cluster-assignment pixmap");
    add_common(inspect);
    inspect->add_option("--level", overrides.level, "hierarchy level (1-based)");

    CLI11_PARSE(app, argc, argv);

    try {
        const json cfg = load_config(config_path);
        if (gen->parsed()) return cmd_gen(cfg, out_dir, overrides);
        if (train->parsed()) return cmd_train(cfg, out_dir, overrides);
        if (eval->parsed()) return cmd_eval(cfg, out_dir, overrides);
        if (ablate->parsed()) return cmd_ablate(cfg, out_dir, overrides);
        if (inspect->parsed()) return cmd_inspect(cfg, out_dir, overrides);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
