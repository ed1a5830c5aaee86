#include "ccp/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ccp/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint array format is little-endian");

namespace ccp {

namespace {

constexpr char kArrayMagic[4] = {'C', 'C', 'P', '1'};

nlohmann::json config_to_json(const NetworkConfig& cfg) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerSpec& spec : cfg.layer_specs) {
        layers.push_back({{"k_out", spec.k_out}, {"d_out", spec.d_out}, {"L", spec.L}});
    }
    return {{"layers", layers},
            {"fc_width", cfg.fc_width},
            {"classes", cfg.classes},
            {"dropout", cfg.dropout_p},
            {"lambda_k", cfg.lambda_k},
            {"weight_decay", cfg.weight_decay},
            {"learning_rate", cfg.learning_rate},
            {"mode", to_string(cfg.mode)},
            {"ordering", to_string(cfg.ordering)},
            {"seed", cfg.seed}};
}

NetworkConfig config_from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    for (const auto& layer : j.at("layers")) {
        cfg.layer_specs.push_back({layer.at("k_out").get<std::size_t>(),
                                   layer.at("d_out").get<std::size_t>(),
                                   layer.at("L").get<std::size_t>()});
    }
    cfg.fc_width = j.at("fc_width").get<std::size_t>();
    cfg.classes = j.at("classes").get<std::size_t>();
    cfg.dropout_p = j.at("dropout").get<double>();
    cfg.lambda_k = j.at("lambda_k").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.mode = parse_train_mode(j.at("mode").get<std::string>());
    cfg.ordering = parse_ordering(j.at("ordering").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

}  // namespace

void save_array(const std::string& path, const Tensor& tensor) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    std::fwrite(kArrayMagic, 1, 4, f);
    const std::uint32_t rank = static_cast<std::uint32_t>(tensor.rank());
    std::fwrite(&rank, sizeof(rank), 1, f);
    for (std::size_t d : tensor.shape()) {
        const std::uint32_t dim = static_cast<std::uint32_t>(d);
        std::fwrite(&dim, sizeof(dim), 1, f);
    }
    std::fwrite(tensor.data().data(), sizeof(double), tensor.size(), f);
    std::fclose(f);
}

Tensor load_array(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    auto fail = [&](const std::string& msg) -> IoError {
        std::fclose(f);
        return IoError(path + ": " + msg);
    };
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::string(magic, 4) != std::string(kArrayMagic, 4)) {
        throw fail("bad magic, expected CCP1");
    }
    std::uint32_t rank = 0;
    if (std::fread(&rank, sizeof(rank), 1, f) != 1) throw fail("truncated rank");
    if (rank > 8) throw fail("implausible rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint32_t dim = 0;
        if (std::fread(&dim, sizeof(dim), 1, f) != 1) throw fail("truncated shape");
        shape[i] = dim;
        total *= dim;
    }
    Tensor tensor(shape);
    if (std::fread(tensor.data().data(), sizeof(double), total, f) != total) {
        throw fail("truncated values, expected " + std::to_string(total));
    }
    std::fclose(f);
    return tensor;
}

void save_checkpoint(const std::string& dir, Network& net, const GraphMeta& graph_meta,
                     const std::vector<std::string>& class_names,
                     const std::vector<EpochMetrics>& history) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_edge_list(net.graph(), dir + "/graph.txt");

    nlohmann::json manifest;
    manifest["format"] = "ccp-checkpoint-v1";
    manifest["epoch"] = history.size();
    manifest["d_in"] = net.input_dim();
    manifest["network"] = config_to_json(net.config());
    manifest["graph"] = {{"kind", graph_meta.kind},
                         {"width", graph_meta.width},
                         {"height", graph_meta.height},
                         {"joints", graph_meta.joints},
                         {"frames", graph_meta.frames}};
    manifest["class_names"] = class_names;

    nlohmann::json rows = nlohmann::json::array();
    for (const EpochMetrics& m : history) {
        rows.push_back({{"epoch", m.epoch},
                        {"train_loss", m.train_loss},
                        {"L0", m.l0},
                        {"LK", m.lk},
                        {"train_acc", m.train_acc},
                        {"test_acc", m.test_acc}});
    }
    manifest["metrics"] = rows;

    nlohmann::json arrays = nlohmann::json::array();
    for (const auto& p : net.params()) {
        arrays.push_back(p.name);
        save_array(dir + "/" + p.name + ".bin", *p.tensor);
    }
    manifest["arrays"] = arrays;

    std::ofstream out(dir + "/manifest.json");
    if (!out) throw IoError("cannot open '" + dir + "/manifest.json' for writing");
    out << manifest.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw IoError("cannot open '" + dir + "/manifest.json' for reading");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(dir + "/manifest.json: " + e.what());
    }
    if (manifest.value("format", "") != "ccp-checkpoint-v1") {
        throw IoError(dir + ": unknown checkpoint format");
    }

    const NetworkConfig cfg = config_from_json(manifest.at("network"));
    const std::size_t d_in = manifest.at("d_in").get<std::size_t>();
    AffinityGraph graph = load_edge_list(dir + "/graph.txt");

    // the same seed rebuilds the identical skeleton (including any random
    // slot permutations); the stored arrays then overwrite the parameters
    Network net = build_network(cfg, graph, d_in);
    for (auto& p : net.params()) {
        Tensor stored = load_array(dir + "/" + p.name + ".bin");
        if (!stored.same_shape(*p.tensor)) {
            throw IoError(dir + "/" + p.name + ".bin: shape " + stored.shape_str() +
                          " does not match network (" + p.tensor->shape_str() + ")");
        }
        *p.tensor = std::move(stored);
    }

    LoadedCheckpoint out{std::move(net), {}, {}, {}};
    const auto& g = manifest.at("graph");
    out.graph_meta = GraphMeta{g.at("kind").get<std::string>(), g.at("width").get<std::size_t>(),
                               g.at("height").get<std::size_t>(), g.at("joints").get<std::size_t>(),
                               g.at("frames").get<std::size_t>()};
    out.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    for (const auto& row : manifest.at("metrics")) {
        EpochMetrics m;
        m.epoch = row.at("epoch").get<std::size_t>();
        m.train_loss = row.at("train_loss").get<double>();
        m.l0 = row.at("L0").get<double>();
        m.lk = row.at("LK").get<double>();
        m.train_acc = row.at("train_acc").get<double>();
        m.test_acc = row.at("test_acc").get<double>();
        out.history.push_back(m);
    }
    return out;
}

}  // namespace ccp
