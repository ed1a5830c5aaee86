#include "ccp/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "ccp/errors.hpp"
#include "ccp/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset binary format is little-endian");

namespace ccp {

namespace {

constexpr char kSamplesMagic[4] = {'C', 'C', 'P', 'D'};

void make_split(GraphDataset& ds, Rng rng) {
    std::vector<std::size_t> idx(ds.signals.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    const std::size_t cut = idx.size() * 4 / 5;
    ds.train_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    ds.test_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
}

/// Blob dimensions: the most nearly square rectangle with area closest to
/// `mass` and sides >= 2, so the blob stays visually distinct from the bars.
std::pair<std::size_t, std::size_t> blob_dims(std::size_t mass) {
    std::size_t best_h = 2, best_w = 2;
    std::size_t best_err = SIZE_MAX, best_skew = SIZE_MAX;
    for (std::size_t h = 2; h * 2 <= mass + 2; ++h) {
        const std::size_t w = (mass + h / 2) / h;
        if (w < 2) continue;
        const std::size_t area = h * w;
        const std::size_t err = area > mass ? area - mass : mass - area;
        const std::size_t skew = h > w ? h - w : w - h;
        if (err < best_err || (err == best_err && skew < best_skew)) {
            best_err = err;
            best_skew = skew;
            best_h = h;
            best_w = w;
        }
    }
    return {best_h, best_w};
}

}  // namespace

GraphDataset gen_grid_shapes(std::size_t size, std::size_t n_per_class, std::uint64_t seed,
                             double noise_sigma) {
    if (size < 8) throw ConfigError("gen_grid_shapes: size must be at least 8");
    GraphDataset ds{build_grid8(size, size), {}, {}, {}, {}, {}, {}};
    ds.meta = GraphMeta{"grid8", size, size, 0, 0};
    ds.class_names = {"horizontal_bar", "vertical_bar", "diagonal_bar", "blob"};

    const std::size_t n = size * size;
    Rng rng = Rng(seed).stream(0x67726964);  // "grid"
    const auto [blob_h, blob_w] = blob_dims(size);

    for (std::size_t cls = 0; cls < ds.class_names.size(); ++cls) {
        for (std::size_t s = 0; s < n_per_class; ++s) {
            Tensor signal({n, 1});
            switch (cls) {
                case 0: {  // horizontal bar: one full pixel row
                    const std::size_t r = rng.uniform_int(size);
                    for (std::size_t c = 0; c < size; ++c) signal[r * size + c] = 1.0;
                    break;
                }
                case 1: {  // vertical bar: one full pixel column
                    const std::size_t c = rng.uniform_int(size);
                    for (std::size_t r = 0; r < size; ++r) signal[r * size + c] = 1.0;
                    break;
                }
                case 2: {  // diagonal bar, wrapped so every offset has equal mass
                    const std::size_t off = rng.uniform_int(size);
                    for (std::size_t r = 0; r < size; ++r) signal[r * size + (r + off) % size] = 1.0;
                    break;
                }
                default: {  // blob
                    const std::size_t r0 = rng.uniform_int(size - blob_h + 1);
                    const std::size_t c0 = rng.uniform_int(size - blob_w + 1);
                    for (std::size_t r = r0; r < r0 + blob_h; ++r)
                        for (std::size_t c = c0; c < c0 + blob_w; ++c)
                            signal[r * size + c] = 1.0;
                    break;
                }
            }
            if (noise_sigma > 0.0) {
                for (double& v : signal.data()) v += rng.normal(0.0, noise_sigma);
            }
            ds.signals.push_back(std::move(signal));
            ds.labels.push_back(cls);
        }
    }
    make_split(ds, Rng(seed).stream(0x73706c69));  // "spli"
    return ds;
}

GraphDataset gen_skeleton_motion(std::size_t joints, std::size_t frames,
                                 std::size_t n_per_class, std::uint64_t seed) {
    if (joints < 5) throw ConfigError("gen_skeleton_motion: need at least 5 joints");
    if (frames < 8) throw ConfigError("gen_skeleton_motion: need at least 8 frames");

    std::vector<std::pair<std::size_t, std::size_t>> star;
    for (std::size_t j = 1; j < joints; ++j) star.emplace_back(0, j);

    GraphDataset ds{build_spatiotemporal(joints, frames, star), {}, {}, {}, {}, {}, {}};
    ds.meta = GraphMeta{"spatiotemporal", 0, 0, joints, frames};
    ds.class_names = {"oscillation", "drift", "rotation"};

    // base pose: hub at the origin, spokes on the unit circle
    std::vector<std::pair<double, double>> base(joints, {0.0, 0.0});
    for (std::size_t j = 1; j < joints; ++j) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(j - 1) /
                             static_cast<double>(joints - 1);
        base[j] = {std::cos(angle), std::sin(angle)};
    }

    const std::size_t n = joints * frames;
    Rng rng = Rng(seed).stream(0x736b656c);  // "skel"
    const double tmax = static_cast<double>(frames - 1);

    for (std::size_t cls = 0; cls < ds.class_names.size(); ++cls) {
        for (std::size_t s = 0; s < n_per_class; ++s) {
            Tensor signal({n, 2});
            const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double pose_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double amp = rng.uniform(0.5, 1.2);
            const double cycles = rng.uniform(1.0, 3.0);
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double speed = rng.uniform(1.2, 2.5) / tmax;
            const double total_angle = rng.uniform(0.5, 1.5) * std::numbers::pi;

            for (std::size_t t = 0; t < frames; ++t) {
                const double ft = static_cast<double>(t);
                // every sample starts at a random orientation so raw
                // coordinates alone do not give the class away
                double shift_x = 0.0, shift_y = 0.0, rot = pose_angle;
                switch (cls) {
                    case 0: {  // oscillation: the whole skeleton sways in place
                        const double osc =
                            amp * std::sin(2.0 * std::numbers::pi * cycles * ft / tmax + phase);
                        shift_x = osc * std::cos(dir);
                        shift_y = osc * std::sin(dir);
                        break;
                    }
                    case 1:  // drift: constant-velocity translation
                        shift_x = speed * ft * std::cos(dir);
                        shift_y = speed * ft * std::sin(dir);
                        break;
                    default:  // rotation about the hub
                        rot += total_angle * ft / tmax;
                        break;
                }
                const double cr = std::cos(rot), sr = std::sin(rot);
                for (std::size_t j = 0; j < joints; ++j) {
                    const double bx = base[j].first, by = base[j].second;
                    const std::size_t node = t * joints + j;
                    signal.at(node, 0) = cr * bx - sr * by + shift_x + rng.normal(0.0, 0.05);
                    signal.at(node, 1) = sr * bx + cr * by + shift_y + rng.normal(0.0, 0.05);
                }
            }
            ds.signals.push_back(std::move(signal));
            ds.labels.push_back(cls);
        }
    }
    make_split(ds, Rng(seed).stream(0x73706c69));
    return ds;
}

GraphDataset with_random_graph(const GraphDataset& dataset, std::uint64_t seed) {
    GraphDataset out = dataset;
    out.graph = build_random_isomorphic(dataset.graph, seed);
    out.meta.kind = "custom";
    return out;
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

namespace {

void write_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, sizeof(v), 1, f); }

class BinReader {
public:
    BinReader(std::FILE* f, std::string path) : f_(f), path_(std::move(path)) {}

    void read(void* dst, std::size_t bytes) {
        if (std::fread(dst, 1, bytes, f_) != bytes) {
            throw IoError(path_ + ": truncated at byte " + std::to_string(offset_));
        }
        offset_ += bytes;
    }
    std::uint32_t read_u32() {
        std::uint32_t v = 0;
        read(&v, sizeof(v));
        return v;
    }
    std::size_t offset() const { return offset_; }

private:
    std::FILE* f_;
    std::string path_;
    std::size_t offset_ = 0;
};

}  // namespace

void save_dataset(const GraphDataset& dataset, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_edge_list(dataset.graph, dir + "/graph.txt");

    const std::string bin_path = dir + "/samples.bin";
    std::FILE* f = std::fopen(bin_path.c_str(), "wb");
    if (!f) throw IoError("cannot open '" + bin_path + "' for writing");
    std::fwrite(kSamplesMagic, 1, 4, f);
    write_u32(f, static_cast<std::uint32_t>(dataset.signals.size()));
    write_u32(f, static_cast<std::uint32_t>(dataset.graph.node_count()));
    write_u32(f, static_cast<std::uint32_t>(dataset.d_in()));
    for (std::size_t s = 0; s < dataset.signals.size(); ++s) {
        write_u32(f, static_cast<std::uint32_t>(dataset.labels[s]));
        const auto& values = dataset.signals[s].data();
        std::fwrite(values.data(), sizeof(double), values.size(), f);
    }
    std::fclose(f);

    nlohmann::json meta;
    meta["class_names"] = dataset.class_names;
    meta["train_idx"] = dataset.train_idx;
    meta["test_idx"] = dataset.test_idx;
    meta["graph"] = {{"kind", dataset.meta.kind},
                     {"width", dataset.meta.width},
                     {"height", dataset.meta.height},
                     {"joints", dataset.meta.joints},
                     {"frames", dataset.meta.frames}};
    std::ofstream out(dir + "/meta.json");
    if (!out) throw IoError("cannot open '" + dir + "/meta.json' for writing");
    out << meta.dump(2) << "\n";
}

GraphDataset load_dataset(const std::string& dir) {
    const std::string bin_path = dir + "/samples.bin";
    std::FILE* f = std::fopen(bin_path.c_str(), "rb");
    if (!f) throw IoError("cannot open '" + bin_path + "' for reading");

    GraphDataset ds{load_edge_list(dir + "/graph.txt"), {}, {}, {}, {}, {}, {}};
    try {
        BinReader in(f, bin_path);
        char magic[4];
        in.read(magic, 4);
        if (std::string(magic, 4) != std::string(kSamplesMagic, 4)) {
            throw IoError(bin_path + ": bad magic at byte 0, expected CCPD");
        }
        const std::uint32_t n_samples = in.read_u32();
        const std::uint32_t n = in.read_u32();
        const std::uint32_t d_in = in.read_u32();
        if (n != ds.graph.node_count()) {
            throw IoError(bin_path + ": sample node count " + std::to_string(n) +
                          " does not match graph (" + std::to_string(ds.graph.node_count()) + ")");
        }
        ds.signals.reserve(n_samples);
        ds.labels.reserve(n_samples);
        for (std::uint32_t s = 0; s < n_samples; ++s) {
            ds.labels.push_back(in.read_u32());
            Tensor signal({n, d_in});
            in.read(signal.data().data(), sizeof(double) * signal.size());
            if (!signal.all_finite()) {
                throw IoError(bin_path + ": non-finite values in sample " + std::to_string(s));
            }
            ds.signals.push_back(std::move(signal));
        }
        // a trailing byte means the header undercounted
        char extra;
        if (std::fread(&extra, 1, 1, f) == 1) {
            throw IoError(bin_path + ": trailing data at byte " + std::to_string(in.offset()));
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);

    std::ifstream meta_in(dir + "/meta.json");
    if (!meta_in) throw IoError("cannot open '" + dir + "/meta.json' for reading");
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(dir + "/meta.json: " + e.what());
    }
    ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
    ds.train_idx = meta.at("train_idx").get<std::vector<std::size_t>>();
    ds.test_idx = meta.at("test_idx").get<std::vector<std::size_t>>();
    const auto& g = meta.at("graph");
    ds.meta = GraphMeta{g.at("kind").get<std::string>(), g.at("width").get<std::size_t>(),
                        g.at("height").get<std::size_t>(), g.at("joints").get<std::size_t>(),
                        g.at("frames").get<std::size_t>()};
    for (std::size_t label : ds.labels) {
        if (label >= ds.class_names.size()) {
            throw IoError(bin_path + ": label " + std::to_string(label) + " out of range");
        }
    }
    return ds;
}

}  // namespace ccp
