#include "ccp/viz.hpp"

#include <cmath>
#include <cstdio>

#include "ccp/errors.hpp"

namespace ccp {

std::vector<std::size_t> cluster_assignments(const Network& net, std::size_t level) {
    if (level == 0 || level > net.layers().size()) {
        throw Error("cluster_assignments: level " + std::to_string(level) + " out of range [1, " +
                    std::to_string(net.layers().size()) + "]");
    }
    Tape tape;
    Var composed;
    for (std::size_t m = 0; m < level; ++m) {
        Var k = row_softmax(tape.constant(net.layers()[m].u));
        composed = m == 0 ? k : matmul(composed, k);
    }
    const Tensor& p = tape.value(composed);
    std::vector<std::size_t> assignment(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < p.cols(); ++k) {
            if (p.at(i, k) > p.at(i, best)) best = k;
        }
        assignment[i] = best;
    }
    return assignment;
}

std::vector<std::array<unsigned char, 3>> make_palette(std::size_t count) {
    std::vector<std::array<unsigned char, 3>> palette(count);
    for (std::size_t i = 0; i < count; ++i) {
        // evenly spaced hues, fixed saturation/value
        const double h = 6.0 * static_cast<double>(i) / static_cast<double>(count);
        const double s = 0.75, v = 0.95;
        const int sector = static_cast<int>(h) % 6;
        const double f = h - std::floor(h);
        const double p = v * (1.0 - s);
        const double q = v * (1.0 - s * f);
        const double t = v * (1.0 - s * (1.0 - f));
        double r = 0, g = 0, b = 0;
        switch (sector) {
            case 0: r = v; g = t; b = p; break;
            case 1: r = q; g = v; b = p; break;
            case 2: r = p; g = v; b = t; break;
            case 3: r = p; g = q; b = v; break;
            case 4: r = t; g = p; b = v; break;
            default: r = v; g = p; b = q; break;
        }
        palette[i] = {static_cast<unsigned char>(r * 255.0),
                      static_cast<unsigned char>(g * 255.0),
                      static_cast<unsigned char>(b * 255.0)};
    }
    return palette;
}

void write_ppm(const std::string& path, const std::vector<std::size_t>& assignment,
               std::size_t width, std::size_t height, std::size_t palette_size) {
    if (assignment.size() != width * height) {
        throw Error("write_ppm: " + std::to_string(assignment.size()) + " assignments for a " +
                    std::to_string(width) + "x" + std::to_string(height) + " image");
    }
    const auto palette = make_palette(palette_size);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    std::fprintf(f, "P6\n%zu %zu\n255\n", width, height);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const auto& rgb = palette[assignment[i] % palette.size()];
        std::fwrite(rgb.data(), 1, 3, f);
    }
    std::fclose(f);
}

double cluster_contiguity(const std::vector<std::size_t>& assignment, std::size_t width,
                          std::size_t height) {
    if (assignment.size() != width * height) {
        throw Error("cluster_contiguity: assignment size does not match grid");
    }
    std::size_t good = 0;
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const std::size_t label = assignment[r * width + c];
            std::size_t agree = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(r) + dr;
                    const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(c) + dc;
                    if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(height) ||
                        nc >= static_cast<std::ptrdiff_t>(width)) {
                        continue;
                    }
                    if (assignment[static_cast<std::size_t>(nr) * width +
                                   static_cast<std::size_t>(nc)] == label) {
                        ++agree;
                    }
                }
            }
            if (agree >= 3) ++good;
        }
    }
    return static_cast<double>(good) / static_cast<double>(assignment.size());
}

}  // namespace ccp
