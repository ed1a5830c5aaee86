#pragma once

#include <array>
#include <string>
#include <vector>

#include "ccp/network.hpp"

namespace ccp {

/// Hard cluster assignment of every input node at the given level (1-based):
/// argmax over the composed membership product K(1) * ... * K(level), ties
/// resolved to the lowest cluster index.
std::vector<std::size_t> cluster_assignments(const Network& net, std::size_t level);

/// Evenly spaced hues; index assignments into colors for the cluster map.
std::vector<std::array<unsigned char, 3>> make_palette(std::size_t count);

/// Binary portable pixmap (P6) of a per-pixel assignment over a grid.
void write_ppm(const std::string& path, const std::vector<std::size_t>& assignment,
               std::size_t width, std::size_t height, std::size_t palette_size);

/// Fraction of pixels whose assignment is shared by at least three of their
/// eight grid neighbours.
double cluster_contiguity(const std::vector<std::size_t>& assignment, std::size_t width,
                          std::size_t height);

}  // namespace ccp
