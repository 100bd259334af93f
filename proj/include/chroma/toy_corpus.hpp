#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "chroma/colorspace.hpp"

namespace chroma {

/// Procedural landscape: blue sky gradient, green ground, a warm disc. Colors
/// follow from lightness and layout, so a small model can learn them.
RgbImage make_toy_image(int side, std::uint64_t seed);

/// Writes `count` PNGs named toy_0000.png ... and returns their paths.
std::vector<std::filesystem::path> write_toy_corpus(const std::filesystem::path& dir, int count, int side,
                                                    std::uint64_t seed);

}  // namespace chroma
