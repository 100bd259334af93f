#pragma once

#include <filesystem>

#include "chroma/colorspace.hpp"
#include "chroma/networks.hpp"

namespace chroma {

/// Runs a trained generator on arbitrary-size images. The input is first
/// reduced to its nearest 8-bit gray levels, so a color image and its
/// grayscale twin colorize identically. Chroma is predicted at the model side
/// and resized bilinearly back to the input resolution.
class Colorizer {
public:
    explicit Colorizer(Generator generator);
    /// Throws CheckpointError.
    static Colorizer from_checkpoint(const std::filesystem::path& checkpoint);

    /// Lab result at input resolution: L from the gray input, decoded
    /// (unclamped) network chroma.
    LabImage predict(const RgbImage& input);
    /// predict() with chroma pulled into gamut at constant L, then to sRGB.
    RgbImage colorize(const RgbImage& input);

    int side() const { return generator_->config().input_side; }

private:
    Generator generator_;
};

/// Colorizes `input` into `output` with the checkpoint's generator.
void run_colorize(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                  const std::filesystem::path& output);

}  // namespace chroma
