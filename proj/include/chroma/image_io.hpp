#pragma once

#include <filesystem>

#include "chroma/colorspace.hpp"

namespace chroma {

/// Decodes PNG/JPEG (or anything OpenCV reads) to 8-bit RGB. Grayscale sources
/// become three equal channels; alpha is dropped. Throws IngestionError.
RgbImage read_image(const std::filesystem::path& path);

/// Encoding is picked from the extension. Throws IngestionError on failure.
void write_image(const std::filesystem::path& path, const RgbImage& img);

/// Bilinear resize to exactly height×width.
RgbImage resize_bilinear(const RgbImage& img, int height, int width);

/// Bilinear resize of a single double plane.
std::vector<double> resize_plane(const std::vector<double>& plane, int height, int width,
                                 int new_height, int new_width);

bool is_image_file(const std::filesystem::path& path);

}  // namespace chroma
