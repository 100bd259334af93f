#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace chroma {

/// 8-bit interleaved image, row-major, `channels` values per pixel.
struct RgbImage {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int h, int w, int c = 3)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, 0) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    std::uint8_t& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

/// CIE Lab image stored as three row-major planes.
/// L in [0,100]; a, b in [-128,127] once clamped.
struct LabImage {
    int height = 0;
    int width = 0;
    std::vector<double> L;
    std::vector<double> a;
    std::vector<double> b;

    LabImage() = default;
    LabImage(int h, int w)
        : height(h), width(w),
          L(static_cast<std::size_t>(h) * w, 0.0),
          a(static_cast<std::size_t>(h) * w, 0.0),
          b(static_cast<std::size_t>(h) * w, 0.0) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

struct Lab {
    double L = 0.0;
    double a = 0.0;
    double b = 0.0;
};

using Rgb8 = std::array<std::uint8_t, 3>;

namespace colorimetry {
// CIE constants, exact rationals.
inline constexpr double kEpsilon = 216.0 / 24389.0;
inline constexpr double kKappa = 24389.0 / 27.0;
inline constexpr double kChromaMin = -128.0;
inline constexpr double kChromaMax = 127.0;
}  // namespace colorimetry

Lab rgb_to_lab(Rgb8 rgb);
Rgb8 lab_to_rgb(const Lab& lab);

/// Throws FormatError unless img has exactly three channels.
LabImage rgb_to_lab(const RgbImage& img);
/// Out-of-gamut values are clamped per channel.
RgbImage lab_to_rgb(const LabImage& img);

/// Lightness of the 8-bit sRGB gray (level, level, level).
double gray_lightness(std::uint8_t level);
/// Gray level whose lightness is nearest to L.
std::uint8_t nearest_gray_level(double L);
/// Per-pixel nearest gray level, replicated to three channels. Two images with
/// the same lightness per pixel reduce to the same result.
RgbImage to_grayscale(const RgbImage& img);

/// Largest chroma scale s in [0,1] such that (L, s·a, s·b) is inside the sRGB
/// gamut; L is kept. In-gamut colors are returned unchanged.
Lab fit_to_gamut(const Lab& lab);

/// Network encoding of luminance: L/100.
inline float encode_luminance(double L) { return static_cast<float>(L / 100.0); }
inline double decode_luminance(float t) { return static_cast<double>(t) * 100.0; }

/// Affine map [-128,127] -> [-1,1].
inline double encode_chroma(double v) { return (v - colorimetry::kChromaMin) * 2.0 / 255.0 - 1.0; }
inline double decode_chroma(double t) { return (t + 1.0) * 255.0 / 2.0 + colorimetry::kChromaMin; }

std::vector<float> encode_chroma(std::span<const double> values);
std::vector<double> decode_chroma(std::span<const float> values);

/// H×W×3 interleaved; every channel holds encode_luminance(L).
std::vector<float> triplicate_luminance(std::span<const double> L, int height, int width);

}  // namespace chroma
