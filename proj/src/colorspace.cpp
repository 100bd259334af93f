#include "chroma/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chroma/error.hpp"

namespace chroma {
namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Linear sRGB -> XYZ, D65.
constexpr Mat3 kRgbToXyz = {{{0.4124564, 0.3575761, 0.1804375},
                             {0.2126729, 0.7151522, 0.0721750},
                             {0.0193339, 0.1191920, 0.9503041}}};

Mat3 invert(const Mat3& m) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    Mat3 r{};
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return r;
}

const Mat3& xyz_to_rgb_matrix() {
    static const Mat3 inv = invert(kRgbToXyz);
    return inv;
}

// Reference white is the image of rgb(1,1,1), so the neutral axis maps to a=b=0 exactly.
struct White {
    double x, y, z;
};
constexpr White kWhite = {kRgbToXyz[0][0] + kRgbToXyz[0][1] + kRgbToXyz[0][2],
                          kRgbToXyz[1][0] + kRgbToXyz[1][1] + kRgbToXyz[1][2],
                          kRgbToXyz[2][0] + kRgbToXyz[2][1] + kRgbToXyz[2][2]};

double srgb_decode(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double srgb_encode(double c) {
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
    return t > colorimetry::kEpsilon ? std::cbrt(t) : (colorimetry::kKappa * t + 16.0) / 116.0;
}

double lab_f_inv(double f) {
    const double f3 = f * f * f;
    return f3 > colorimetry::kEpsilon ? f3 : (116.0 * f - 16.0) / colorimetry::kKappa;
}

// 256-entry table of sRGB decoding; inputs are always 8-bit.
const std::array<double, 256>& linear_table() {
    static const std::array<double, 256> table = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i) t[i] = srgb_decode(i / 255.0);
        return t;
    }();
    return table;
}

std::uint8_t quantize(double unit) {
    const double v = std::clamp(unit, 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::lround(v));
}

std::array<double, 3> lab_to_linear(const Lab& lab) {
    const double fy = (lab.L + 16.0) / 116.0;
    const double fx = fy + lab.a / 500.0;
    const double fz = fy - lab.b / 200.0;
    const double yr = lab.L > colorimetry::kKappa * colorimetry::kEpsilon ? fy * fy * fy
                                                                         : lab.L / colorimetry::kKappa;
    const double x = lab_f_inv(fx) * kWhite.x;
    const double y = yr * kWhite.y;
    const double z = lab_f_inv(fz) * kWhite.z;
    const auto& m = xyz_to_rgb_matrix();
    std::array<double, 3> rgb{};
    for (int c = 0; c < 3; ++c) rgb[c] = m[c][0] * x + m[c][1] * y + m[c][2] * z;
    return rgb;
}

bool in_gamut(const Lab& lab) {
    constexpr double tol = 1e-9;
    for (double v : lab_to_linear(lab)) {
        if (v < -tol || v > 1.0 + tol) return false;
    }
    return true;
}

const std::array<double, 256>& gray_table() {
    static const std::array<double, 256> table = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i) {
            const auto v = static_cast<std::uint8_t>(i);
            t[i] = rgb_to_lab(Rgb8{v, v, v}).L;
        }
        return t;
    }();
    return table;
}

}  // namespace

Lab rgb_to_lab(Rgb8 rgb) {
    const auto& lin = linear_table();
    const double r = lin[rgb[0]], g = lin[rgb[1]], b = lin[rgb[2]];
    const auto& m = kRgbToXyz;
    const double x = m[0][0] * r + m[0][1] * g + m[0][2] * b;
    const double y = m[1][0] * r + m[1][1] * g + m[1][2] * b;
    const double z = m[2][0] * r + m[2][1] * g + m[2][2] * b;
    const double fx = lab_f(x / kWhite.x);
    const double fy = lab_f(y / kWhite.y);
    const double fz = lab_f(z / kWhite.z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Rgb8 lab_to_rgb(const Lab& lab) {
    const auto linear = lab_to_linear(lab);
    Rgb8 out{};
    for (int c = 0; c < 3; ++c) out[c] = quantize(srgb_encode(std::max(linear[c], 0.0)));
    return out;
}

double gray_lightness(std::uint8_t level) { return gray_table()[level]; }

std::uint8_t nearest_gray_level(double L) {
    const auto& t = gray_table();
    const auto it = std::lower_bound(t.begin(), t.end(), L);
    if (it == t.begin()) return 0;
    if (it == t.end()) return 255;
    const auto hi = static_cast<int>(it - t.begin());
    return static_cast<std::uint8_t>((L - t[hi - 1] <= t[hi] - L) ? hi - 1 : hi);
}

RgbImage to_grayscale(const RgbImage& img) {
    const LabImage lab = rgb_to_lab(img);
    RgbImage out(img.height, img.width, 3);
    for (std::size_t i = 0; i < lab.pixel_count(); ++i) {
        const std::uint8_t g = nearest_gray_level(lab.L[i]);
        out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = g;
    }
    return out;
}

Lab fit_to_gamut(const Lab& lab) {
    if (in_gamut(lab)) return lab;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (in_gamut(Lab{lab.L, lab.a * mid, lab.b * mid})) lo = mid;
        else hi = mid;
    }
    return Lab{lab.L, lab.a * lo, lab.b * lo};
}

LabImage rgb_to_lab(const RgbImage& img) {
    if (img.channels != 3) {
        throw FormatError("rgb_to_lab expects 3 channels, got " + std::to_string(img.channels));
    }
    if (img.data.size() != img.pixel_count() * 3) {
        throw FormatError("rgb_to_lab: pixel buffer does not match image dimensions");
    }
    LabImage out(img.height, img.width);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const Lab lab = rgb_to_lab(Rgb8{img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]});
        out.L[i] = lab.L;
        out.a[i] = lab.a;
        out.b[i] = lab.b;
    }
    return out;
}

RgbImage lab_to_rgb(const LabImage& img) {
    RgbImage out(img.height, img.width, 3);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const Rgb8 rgb = lab_to_rgb(Lab{std::clamp(img.L[i], 0.0, 100.0), img.a[i], img.b[i]});
        std::copy(rgb.begin(), rgb.end(), out.data.begin() + 3 * i);
    }
    return out;
}

std::vector<float> encode_chroma(std::span<const double> values) {
    std::vector<float> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(),
                   [](double v) { return static_cast<float>(encode_chroma(v)); });
    return out;
}

std::vector<double> decode_chroma(std::span<const float> values) {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(),
                   [](float t) { return decode_chroma(static_cast<double>(t)); });
    return out;
}

std::vector<float> triplicate_luminance(std::span<const double> L, int height, int width) {
    const auto n = static_cast<std::size_t>(height) * width;
    if (L.size() != n) throw ShapeError("triplicate_luminance: plane size does not match H×W");
    std::vector<float> out(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const float v = encode_luminance(L[i]);
        out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = v;
    }
    return out;
}

}  // namespace chroma
