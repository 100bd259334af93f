#include "chroma/toy_corpus.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "chroma/image_io.hpp"

namespace chroma {

RgbImage make_toy_image(int side, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    const double horizon = uniform(0.35, 0.65) * side;
    const double cx = uniform(0.2, 0.8) * side;
    const double cy = uniform(0.25, 0.75) * side;
    const double radius = uniform(0.08, 0.18) * side;
    const double sky_b = uniform(-45.0, -30.0);
    const double grass_a = uniform(-45.0, -30.0);
    const double disc_a = uniform(45.0, 65.0);

    LabImage lab(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * side + x;
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double t = static_cast<double>(y) / side;
            if (dx * dx + dy * dy <= radius * radius) {
                lab.L[i] = 55.0;
                lab.a[i] = disc_a;
                lab.b[i] = 50.0;
            } else if (y < horizon) {
                lab.L[i] = 85.0 - 20.0 * t;
                lab.a[i] = -5.0;
                lab.b[i] = sky_b;
            } else {
                lab.L[i] = 50.0 - 15.0 * (t - horizon / side) + 3.0 * std::sin(0.9 * x);
                lab.a[i] = grass_a;
                lab.b[i] = 35.0;
            }
            const Lab fitted = fit_to_gamut(Lab{lab.L[i], lab.a[i], lab.b[i]});
            lab.a[i] = fitted.a;
            lab.b[i] = fitted.b;
        }
    }
    return lab_to_rgb(lab);
}

std::vector<std::filesystem::path> write_toy_corpus(const std::filesystem::path& dir, int count, int side,
                                                    std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> paths;
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "toy_%04d.png", i);
        const auto path = dir / name;
        write_image(path, make_toy_image(side, seed * 1000003ull + static_cast<std::uint64_t>(i)));
        paths.push_back(path);
    }
    return paths;
}

}  // namespace chroma
