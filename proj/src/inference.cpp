#include "chroma/inference.hpp"

#include "chroma/error.hpp"
#include "chroma/image_io.hpp"
#include "chroma/trainer.hpp"

namespace chroma {

Colorizer::Colorizer(Generator generator) : generator_(std::move(generator)) { generator_->eval(); }

Colorizer Colorizer::from_checkpoint(const std::filesystem::path& checkpoint) {
    TrainState state = load_checkpoint(checkpoint);
    return Colorizer(state.generator);
}

LabImage Colorizer::predict(const RgbImage& input) {
    const RgbImage gray = to_grayscale(input);
    LabImage out(input.height, input.width);
    for (std::size_t i = 0; i < out.pixel_count(); ++i) out.L[i] = gray_lightness(gray.data[3 * i]);

    const int s = side();
    const std::vector<double> L_small = resize_plane(out.L, input.height, input.width, s, s);
    torch::Tensor L = torch::empty({1, 1, s, s});
    auto* dst = L.data_ptr<float>();
    for (std::size_t i = 0; i < L_small.size(); ++i) dst[i] = encode_luminance(L_small[i]);

    torch::Tensor ab;
    {
        torch::NoGradGuard no_grad;
        generator_->eval();
        ab = generator_->forward(L).ab.to(torch::kFloat64).contiguous();
    }
    const auto plane = static_cast<std::size_t>(s) * s;
    const double* src = ab.data_ptr<double>();
    std::vector<double> a(plane), b(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        a[i] = decode_chroma(src[i]);
        b[i] = decode_chroma(src[plane + i]);
    }
    out.a = resize_plane(a, s, s, input.height, input.width);
    out.b = resize_plane(b, s, s, input.height, input.width);
    return out;
}

RgbImage Colorizer::colorize(const RgbImage& input) {
    LabImage lab = predict(input);
    for (std::size_t i = 0; i < lab.pixel_count(); ++i) {
        const Lab fitted = fit_to_gamut(Lab{lab.L[i], lab.a[i], lab.b[i]});
        lab.a[i] = fitted.a;
        lab.b[i] = fitted.b;
    }
    return lab_to_rgb(lab);
}

void run_colorize(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                  const std::filesystem::path& output) {
    Colorizer colorizer = Colorizer::from_checkpoint(checkpoint);
    write_image(output, colorizer.colorize(read_image(input)));
}

}  // namespace chroma
