#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "chroma/error.hpp"
#include "chroma/eval.hpp"
#include "chroma/image_io.hpp"
#include "chroma/inference.hpp"
#include "chroma/toy_corpus.hpp"
#include "chroma/trainer.hpp"
#include "support.hpp"

using namespace chroma;
using chroma::testing::TempDir;

namespace {

LabImage random_lab(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> ab(-60, 60);
    std::uniform_real_distribution<double> L(0.0, 100.0);
    LabImage img(h, w);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        img.L[i] = L(rng);
        img.a[i] = ab(rng);
        img.b[i] = ab(rng);
    }
    return img;
}

// Adds integer noise so that the 8-bit encoding does not round it away.
LabImage with_noise(const LabImage& base, const std::vector<int>& noise, int scale_num, int scale_den) {
    LabImage out = base;
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        out.a[i] += noise[2 * i] * scale_num / scale_den;
        out.b[i] += noise[2 * i + 1] * scale_num / scale_den;
    }
    return out;
}

fs::path tiny_checkpoint(const fs::path& dir) {
    TrainConfig c = TrainConfig::desk_profile();
    c.side = 32;
    c.width_divisor = 16;
    c.seed = 4;
    TrainState s = init_state(c);
    const fs::path p = dir / "tiny.chk";
    save_checkpoint(s, p);
    return p;
}

}  // namespace

TEST_CASE("psnr closed forms") {
    const LabImage truth = random_lab(16, 12, 1);
    CHECK(psnr_ab(truth, truth) == kPsnrCap);

    LabImage zero(10, 10), offset(10, 10);
    std::fill(offset.a.begin(), offset.a.end(), 16.0);
    std::fill(offset.b.begin(), offset.b.end(), 16.0);
    CHECK(std::abs(psnr_ab(offset, zero) - 24.04840395556061) <= 1e-9);

    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> half(-4, 4);
    std::vector<int> noise(2 * truth.pixel_count());
    for (auto& v : noise) v = 2 * half(rng);  // even, so halving stays integral
    const double full = psnr_ab(with_noise(truth, noise, 1, 1), truth);
    const double halved = psnr_ab(with_noise(truth, noise, 1, 2), truth);
    CHECK(std::abs(halved - full - 20.0 * std::log10(2.0)) <= 1e-9);
}

TEST_CASE("psnr properties") {
    const LabImage truth = random_lab(20, 20, 3);
    const LabImage other = random_lab(20, 20, 4);
    CHECK(psnr_ab(truth, other) == psnr_ab(other, truth));

    LabImage relit = other;
    for (auto& v : relit.L) v = 100.0 - v;
    CHECK(psnr_ab(relit, truth) == psnr_ab(other, truth));

    std::mt19937_64 rng(5);
    std::vector<int> noise(2 * truth.pixel_count());
    for (auto& v : noise) v = (rng() & 1) ? 1 : -1;
    double last = kPsnrCap + 1;
    for (int amp : {1, 2, 3, 5, 8, 13, 21}) {
        const double p = psnr_ab(with_noise(truth, noise, amp, 1), truth);
        CHECK(p < last);
        last = p;
    }
    CHECK_THROWS_AS(psnr_ab(random_lab(4, 5, 0), random_lab(5, 4, 0)), ShapeError);
}

TEST_CASE("naturalness") {
    JudgmentSet set;
    for (int i = 0; i < 10; ++i) set.push_back({"img" + std::to_string(i), "a", i < 7, "p"});
    for (int i = 0; i < 4; ++i) set.push_back({"img" + std::to_string(i), "b", true, "p"});
    CHECK(naturalness(set, "a") == 70.0);
    CHECK(naturalness(set, "b") == 100.0);
    CHECK_THROWS_AS(naturalness(set, "c"), StatisticError);

    JudgmentSet shuffled = set;
    std::mt19937 rng(1);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(naturalness(shuffled, "a") == 70.0);

    const auto table = naturalness_table(set);
    REQUIRE(table.size() == 2);
    CHECK(table.at("a").realistic == 7);
    CHECK(table.at("a").total == 10);
    CHECK(table.at("a").percent == 70.0);
    for (const auto& [m, row] : table) {
        CHECK(row.percent >= 0.0);
        CHECK(row.percent <= 100.0);
    }
}

TEST_CASE("colorizer contracts") {
    TempDir dir("eval");
    Colorizer colorizer = Colorizer::from_checkpoint(tiny_checkpoint(dir.path()));
    CHECK(colorizer.side() == 32);

    const RgbImage color = make_toy_image(48, 3);
    const RgbImage odd = resize_bilinear(color, 45, 37);
    const RgbImage gray = to_grayscale(odd);

    const RgbImage out = colorizer.colorize(gray);
    CHECK(out.height == 45);
    CHECK(out.width == 37);
    CHECK(out.channels == 3);

    // Luminance passes through.
    int worst = 0;
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        const Lab lab = rgb_to_lab(Rgb8{out.data[3 * i], out.data[3 * i + 1], out.data[3 * i + 2]});
        worst = std::max(worst, std::abs(int(nearest_gray_level(lab.L)) - int(gray.data[3 * i])));
    }
    CHECK(worst <= 1);

    // Only luminance matters.
    CHECK(colorizer.colorize(odd).data == out.data);

    const LabImage pred = colorizer.predict(gray);
    CHECK(pred.height == 45);
    CHECK(pred.width == 37);
}

TEST_CASE("run_colorize writes an image") {
    TempDir dir("eval");
    const fs::path chk = tiny_checkpoint(dir.path());
    write_image(dir / "in.png", to_grayscale(make_toy_image(40, 9)));
    run_colorize(chk, dir / "in.png", dir / "out.png");
    const RgbImage out = read_image(dir / "out.png");
    CHECK(out.height == 40);
    CHECK(out.width == 40);

    CHECK_THROWS_AS(run_colorize(dir / "missing.chk", dir / "in.png", dir / "x.png"), CheckpointError);
    CHECK_THROWS_AS(run_colorize(chk, dir / "missing.png", dir / "x.png"), IngestionError);
}

TEST_CASE("evaluate_model") {
    TempDir dir("eval");
    const fs::path chk = tiny_checkpoint(dir.path());

    SUBCASE("gray corpus has a capped baseline") {
        fs::create_directories(dir / "gray");
        for (int i = 0; i < 3; ++i) {
            write_image(dir / ("gray/g" + std::to_string(i) + ".png"), to_grayscale(make_toy_image(24, i)));
        }
        const EvalReport r = evaluate_model(chk, Corpus::open(dir / "gray"));
        CHECK(r.image_count() == 3);
        for (const auto& s : r.images) CHECK(s.baseline_psnr == kPsnrCap);
        CHECK(r.baseline_mean_psnr == kPsnrCap);
    }
    SUBCASE("means, failures and determinism") {
        fs::create_directories(dir / "mixed");
        write_toy_corpus(dir / "mixed", 5, 40, 1);
        std::ofstream(dir / "mixed" / "zz_bad.png") << "corrupt";
        const Corpus corpus = Corpus::open(dir / "mixed");
        const EvalReport r = evaluate_model(chk, corpus);
        CHECK(r.image_count() == 5);
        REQUIRE(r.failures.size() == 1);
        CHECK(r.failures[0].source_id == "zz_bad.png");
        double sum = 0.0, base = 0.0;
        for (const auto& s : r.images) {
            sum += s.psnr;
            base += s.baseline_psnr;
        }
        CHECK(std::abs(r.mean_psnr - sum / 5) <= 1e-9);
        CHECK(std::abs(r.baseline_mean_psnr - base / 5) <= 1e-9);

        const EvalReport again = evaluate_model(chk, corpus);
        CHECK(again.to_json() == r.to_json());

        r.write(dir / "report.txt");
        const auto j = nlohmann::json::parse(std::ifstream(dir / "report.txt.json"));
        CHECK(j["image_count"] == 5);
        CHECK(j["failures"].size() == 1);
        CHECK(fs::file_size(dir / "report.txt") > 0);
    }
    SUBCASE("empty corpus") {
        fs::create_directories(dir / "empty");
        CHECK_THROWS_AS(evaluate_model(chk, Corpus::open(dir / "empty")), ConfigError);
    }
}
