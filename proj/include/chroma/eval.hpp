#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "chroma/colorspace.hpp"
#include "chroma/data.hpp"

namespace chroma {

class Colorizer;

inline constexpr double kPsnrCap = 99.0;

/// Chroma-only PSNR in dB. Both (a,b) pairs are encoded to 8 bits
/// (round(clamp(v+128, 0, 255))), the MSE is taken over both channels and
/// PSNR = 10·log10(255²/MSE), capped at 99 dB. Throws ShapeError.
double psnr_ab(const LabImage& pred, const LabImage& truth);

struct ImageScore {
    std::string source_id;
    double psnr = 0.0;
    double baseline_psnr = 0.0;  // zero-chroma prediction
};

struct EvalFailure {
    std::string source_id;
    std::string message;
};

struct EvalReport {
    std::vector<ImageScore> images;
    std::vector<EvalFailure> failures;
    double mean_psnr = 0.0;
    double baseline_mean_psnr = 0.0;

    std::size_t image_count() const { return images.size(); }

    std::string to_text() const;
    std::string to_json() const;
    /// Writes the text report to `path` and the JSON record next to it (path + ".json").
    void write(const std::filesystem::path& path) const;
};

/// Colorizes every corpus image and scores it against its own chroma.
/// Unreadable images are recorded as failures and skipped.
EvalReport evaluate_model(Colorizer& colorizer, const Corpus& corpus);
EvalReport evaluate_model(const std::filesystem::path& checkpoint, const Corpus& corpus);

/// One participant answer.
struct Judgment {
    std::string image_id;
    std::string method_id;
    bool realistic = false;
    std::string participant_id;
};

using JudgmentSet = std::vector<Judgment>;

/// 100 · realistic / total for `method_id`. Throws StatisticError when the
/// method has no judgments.
double naturalness(const JudgmentSet& judgments, const std::string& method_id);

struct NaturalnessRow {
    std::size_t realistic = 0;
    std::size_t total = 0;
    double percent = 0.0;
};

/// Every method that appears in `judgments`.
std::map<std::string, NaturalnessRow> naturalness_table(const JudgmentSet& judgments);

}  // namespace chroma
