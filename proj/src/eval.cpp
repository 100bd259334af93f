#include "chroma/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "chroma/error.hpp"
#include "chroma/image_io.hpp"
#include "chroma/inference.hpp"

namespace chroma {
namespace {

double encode8(double v) { return std::round(std::clamp(v + 128.0, 0.0, 255.0)); }

double mean_of(const std::vector<ImageScore>& images, double ImageScore::*field) {
    if (images.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : images) sum += s.*field;
    return sum / static_cast<double>(images.size());
}

}  // namespace

double psnr_ab(const LabImage& pred, const LabImage& truth) {
    if (pred.height != truth.height || pred.width != truth.width) {
        throw ShapeError("psnr_ab: " + std::to_string(pred.height) + "x" + std::to_string(pred.width) + " vs " +
                         std::to_string(truth.height) + "x" + std::to_string(truth.width));
    }
    const std::size_t n = truth.pixel_count();
    if (n == 0) throw ShapeError("psnr_ab: empty image");
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = encode8(pred.a[i]) - encode8(truth.a[i]);
        const double db = encode8(pred.b[i]) - encode8(truth.b[i]);
        sse += da * da + db * db;
    }
    const double mse = sse / static_cast<double>(2 * n);
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

EvalReport evaluate_model(Colorizer& colorizer, const Corpus& corpus) {
    EvalReport report;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        try {
            const RgbImage img = read_image(corpus.path(i));
            const LabImage truth = rgb_to_lab(img);
            const LabImage pred = colorizer.predict(img);
            LabImage zero = truth;
            std::fill(zero.a.begin(), zero.a.end(), 0.0);
            std::fill(zero.b.begin(), zero.b.end(), 0.0);
            report.images.push_back({corpus.source_id(i), psnr_ab(pred, truth), psnr_ab(zero, truth)});
        } catch (const Error& e) {
            report.failures.push_back({corpus.source_id(i), e.what()});
        }
    }
    report.mean_psnr = mean_of(report.images, &ImageScore::psnr);
    report.baseline_mean_psnr = mean_of(report.images, &ImageScore::baseline_psnr);
    return report;
}

EvalReport evaluate_model(const std::filesystem::path& checkpoint, const Corpus& corpus) {
    if (corpus.empty()) throw ConfigError("evaluation corpus is empty");
    Colorizer colorizer = Colorizer::from_checkpoint(checkpoint);
    return evaluate_model(colorizer, corpus);
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    char buf[256];
    os << "images: " << images.size() << "\n";
    os << "failures: " << failures.size() << "\n";
    std::snprintf(buf, sizeof(buf), "mean PSNR (ab): %.4f dB\n", mean_psnr);
    os << buf;
    std::snprintf(buf, sizeof(buf), "baseline mean PSNR (a=b=0): %.4f dB\n", baseline_mean_psnr);
    os << buf << "\n";
    for (const auto& s : images) {
        std::snprintf(buf, sizeof(buf), "%10.4f  %10.4f  ", s.psnr, s.baseline_psnr);
        os << buf << s.source_id << "\n";
    }
    for (const auto& f : failures) os << "FAILED  " << f.source_id << ": " << f.message << "\n";
    return os.str();
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["image_count"] = images.size();
    j["mean_psnr"] = mean_psnr;
    j["baseline_mean_psnr"] = baseline_mean_psnr;
    j["images"] = nlohmann::json::array();
    for (const auto& s : images) {
        j["images"].push_back({{"source_id", s.source_id}, {"psnr", s.psnr}, {"baseline_psnr", s.baseline_psnr}});
    }
    j["failures"] = nlohmann::json::array();
    for (const auto& f : failures) j["failures"].push_back({{"source_id", f.source_id}, {"message", f.message}});
    return j.dump(2);
}

void EvalReport::write(const std::filesystem::path& path) const {
    std::ofstream text(path);
    if (!text) throw ConfigError("cannot write report " + path.string());
    text << to_text();
    auto json_path = path;
    json_path += ".json";
    std::ofstream json(json_path);
    if (!json) throw ConfigError("cannot write report " + json_path.string());
    json << to_json() << '\n';
}

double naturalness(const JudgmentSet& judgments, const std::string& method_id) {
    std::size_t total = 0, realistic = 0;
    for (const auto& j : judgments) {
        if (j.method_id != method_id) continue;
        ++total;
        if (j.realistic) ++realistic;
    }
    if (total == 0) throw StatisticError("no judgments for method '" + method_id + "'");
    return 100.0 * static_cast<double>(realistic) / static_cast<double>(total);
}

std::map<std::string, NaturalnessRow> naturalness_table(const JudgmentSet& judgments) {
    std::map<std::string, NaturalnessRow> rows;
    for (const auto& j : judgments) {
        auto& row = rows[j.method_id];
        ++row.total;
        if (j.realistic) ++row.realistic;
    }
    for (auto& [method, row] : rows) {
        row.percent = 100.0 * static_cast<double>(row.realistic) / static_cast<double>(row.total);
    }
    return rows;
}

}  // namespace chroma
