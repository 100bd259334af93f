#include "chroma/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "chroma/error.hpp"

namespace chroma {
namespace {

cv::Mat as_mat(const RgbImage& img) {
    const int type = CV_8UC(img.channels);
    return cv::Mat(img.height, img.width, type, const_cast<std::uint8_t*>(img.data.data()));
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
    cv::Mat bgr;
    try {
        bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw IngestionError(path.string(), e.what());
    }
    if (bgr.empty()) throw IngestionError(path.string(), "unreadable or corrupt image");
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    RgbImage out(rgb.rows, rgb.cols, 3);
    for (int y = 0; y < rgb.rows; ++y) {
        std::memcpy(out.data.data() + static_cast<std::size_t>(y) * rgb.cols * 3, rgb.ptr(y),
                    static_cast<std::size_t>(rgb.cols) * 3);
    }
    return out;
}

void write_image(const std::filesystem::path& path, const RgbImage& img) {
    if (img.channels != 3 && img.channels != 1) {
        throw FormatError("write_image supports 1 or 3 channels");
    }
    cv::Mat out;
    if (img.channels == 3) {
        cv::cvtColor(as_mat(img), out, cv::COLOR_RGB2BGR);
    } else {
        out = as_mat(img);
    }
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), out);
    } catch (const cv::Exception& e) {
        throw IngestionError(path.string(), e.what());
    }
    if (!ok) throw IngestionError(path.string(), "could not encode image");
}

RgbImage resize_bilinear(const RgbImage& img, int height, int width) {
    if (img.height == height && img.width == width) return img;
    cv::Mat dst;
    cv::resize(as_mat(img), dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
    RgbImage out(height, width, img.channels);
    const auto row = static_cast<std::size_t>(width) * img.channels;
    for (int y = 0; y < height; ++y) std::memcpy(out.data.data() + y * row, dst.ptr(y), row);
    return out;
}

std::vector<double> resize_plane(const std::vector<double>& plane, int height, int width,
                                 int new_height, int new_width) {
    if (height == new_height && width == new_width) return plane;
    cv::Mat src(height, width, CV_64F, const_cast<double*>(plane.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(new_width, new_height), 0, 0, cv::INTER_LINEAR);
    std::vector<double> out(static_cast<std::size_t>(new_height) * new_width);
    for (int y = 0; y < new_height; ++y) {
        std::memcpy(out.data() + static_cast<std::size_t>(y) * new_width, dst.ptr<double>(y),
                    sizeof(double) * new_width);
    }
    return out;
}

bool is_image_file(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace chroma
