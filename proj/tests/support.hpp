#pragma once

#include <atomic>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "chroma/colorspace.hpp"
#include "chroma/image_io.hpp"

namespace chroma::testing {

namespace fs = std::filesystem;

// Fresh directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("chroma-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline RgbImage solid_image(int h, int w, Rgb8 c) {
    RgbImage img(h, w);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        for (int k = 0; k < 3; ++k) img.data[i * 3 + k] = c[k];
    }
    return img;
}

inline RgbImage noise_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    RgbImage img(h, w);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xFF);
    return img;
}

// Identifier-like tokens of a payload: runs of [A-Za-z0-9_-]. Matching whole
// tokens keeps "realistic" from counting as the method label "real".
inline std::set<std::string> tokens_of(const std::string& text) {
    std::set<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
            cur += c;
        } else if (!cur.empty()) {
            out.insert(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.insert(cur);
    return out;
}

// First hidden label found in a participant-facing payload, or "".
inline std::string leaked_label(const std::string& payload, const std::vector<std::string>& hidden) {
    const auto toks = tokens_of(payload);
    for (const auto& h : hidden) {
        if (toks.count(h)) return h;
    }
    return {};
}

}  // namespace chroma::testing

namespace fs = std::filesystem;
