#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/types.h>

namespace chroma {

/// Flat archive of named arrays plus string metadata.
///
/// Layout (little endian):
///   8 bytes   magic "CHRMARC\0"
///   u32       format version
///   u64       manifest length
///   manifest  JSON: {"metadata": {k: v}, "arrays": [{name, shape, dtype, offset, nbytes}]}
///   payload   raw array bytes, offsets relative to payload start
///   u32       CRC-32 over everything above
///
/// Supported dtypes: f32, f64, i64.
class TensorArchive {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    void put(const std::string& name, const torch::Tensor& value);
    bool contains(const std::string& name) const;
    /// Throws FormatError when absent.
    const torch::Tensor& get(const std::string& name) const;
    const std::vector<std::pair<std::string, torch::Tensor>>& arrays() const { return arrays_; }

    std::map<std::string, std::string>& metadata() { return metadata_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    /// Writes to a sibling temp file, then renames over `path`.
    void save(const std::filesystem::path& path) const;
    /// Throws FormatError on bad magic, unknown version, truncation or checksum mismatch.
    static TensorArchive load(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, torch::Tensor>> arrays_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, std::string> metadata_;
};

}  // namespace chroma
