#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chroma/colorspace.hpp"

namespace chroma {

inline constexpr int kDefaultSide = 224;

/// One self-supervised training pair. Planes are row-major; target_ab holds the
/// a plane followed by the b plane.
struct Sample {
    int side = 0;
    std::vector<float> input_L;    // side², encode_luminance
    std::vector<float> target_ab;  // 2·side², encode_chroma
    std::string source_id;
};

struct Batch {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    int side() const { return samples.empty() ? 0 : samples.front().side; }
};

/// Lab conversion at side×side, split into encoded planes.
Sample make_sample(const RgbImage& img, int side, std::string source_id);

/// Reads `path`, resizes bilinearly to side×side, converts to Lab and encodes.
/// Throws IngestionError carrying the path.
Sample prepare_sample(const std::filesystem::path& path, int side = kDefaultSide,
                      std::string source_id = {});

/// Ordered list of image files. source_id is the path relative to the root.
class Corpus {
public:
    /// A directory is scanned recursively for PNG/JPEG; a regular file is read
    /// as a manifest of one path per line (relative to the manifest's folder,
    /// blank lines and '#' comments skipped).
    static Corpus open(const std::filesystem::path& location);
    static Corpus from_directory(const std::filesystem::path& dir);
    static Corpus from_manifest(const std::filesystem::path& manifest);

    std::size_t size() const { return paths_.size(); }
    bool empty() const { return paths_.empty(); }
    const std::filesystem::path& path(std::size_t i) const { return paths_.at(i); }
    const std::string& source_id(std::size_t i) const { return ids_.at(i); }

    void write_manifest(const std::filesystem::path& manifest) const;

private:
    std::vector<std::filesystem::path> paths_;
    std::vector<std::string> ids_;
};

/// Deterministic Fisher-Yates permutation of [0, n) for (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch);

/// Epoch-based batching over a corpus. Every epoch yields each sample exactly
/// once; the final partial batch is kept. With no seed the corpus order is used.
class BatchIterator {
public:
    BatchIterator(Corpus corpus, int batch_size, std::optional<std::uint64_t> shuffle_seed,
                  int side = kDefaultSide, int workers = 1);

    std::size_t batches_per_epoch() const;
    std::vector<std::size_t> epoch_order(int epoch) const;
    Batch load_batch(int epoch, std::size_t index) const;

    /// Sequential view of one epoch.
    class Epoch {
    public:
        std::optional<Batch> next();

    private:
        friend class BatchIterator;
        Epoch(const BatchIterator& owner, int epoch) : owner_(&owner), epoch_(epoch) {}
        const BatchIterator* owner_;
        int epoch_;
        std::size_t cursor_ = 0;
    };
    Epoch epoch(int e) const { return Epoch(*this, e); }

    const Corpus& corpus() const { return corpus_; }
    int batch_size() const { return batch_size_; }
    int side() const { return side_; }

private:
    Corpus corpus_;
    int batch_size_;
    std::optional<std::uint64_t> seed_;
    int side_;
    int workers_;
};

}  // namespace chroma
