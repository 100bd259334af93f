#include "chroma/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "chroma/error.hpp"
#include "chroma/image_io.hpp"

namespace chroma {
namespace fs = std::filesystem;

Sample make_sample(const RgbImage& img, int side, std::string source_id) {
    if (side <= 0) throw ConfigError("sample side must be positive");
    const RgbImage resized = resize_bilinear(img, side, side);
    const LabImage lab = rgb_to_lab(resized);
    const std::size_t n = lab.pixel_count();

    Sample s;
    s.side = side;
    s.source_id = std::move(source_id);
    s.input_L.resize(n);
    s.target_ab.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        s.input_L[i] = encode_luminance(lab.L[i]);
        s.target_ab[i] = static_cast<float>(encode_chroma(lab.a[i]));
        s.target_ab[n + i] = static_cast<float>(encode_chroma(lab.b[i]));
    }
    return s;
}

Sample prepare_sample(const fs::path& path, int side, std::string source_id) {
    if (source_id.empty()) source_id = path.generic_string();
    return make_sample(read_image(path), side, std::move(source_id));
}

Corpus Corpus::open(const fs::path& location) {
    if (fs::is_directory(location)) return from_directory(location);
    if (fs::is_regular_file(location)) return from_manifest(location);
    throw ConfigError("corpus not found: " + location.string());
}

Corpus Corpus::from_directory(const fs::path& dir) {
    Corpus c;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) c.paths_.push_back(entry.path());
    }
    std::sort(c.paths_.begin(), c.paths_.end());
    for (const auto& p : c.paths_) c.ids_.push_back(fs::relative(p, dir).generic_string());
    return c;
}

Corpus Corpus::from_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw ConfigError("cannot read manifest " + manifest.string());
    Corpus c;
    const fs::path base = manifest.parent_path();
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t\r");
        const std::string entry = line.substr(first, last - first + 1);
        fs::path p(entry);
        c.paths_.push_back(p.is_absolute() ? p : base / p);
        c.ids_.push_back(entry);
    }
    return c;
}

void Corpus::write_manifest(const fs::path& manifest) const {
    std::ofstream out(manifest);
    if (!out) throw ConfigError("cannot write manifest " + manifest.string());
    for (const auto& p : paths_) out << fs::absolute(p).generic_string() << '\n';
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    // Explicit Fisher-Yates: std::shuffle's draw pattern is library-specific.
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

BatchIterator::BatchIterator(Corpus corpus, int batch_size, std::optional<std::uint64_t> shuffle_seed,
                             int side, int workers)
    : corpus_(std::move(corpus)), batch_size_(batch_size), seed_(shuffle_seed), side_(side),
      workers_(std::max(1, workers)) {
    if (corpus_.empty()) throw ConfigError("corpus is empty");
    if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
    if (side_ <= 0) throw ConfigError("side must be positive");
}

std::size_t BatchIterator::batches_per_epoch() const {
    const auto bs = static_cast<std::size_t>(batch_size_);
    return (corpus_.size() + bs - 1) / bs;
}

std::vector<std::size_t> BatchIterator::epoch_order(int epoch) const {
    if (seed_) return epoch_permutation(corpus_.size(), *seed_, epoch);
    std::vector<std::size_t> order(corpus_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    return order;
}

Batch BatchIterator::load_batch(int epoch, std::size_t index) const {
    if (index >= batches_per_epoch()) throw ConfigError("batch index past end of epoch");
    const auto order = epoch_order(epoch);
    const std::size_t begin = index * batch_size_;
    const std::size_t end = std::min(order.size(), begin + batch_size_);

    Batch batch;
    batch.samples.resize(end - begin);
    auto load = [&](std::size_t slot) {
        const std::size_t k = order[begin + slot];
        batch.samples[slot] = prepare_sample(corpus_.path(k), side_, corpus_.source_id(k));
    };
    const std::size_t count = end - begin;
    const auto nworkers = std::min<std::size_t>(workers_, count);
    if (nworkers <= 1) {
        for (std::size_t i = 0; i < count; ++i) load(i);
        return batch;
    }
    // Slots are fixed per sample, so the result matches single-worker loading.
    std::vector<std::exception_ptr> errors(nworkers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nworkers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += nworkers) load(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return batch;
}

std::optional<Batch> BatchIterator::Epoch::next() {
    if (cursor_ >= owner_->batches_per_epoch()) return std::nullopt;
    return owner_->load_batch(epoch_, cursor_++);
}

}  // namespace chroma
