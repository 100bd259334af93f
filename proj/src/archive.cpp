#include "chroma/archive.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <torch/torch.h>
#include <zlib.h>

#include "chroma/error.hpp"

namespace chroma {
namespace {

constexpr char kMagic[8] = {'C', 'H', 'R', 'M', 'A', 'R', 'C', '\0'};

std::string dtype_name(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat32: return "f32";
        case torch::kFloat64: return "f64";
        case torch::kInt64: return "i64";
        default: throw FormatError(std::string("unsupported archive dtype ") + c10::toString(t));
    }
}

torch::ScalarType dtype_from(const std::string& name) {
    if (name == "f32") return torch::kFloat32;
    if (name == "f64") return torch::kFloat64;
    if (name == "i64") return torch::kInt64;
    throw FormatError("unknown dtype '" + name + "' in archive");
}

template <typename T>
void append_pod(std::string& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

template <typename T>
T read_pod(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw FormatError("archive truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

uLong crc_update(uLong crc, const char* data, std::size_t n) {
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
        data += chunk;
        n -= chunk;
    }
    return crc;
}

std::uint32_t crc_of(const char* data, std::size_t n) {
    return static_cast<std::uint32_t>(crc_update(crc32(0L, Z_NULL, 0), data, n));
}

}  // namespace

void TensorArchive::put(const std::string& name, const torch::Tensor& value) {
    torch::Tensor t = value.detach().to(torch::kCPU).contiguous().clone();
    dtype_name(t.scalar_type());
    if (auto it = index_.find(name); it != index_.end()) {
        arrays_[it->second].second = t;
        return;
    }
    index_[name] = arrays_.size();
    arrays_.emplace_back(name, std::move(t));
}

bool TensorArchive::contains(const std::string& name) const { return index_.count(name) != 0; }

const torch::Tensor& TensorArchive::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw FormatError("archive has no array named '" + name + "'");
    return arrays_[it->second].second;
}

void TensorArchive::save(const std::filesystem::path& path) const {
    nlohmann::json manifest;
    manifest["metadata"] = metadata_;
    manifest["arrays"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : arrays_) {
        const std::size_t nbytes = t.numel() * t.element_size();
        manifest["arrays"].push_back({{"name", name},
                                      {"shape", t.sizes().vec()},
                                      {"dtype", dtype_name(t.scalar_type())},
                                      {"offset", offset},
                                      {"nbytes", nbytes}});
        offset += nbytes;
    }
    const std::string manifest_text = manifest.dump();

    std::string header;
    header.append(kMagic, sizeof(kMagic));
    append_pod<std::uint32_t>(header, kFormatVersion);
    append_pod<std::uint64_t>(header, manifest_text.size());
    header += manifest_text;

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
        uLong crc = crc32(0L, Z_NULL, 0);
        auto emit = [&](const char* data, std::size_t n) {
            out.write(data, static_cast<std::streamsize>(n));
            crc = crc_update(crc, data, n);
        };
        emit(header.data(), header.size());
        for (const auto& [name, t] : arrays_) {
            emit(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
        }
        std::string trailer;
        append_pod<std::uint32_t>(trailer, static_cast<std::uint32_t>(crc));
        out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
        out.flush();
        if (!out) throw FormatError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open archive " + path.string());
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kMagic) + 4 + 8 + 4 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError(path.string() + ": not a tensor archive or truncated");
    }
    std::size_t pos = sizeof(kMagic);
    const auto version = read_pod<std::uint32_t>(buf, pos);
    if (version != kFormatVersion) {
        throw FormatError(path.string() + ": unsupported archive version " + std::to_string(version));
    }
    const std::size_t body = buf.size() - 4;
    std::size_t crc_pos = body;
    const auto stored_crc = read_pod<std::uint32_t>(buf, crc_pos);
    if (stored_crc != crc_of(buf.data(), body)) {
        throw FormatError(path.string() + ": checksum mismatch (corrupt or truncated)");
    }

    const auto manifest_len = read_pod<std::uint64_t>(buf, pos);
    if (pos + manifest_len > body) throw FormatError(path.string() + ": manifest truncated");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(buf.substr(pos, manifest_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad manifest: " + e.what());
    }
    pos += manifest_len;
    const std::size_t payload = pos;

    TensorArchive archive;
    archive.metadata_ = manifest.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& rec : manifest.at("arrays")) {
        const auto name = rec.at("name").get<std::string>();
        const auto shape = rec.at("shape").get<std::vector<std::int64_t>>();
        const auto dtype = dtype_from(rec.at("dtype").get<std::string>());
        const auto offset = rec.at("offset").get<std::size_t>();
        const auto nbytes = rec.at("nbytes").get<std::size_t>();
        if (payload + offset + nbytes > body) throw FormatError(path.string() + ": array '" + name + "' truncated");
        torch::Tensor t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
        if (static_cast<std::size_t>(t.numel() * t.element_size()) != nbytes) {
            throw FormatError(path.string() + ": array '" + name + "' size does not match its shape");
        }
        std::memcpy(t.data_ptr(), buf.data() + payload + offset, nbytes);
        archive.put(name, t);
    }
    return archive;
}

}  // namespace chroma
