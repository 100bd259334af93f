#include <doctest.h>

#include <fstream>

#include <torch/torch.h>

#include "chroma/archive.hpp"
#include "chroma/error.hpp"
#include "support.hpp"

using namespace chroma;
using chroma::testing::TempDir;

namespace {

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TensorArchive sample_archive() {
    torch::manual_seed(0);
    TensorArchive a;
    a.put("w", torch::randn({3, 4, 2}));
    a.put("d", torch::randn({5}, torch::kFloat64));
    a.put("steps", torch::tensor(std::vector<std::int64_t>{7, -3, std::int64_t(1) << 40}));
    a.put("scalar", torch::tensor(2.5f));
    a.metadata()["note"] = "hello = world";
    return a;
}

}  // namespace

TEST_CASE("save and load round trip bitwise") {
    TempDir dir("arc");
    const TensorArchive a = sample_archive();
    a.save(dir / "a.arc");
    CHECK_FALSE(fs::exists(dir / "a.arc.tmp"));

    const TensorArchive b = TensorArchive::load(dir / "a.arc");
    REQUIRE(b.arrays().size() == a.arrays().size());
    for (const auto& [name, t] : a.arrays()) {
        REQUIRE(b.contains(name));
        CHECK(b.get(name).sizes() == t.sizes());
        CHECK(b.get(name).dtype() == t.dtype());
        CHECK(torch::equal(b.get(name), t));
    }
    CHECK(b.metadata().at("note") == "hello = world");
    CHECK_THROWS_AS(b.get("nope"), FormatError);
}

TEST_CASE("put stores a copy") {
    TensorArchive a;
    auto t = torch::zeros({2});
    a.put("t", t);
    t.fill_(1.0);
    CHECK(a.get("t").sum().item<float>() == 0.0f);
}

TEST_CASE("corruption is detected") {
    TempDir dir("arc");
    sample_archive().save(dir / "a.arc");
    const auto bytes = slurp(dir / "a.arc");

    SUBCASE("truncation") {
        for (std::size_t keep : {std::size_t(0), std::size_t(5), std::size_t(20), bytes.size() / 2, bytes.size() - 1}) {
            dump(dir / "t.arc", std::vector<char>(bytes.begin(), bytes.begin() + keep));
            CHECK_THROWS_AS(TensorArchive::load(dir / "t.arc"), FormatError);
        }
    }
    SUBCASE("flipped payload byte") {
        auto bad = bytes;
        bad[bad.size() - 10] ^= 0x01;
        dump(dir / "f.arc", bad);
        CHECK_THROWS_AS(TensorArchive::load(dir / "f.arc"), FormatError);
    }
    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'X';
        dump(dir / "m.arc", bad);
        CHECK_THROWS_AS(TensorArchive::load(dir / "m.arc"), FormatError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(TensorArchive::load(dir / "none.arc"), FormatError); }
}

TEST_CASE("unsupported dtype is rejected") {
    TensorArchive a;
    CHECK_THROWS_AS(a.put("u8", torch::zeros({2}, torch::kUInt8)), FormatError);
}
