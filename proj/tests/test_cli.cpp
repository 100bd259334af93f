#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "chroma/image_io.hpp"
#include "chroma/study.hpp"
#include "chroma/toy_corpus.hpp"
#include "support.hpp"

using namespace chroma;
using chroma::testing::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out;  // stdout and stderr
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(CHROMA_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

bool one_line_error(const Run& r) {
    return r.code != 0 && r.out.rfind("chroma: error: ", 0) == 0 && r.out.find('\n') == r.out.size() - 1;
}

}  // namespace

TEST_CASE("failures exit nonzero with a one-line diagnostic") {
    TempDir dir("cli");
    const Run none = cli("");
    CHECK(none.code != 0);

    const Run bad_ckpt = cli("colorize --checkpoint " + q(dir / "no.chk") + " --in x.png --out y.png");
    CAPTURE(bad_ckpt.out);
    CHECK(one_line_error(bad_ckpt));

    std::ofstream(dir / "bad.cfg") << "learning_rate = 1\n";
    const Run bad_cfg = cli("train --config " + q(dir / "bad.cfg") + " --corpus " + q(dir.path()) + " --out " +
                            q(dir / "o"));
    CAPTURE(bad_cfg.out);
    CHECK(one_line_error(bad_cfg));

    const Run bad_pool = cli("study-report --store " + q(dir / "s.jsonl") + " --pool " + q(dir / "pool.txt"));
    CHECK(one_line_error(bad_pool));
}

TEST_CASE("train, colorize, evaluate") {
    TempDir dir("cli");
    const Run toy = cli("toy-corpus --out " + q(dir / "toy") + " --count 4 --side 32 --seed 3");
    CAPTURE(toy.out);
    REQUIRE(toy.code == 0);
    CHECK(fs::exists(dir / "toy" / "toy_0003.png"));

    std::ofstream(dir / "run.cfg") << "profile = desk\nside = 32\nbatch_size = 2\nepochs = 1\nwidth_divisor = 16\n";
    const Run train = cli("train --config " + q(dir / "run.cfg") + " --corpus " + q(dir / "toy") + " --out " +
                          q(dir / "out") + " --log-every 1");
    CAPTURE(train.out);
    REQUIRE(train.code == 0);
    CHECK(train.out.find("step=1 ") != std::string::npos);
    CHECK(fs::exists(dir / "out" / "latest.chk"));
    CHECK(fs::exists(dir / "out" / "metrics.log"));

    write_image(dir / "gray.png", to_grayscale(make_toy_image(50, 8)));
    const Run color = cli("colorize --checkpoint " + q(dir / "out" / "latest.chk") + " --in " + q(dir / "gray.png") +
                          " --out " + q(dir / "color.png"));
    CAPTURE(color.out);
    REQUIRE(color.code == 0);
    const RgbImage out = read_image(dir / "color.png");
    CHECK(out.height == 50);
    CHECK(out.width == 50);

    const Run eval = cli("evaluate --checkpoint " + q(dir / "out" / "latest.chk") + " --corpus " + q(dir / "toy") +
                         " --report " + q(dir / "report.txt"));
    CAPTURE(eval.out);
    REQUIRE(eval.code == 0);
    CHECK(eval.out.find("images 4") != std::string::npos);
    CHECK(fs::exists(dir / "report.txt.json"));
}

TEST_CASE("study-report") {
    TempDir dir("cli");
    write_image(dir / "a.png", testing::solid_image(4, 4, {1, 2, 3}));
    std::ofstream(dir / "pool.txt") << "r0 real a.png\nc0 chromagan a.png\n";
    {
        study::JudgmentStore store(dir / "store.jsonl");
        study::StoreRecord r;
        r.session_id = "s";
        r.image_id = "c0";
        r.outcome = study::Outcome::realistic;
        store.append(r);
        r.image_id = "r0";
        r.outcome = study::Outcome::not_realistic;
        store.append(r);
    }
    const Run text = cli("study-report --store " + q(dir / "store.jsonl") + " --pool " + q(dir / "pool.txt"));
    CAPTURE(text.out);
    REQUIRE(text.code == 0);
    CHECK(text.out.find("chromagan") != std::string::npos);
    CHECK(text.out.find("100.00%") != std::string::npos);
    const Run js = cli("study-report --json --store " + q(dir / "store.jsonl") + " --pool " + q(dir / "pool.txt"));
    REQUIRE(js.code == 0);
    CHECK(js.out.find("\"naturalness\":0.0") != std::string::npos);
}
