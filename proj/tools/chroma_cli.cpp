// chroma: train, colorize, evaluate and run the perceptual study.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "chroma/error.hpp"
#include "chroma/eval.hpp"
#include "chroma/inference.hpp"
#include "chroma/study.hpp"
#include "chroma/study_server.hpp"
#include "chroma/toy_corpus.hpp"
#include "chroma/trainer.hpp"

namespace fs = std::filesystem;

namespace {

chroma::study::StudyServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

std::string random_token() {
    std::random_device rd;
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%08x%08x%08x%08x", rd(), rd(), rd(), rd());
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial image colorization with a class-distribution head"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train generator and critic on a corpus");
    std::string config_path, corpus_dir, out_dir, resume;
    int log_every = 10;
    train->add_option("--config", config_path, "Key-value training config")->required();
    train->add_option("--corpus", corpus_dir, "Image directory or manifest")->required();
    train->add_option("--out", out_dir, "Output directory (metrics.log, latest.chk)")->required();
    train->add_option("--resume", resume, "Checkpoint to continue from");
    train->add_option("--log-every", log_every, "Print every N steps")->check(CLI::PositiveNumber);

    // colorize
    auto* colorize = app.add_subcommand("colorize", "Colorize one image");
    std::string checkpoint, in_path, out_path;
    colorize->add_option("--checkpoint", checkpoint)->required();
    colorize->add_option("--in", in_path)->required();
    colorize->add_option("--out", out_path)->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Chroma PSNR of a checkpoint over a corpus");
    std::string report_path;
    evaluate->add_option("--checkpoint", checkpoint)->required();
    evaluate->add_option("--corpus", corpus_dir)->required();
    evaluate->add_option("--report", report_path, "Text report; a .json record is written alongside")->required();

    // study-serve
    auto* serve = app.add_subcommand("study-serve", "Serve the perceptual realism study");
    std::string pool_path, store_path = "judgments.jsonl", host = "127.0.0.1", token, static_dir;
    int port = 8080;
    std::size_t k = chroma::study::kDefaultSessionSize;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> time_limit;
    serve->add_option("--pool", pool_path, "Pool manifest: image_id method_id path")->required();
    serve->add_option("--port", port)->required();
    serve->add_option("--seed", seed);
    serve->add_option("--k", k, "Images per session")->check(CLI::PositiveNumber);
    serve->add_option("--time-limit-ms", time_limit, "Per-image display limit enforced by the client");
    serve->add_option("--store", store_path, "Append-only judgment store");
    serve->add_option("--host", host);
    serve->add_option("--operator-token", token, "Token for /api/v1/results (random if omitted)");
    serve->add_option("--static", static_dir, "Directory served at / (study UI build)");

    // study-report
    auto* report = app.add_subcommand("study-report", "Per-method naturalness from a judgment store");
    bool as_json = false;
    report->add_option("--store", store_path)->required();
    report->add_option("--pool", pool_path)->required();
    report->add_flag("--json", as_json);

    // toy-corpus
    auto* toy = app.add_subcommand("toy-corpus", "Write a small synthetic color corpus");
    int count = 32, side = 64;
    std::uint64_t toy_seed = 0;
    toy->add_option("--out", out_dir)->required();
    toy->add_option("--count", count)->check(CLI::PositiveNumber);
    toy->add_option("--side", side)->check(CLI::PositiveNumber);
    toy->add_option("--seed", toy_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto config = chroma::TrainConfig::load(config_path);
            const auto corpus = chroma::Corpus::open(corpus_dir);
            chroma::FitOptions options;
            options.out_dir = out_dir;
            if (!resume.empty()) options.resume_from = fs::path(resume);
            options.on_step = [log_every](std::int64_t step, const chroma::LossReport& r) {
                if (step % log_every == 0) std::cout << r.to_log_line(step) << std::endl;
                return true;
            };
            const auto result = chroma::fit(config, corpus, options);
            std::cout << "steps: " << result.state.step << "\ncheckpoint: " << result.checkpoint.string()
                      << "\nmetrics: " << result.metrics_log.string() << std::endl;
        } else if (*colorize) {
            chroma::run_colorize(checkpoint, in_path, out_path);
        } else if (*evaluate) {
            const auto result = chroma::evaluate_model(checkpoint, chroma::Corpus::open(corpus_dir));
            result.write(report_path);
            std::printf("images %zu  mean PSNR %.4f dB  baseline %.4f dB  failures %zu\n", result.image_count(),
                        result.mean_psnr, result.baseline_mean_psnr, result.failures.size());
        } else if (*serve) {
            chroma::study::ServiceOptions opts;
            opts.k = k;
            opts.seed = seed;
            opts.time_limit_ms = time_limit;
            chroma::study::StudyService service(chroma::study::StudyPool::load(pool_path), store_path, opts);
            chroma::study::ServerOptions sopts;
            sopts.operator_token = token.empty() ? random_token() : token;
            if (!static_dir.empty()) sopts.static_dir = fs::path(static_dir);
            chroma::study::StudyServer server(service, sopts);
            const int bound = server.bind(host, port);
            if (bound < 0) throw chroma::Error("cannot bind " + host + ":" + std::to_string(port));
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "study: http://" << host << ":" << bound << "  pool " << service.pool().size()
                      << " images, k=" << k << "\noperator token: " << sopts.operator_token << std::endl;
            server.serve();
            g_server = nullptr;
        } else if (*report) {
            const auto pool = chroma::study::StudyPool::load(pool_path);
            const auto table = chroma::study::session_results(pool, chroma::study::JudgmentStore::read(store_path));
            std::cout << (as_json ? table.to_json() + "\n" : table.to_text());
        } else if (*toy) {
            const auto paths = chroma::write_toy_corpus(out_dir, count, side, toy_seed);
            std::cout << "wrote " << paths.size() << " images to " << out_dir << std::endl;
        }
    } catch (const std::exception& e) {
        std::cerr << "chroma: error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
