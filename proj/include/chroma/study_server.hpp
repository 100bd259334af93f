#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "chroma/study.hpp"

namespace chroma::study {

/// HTTP transport for StudyService. All bodies are JSON objects carrying
/// "version": 1.
///
///   GET  /api/v1/config                          k, time_limit_ms
///   POST /api/v1/sessions                        new session → current item
///   GET  /api/v1/sessions/{sid}                  current item (id only)
///   GET  /api/v1/sessions/{sid}/images/{iid}     bytes of the current image
///   POST /api/v1/sessions/{sid}/judgments        {"image_id", "realistic": bool} or {"image_id", "skipped": true}
///   GET  /api/v1/results                         per-method table; needs X-Operator-Token
///
/// Errors come back as {"version", "error", "message"[, "expected_image_id"]}
/// with 400 (bad request), 404 (unknown session), 409 (protocol) or 403.
struct ServerOptions {
    std::string operator_token;
    std::optional<std::filesystem::path> static_dir;
};

class StudyServer {
public:
    StudyServer(StudyService& service, ServerOptions options);
    ~StudyServer();
    StudyServer(const StudyServer&) = delete;
    StudyServer& operator=(const StudyServer&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace chroma::study
