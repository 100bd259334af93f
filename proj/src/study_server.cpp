#include "chroma/study_server.hpp"

#include <fstream>
#include <iterator>

#include <httplib.h>
#include <json.hpp>

#include "chroma/error.hpp"

namespace chroma::study {
using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, json body) {
    body["version"] = kPayloadVersion;
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    send_json(res, status, {{"error", kind}, {"message", message}});
}

json item_json(const CurrentItem& item, const ServiceOptions& options) {
    json j = {{"session_id", item.session_id}, {"k", item.k}, {"cursor", item.cursor}, {"done", item.done}};
    if (item.done) {
        j["image"] = nullptr;
    } else {
        j["image"] = {{"id", item.public_image_id},
                      {"url", "/api/v1/sessions/" + item.session_id + "/images/" + item.public_image_id}};
    }
    j["time_limit_ms"] = options.time_limit_ms ? json(*options.time_limit_ms) : json(nullptr);
    return j;
}

std::string content_type_for(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    return "application/octet-stream";
}

}  // namespace

struct StudyServer::Impl {
    StudyService& service;
    ServerOptions options;
    httplib::Server server;

    Impl(StudyService& s, ServerOptions o) : service(s), options(std::move(o)) { routes(); }

    // Runs a handler, mapping library errors to HTTP status codes.
    template <typename F>
    void guarded(httplib::Response& res, F&& fn, const std::string& session_id = {}) {
        try {
            fn();
        } catch (const NotFoundError& e) {
            send_error(res, 404, "not_found", e.what());
        } catch (const ProtocolError& e) {
            json body = {{"error", "protocol"}, {"message", e.what()}};
            try {
                if (!session_id.empty()) {
                    const CurrentItem cur = service.current(session_id);
                    body["expected_image_id"] = cur.done ? json(nullptr) : json(cur.public_image_id);
                }
            } catch (const Error&) {
            }
            send_json(res, 409, body);
        } catch (const json::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const FormatError& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const StatisticError& e) {
            send_error(res, 409, "no_data", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Operator-Token");
            res.status = 204;
        });

        server.Get("/api/v1/config", [this](const httplib::Request&, httplib::Response& res) {
            const auto& o = service.options();
            send_json(res, 200,
                      {{"k", o.k}, {"time_limit_ms", o.time_limit_ms ? json(*o.time_limit_ms) : json(nullptr)}});
        });

        server.Post("/api/v1/sessions", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 201, item_json(service.create_session(), service.options())); });
        });

        server.Get(R"(/api/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string sid = req.matches[1];
            guarded(res, [&] { send_json(res, 200, item_json(service.current(sid), service.options())); });
        });

        server.Get(R"(/api/v1/sessions/([^/]+)/images/([^/]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       const std::string sid = req.matches[1];
                       const std::string iid = req.matches[2];
                       guarded(
                           res,
                           [&] {
                               const auto path = service.current_image_path(sid, iid);
                               std::ifstream in(path, std::ios::binary);
                               if (!in) throw NotFoundError("image unavailable");
                               std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
                               res.status = 200;
                               res.set_header("Cache-Control", "no-store");
                               res.set_content(std::move(bytes), content_type_for(path));
                           },
                           sid);
                   });

        server.Post(R"(/api/v1/sessions/([^/]+)/judgments)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        const std::string sid = req.matches[1];
                        guarded(
                            res,
                            [&] {
                                const json body = json::parse(req.body);
                                if (body.contains("version") && body.at("version").get<int>() != kPayloadVersion) {
                                    throw FormatError("unsupported payload version");
                                }
                                const auto iid = body.at("image_id").get<std::string>();
                                Outcome outcome;
                                if (body.value("skipped", false)) {
                                    outcome = Outcome::skipped;
                                } else {
                                    outcome = body.at("realistic").get<bool>() ? Outcome::realistic
                                                                               : Outcome::not_realistic;
                                }
                                const Ack ack = service.record_judgment(sid, iid, outcome);
                                send_json(res, 200, {{"accepted", true}, {"cursor", ack.cursor}, {"done", ack.done}});
                            },
                            sid);
                    });

        server.Get("/api/v1/results", [this](const httplib::Request& req, httplib::Response& res) {
            if (options.operator_token.empty() || req.get_header_value("X-Operator-Token") != options.operator_token) {
                send_error(res, 403, "forbidden", "operator token required");
                return;
            }
            guarded(res, [&] {
                res.status = 200;
                res.set_content(service.results().to_json(), "application/json");
            });
        });

        if (options.static_dir) server.set_mount_point("/", options.static_dir->string());
    }
};

StudyServer::StudyServer(StudyService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool StudyServer::serve() { return impl_->server.listen_after_bind(); }

void StudyServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace chroma::study
