#pragma once

#include <atomic>
#include <set>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vslan/errors.hpp"
#include "vslan/metrics.hpp"

namespace vslan::mock {

using json = nlohmann::json;

// Token-overlap F1 between two sentences under metric tokenization; a
// deterministic, order-free stand-in for an entailment score.
inline double overlap_f1(const std::string& premise, const std::string& hypothesis) {
    std::set<std::string> p, h;
    for (const auto& t : metrics::tokenize(premise)) p.insert(t);
    for (const auto& t : metrics::tokenize(hypothesis)) h.insert(t);
    if (p.empty() || h.empty()) return 0.0;
    size_t shared = 0;
    for (const auto& t : h)
        if (p.count(t)) ++shared;
    if (shared == 0) return 0.0;
    double prec = static_cast<double>(shared) / static_cast<double>(h.size());
    double rec = static_cast<double>(shared) / static_cast<double>(p.size());
    return 2.0 * prec * rec / (prec + rec);
}

inline void configure_server(httplib::Server& server) {
    server.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            res.status = 400;
            res.set_content(json{{"error", "request body is not valid JSON"}}.dump(),
                            "application/json");
            return;
        }
        if (!body.contains("premise") || !body.contains("hypothesis") ||
            !body["premise"].is_string() || !body["hypothesis"].is_string()) {
            res.status = 400;
            res.set_content(
                json{{"error", "expected string fields \"premise\" and \"hypothesis\""}}.dump(),
                "application/json");
            return;
        }
        double s = overlap_f1(body["premise"].get<std::string>(),
                              body["hypothesis"].get<std::string>());
        res.set_content(json{{"score", s}}.dump(), "application/json");
    });
}

// In-process server for tests. start() binds (port 0 picks a free one) and
// serves on a background thread.
class MockEntailmentServer {
public:
    ~MockEntailmentServer() { stop(); }

    int start(int port = 0) {
        configure_server(server_);
        if (port == 0) {
            port_ = server_.bind_to_any_port("127.0.0.1");
            if (port_ <= 0) throw Error(ErrorKind::config, "mock server: could not bind a port");
        } else {
            if (!server_.bind_to_port("127.0.0.1", port))
                throw Error(ErrorKind::config,
                            "mock server: could not bind port " + std::to_string(port));
            port_ = port;
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    int port() const { return port_; }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace vslan::mock
