#include "dasa/oracle_http.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "dasa/errors.hpp"

namespace dasa {
namespace {

using json = nlohmann::ordered_json;

constexpr int kMaxWaitSeconds = 60;

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, json{{"error", message}});
}

}  // namespace

json query_to_json(const OracleQuery& query) {
    json features = json::object();
    for (const auto& [name, value] : query.original_features) features[name] = value;
    json context{{"round", query.context.round}, {"c_index", nullptr}};
    if (query.context.c_index) context["c_index"] = *query.context.c_index;
    return json{{"query_id", query.query_id},
                {"candidate_id", query.candidate_id},
                {"original_features", features},
                {"censoring_time", query.censoring_time},
                {"context", context}};
}

json status_to_json(const RunStatus& status) {
    json history = json::array();
    for (const auto& p : status.history) history.push_back(json{{"round", p.round}, {"c_index", p.c_index}});
    json out{{"state", status.state},
             {"round", status.round},
             {"c_index", nullptr},
             {"history", history},
             {"train_size", status.train_size},
             {"pool_size", status.pool_size},
             {"error", nullptr}};
    if (status.c_index) out["c_index"] = *status.c_index;
    if (status.error) out["error"] = *status.error;
    return out;
}

struct OracleHttpServer::Impl {
    explicit Impl(OracleGateway& g) : gateway(g) {}

    OracleGateway& gateway;
    httplib::Server server;
    std::thread thread;
    int port = 0;
};

OracleHttpServer::OracleHttpServer(OracleGateway& gateway) : impl_(std::make_unique<Impl>(gateway)) {
    auto& server = impl_->server;
    OracleGateway& g = gateway;

    server.Get("/api/v1/queries/pending", [&g](const httplib::Request& req, httplib::Response& res) {
        int wait = 0;
        if (req.has_param("wait_seconds")) {
            try {
                wait = std::stoi(req.get_param_value("wait_seconds"));
            } catch (const std::exception&) {
                send_error(res, 422, "wait_seconds must be an integer");
                return;
            }
            if (wait < 0) {
                send_error(res, 422, "wait_seconds must be >= 0");
                return;
            }
        }
        const auto query = g.pending(std::chrono::seconds(std::min(wait, kMaxWaitSeconds)));
        send_json(res, 200, json{{"query", query ? query_to_json(*query) : json(nullptr)}});
    });

    server.Post(R"(/api/v1/queries/(-?\d+)/answer)", [&g](const httplib::Request& req, httplib::Response& res) {
        QueryId id = 0;
        try {
            id = std::stoll(req.matches[1].str());
        } catch (const std::exception&) {
            send_error(res, 404, "unknown query id");
            return;
        }
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            send_error(res, 422, "body must be a JSON object");
            return;
        }
        const auto it = body.find("event_time");
        if (it == body.end() || !it->is_number()) {
            send_error(res, 422, "event_time must be a number (months)");
            return;
        }
        const auto result = g.submit(id, it->get<double>());
        switch (result.outcome) {
            case SubmitOutcome::accepted:
                send_json(res, 200, json{{"status", "accepted"}, {"query_id", id}});
                return;
            case SubmitOutcome::not_found: send_error(res, 404, result.message); return;
            case SubmitOutcome::conflict: send_error(res, 409, result.message); return;
            case SubmitOutcome::invalid: send_error(res, 422, result.message); return;
        }
    });

    server.Get("/api/v1/run/status", [&g](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, status_to_json(g.status()));
    });
}

OracleHttpServer::~OracleHttpServer() { stop(); }

int OracleHttpServer::start(const std::string& host, int port) {
    auto& impl = *impl_;
    if (impl.thread.joinable()) throw Error("oracle server already running");
    const int bound = port == 0 ? impl.server.bind_to_any_port(host) : (impl.server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind oracle server to " + host + ":" + std::to_string(port));
    impl.port = bound;
    impl.thread = std::thread([&impl] { impl.server.listen_after_bind(); });
    impl.server.wait_until_ready();
    return bound;
}

void OracleHttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int OracleHttpServer::port() const noexcept { return impl_->port; }

}  // namespace dasa
