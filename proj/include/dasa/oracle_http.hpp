#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "dasa/oracle.hpp"

namespace dasa {

nlohmann::ordered_json query_to_json(const OracleQuery& query);
nlohmann::ordered_json status_to_json(const RunStatus& status);

/// JSON front end for an OracleGateway.
///
///   GET  /api/v1/queries/pending?wait_seconds=N   {"query": {...} | null}
///   POST /api/v1/queries/{id}/answer              {"event_time": months}
///   GET  /api/v1/run/status                       {"state", "round", "c_index", "history", ...}
///
/// Answer responses: 200 accepted, 404 unknown id, 409 already closed,
/// 422 malformed body or event_time below the censoring time.
class OracleHttpServer {
public:
    explicit OracleHttpServer(OracleGateway& gateway);
    ~OracleHttpServer();

    OracleHttpServer(const OracleHttpServer&) = delete;
    OracleHttpServer& operator=(const OracleHttpServer&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port. Throws Error when binding fails.
    int start(const std::string& host, int port);
    void stop();
    int port() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace dasa
