#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dasa/datakit.hpp"
#include "dasa/dataset.hpp"

namespace dasa {

using QueryId = std::int64_t;

struct QueryContext {
    int round = 0;
    std::optional<double> c_index;
};

/// A request to label one pool record, carrying its original (pre-representation)
/// features and its censoring time in months.
struct OracleQuery {
    QueryId query_id = 0;
    RecordId candidate_id = 0;
    std::vector<std::pair<std::string, double>> original_features;
    double censoring_time = 0.0;
    QueryContext context;

    std::optional<double> feature(const std::string& name) const;
};

struct OracleAnswer {
    QueryId query_id = 0;
    double event_time = 0.0;  // months; never below the query's censoring time
};

class Oracle {
public:
    virtual ~Oracle() = default;
    virtual OracleAnswer answer(const OracleQuery& query) = 0;
    /// True when answer() may be called from several threads at once.
    virtual bool concurrent_safe() const { return false; }
};

/// Answers with the pre-censoring latent event time of synthetic records.
class GroundTruthOracle final : public Oracle {
public:
    explicit GroundTruthOracle(LatentTimes latent_times) : latent_(std::move(latent_times)) {}
    OracleAnswer answer(const OracleQuery& query) override;
    bool concurrent_safe() const override { return true; }

private:
    LatentTimes latent_;
};

enum class Stage { local = 0, regional = 1, distant = 2, unstaged = 3 };

std::string to_string(Stage stage);
Stage stage_from_code(double code);
Stage stage_from_string(const std::string& label);

struct ConditionalSurvivalRow {
    Stage stage = Stage::local;
    int years_since_diagnosis = 0;  // one of 0, 1, 3
    double percent = 100.0;         // surviving the next 5 years
    double ci_low = 100.0;
    double ci_high = 100.0;
};

/// Five-year conditional survival keyed by stage and years since diagnosis.
class ConditionalSurvivalTable {
public:
    explicit ConditionalSurvivalTable(std::vector<ConditionalSurvivalRow> rows);

    /// SEER conditional relative survival for prostate cancer.
    static ConditionalSurvivalTable seer_prostate();

    /// Row for `stage` at the largest tabulated year <= years (0, 1 or 3).
    const ConditionalSurvivalRow& lookup(Stage stage, double years) const;
    const std::vector<ConditionalSurvivalRow>& rows() const noexcept { return rows_; }

private:
    std::vector<ConditionalSurvivalRow> rows_;
};

/// Samples residual lifetimes from an exponential hazard calibrated so that
/// P(residual > 60 months) equals the table's five-year survival. Reads the
/// "stage" feature (code 0-3) and "years_since_diagnosis" (falls back to
/// censoring_time / 12 when absent).
class TableOracle final : public Oracle {
public:
    TableOracle(ConditionalSurvivalTable table, std::uint64_t seed, double epsilon = 1e-4)
        : table_(std::move(table)), seed_(seed), epsilon_(epsilon) {}

    OracleAnswer answer(const OracleQuery& query) override;
    bool concurrent_safe() const override { return true; }

    /// lambda = -ln(clamp(p, eps, 1 - eps)) / 60, per month.
    static double residual_rate(double survival_fraction, double epsilon = 1e-4);

private:
    ConditionalSurvivalTable table_;
    std::uint64_t seed_;
    double epsilon_;
};

struct RoundPoint {
    int round = 0;
    double c_index = 0.0;
};

struct RunStatus {
    std::string state = "idle";  // idle | running | finished | aborted
    int round = 0;
    std::optional<double> c_index;
    std::vector<RoundPoint> history;
    std::size_t train_size = 0;
    std::size_t pool_size = 0;
    std::optional<std::string> error;
};

enum class SubmitOutcome { accepted, not_found, conflict, invalid };

struct SubmitResult {
    SubmitOutcome outcome = SubmitOutcome::accepted;
    std::string message;
};

/// Human-oracle channel between the active loop and a transport (HTTP).
///
/// answer() publishes the query and blocks until submit() delivers a valid
/// label or the timeout elapses (OracleTimeout). At most one query is pending.
/// Answered and expired query ids are remembered so repeats are reported as
/// conflicts rather than silently accepted.
class OracleGateway final : public Oracle {
public:
    explicit OracleGateway(std::chrono::milliseconds timeout) : timeout_(timeout) {}

    OracleAnswer answer(const OracleQuery& query) override;

    std::optional<OracleQuery> pending(std::chrono::milliseconds wait = std::chrono::milliseconds{0});
    SubmitResult submit(QueryId query_id, double event_time);

    void publish_status(RunStatus status);
    RunStatus status() const;

    /// Wakes every waiter; further answer() calls fail immediately.
    void shutdown();

private:
    std::chrono::milliseconds timeout_;
    mutable std::mutex mutex_;
    std::condition_variable query_posted_;
    std::condition_variable answer_posted_;
    std::optional<OracleQuery> pending_;
    std::optional<OracleAnswer> answer_;
    std::set<QueryId> closed_;
    RunStatus status_;
    bool shutdown_ = false;
};

}  // namespace dasa
