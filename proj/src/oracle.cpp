#include "dasa/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dasa/errors.hpp"
#include "dasa/parallel.hpp"

namespace dasa {

std::optional<double> OracleQuery::feature(const std::string& name) const {
    for (const auto& [key, value] : original_features) {
        if (key == name) return value;
    }
    return std::nullopt;
}

OracleAnswer GroundTruthOracle::answer(const OracleQuery& query) {
    auto it = latent_.find(query.candidate_id);
    if (it == latent_.end()) {
        throw UnknownCandidate("no latent time for candidate " + std::to_string(query.candidate_id));
    }
    if (it->second < query.censoring_time) {
        throw InvariantViolation("latent time " + std::to_string(it->second) + " of candidate " +
                                 std::to_string(query.candidate_id) + " precedes its censoring time " +
                                 std::to_string(query.censoring_time));
    }
    return {query.query_id, it->second};
}

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::local: return "Local";
        case Stage::regional: return "Regional";
        case Stage::distant: return "Distant";
        case Stage::unstaged: return "Unstaged";
    }
    return "Unknown";
}

Stage stage_from_code(double code) {
    const double r = std::round(code);
    if (r != code || r < 0 || r > 3) throw ValidationError("stage code must be 0, 1, 2 or 3");
    return static_cast<Stage>(static_cast<int>(r));
}

Stage stage_from_string(const std::string& label) {
    std::string lower(label);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "local") return Stage::local;
    if (lower == "regional") return Stage::regional;
    if (lower == "distant") return Stage::distant;
    if (lower == "unstaged") return Stage::unstaged;
    throw ValidationError("unknown stage '" + label + "'");
}

ConditionalSurvivalTable::ConditionalSurvivalTable(std::vector<ConditionalSurvivalRow> rows) : rows_(std::move(rows)) {
    for (const auto& r : rows_) {
        if (r.percent < 0 || r.percent > 100 || r.ci_low < 0 || r.ci_high > 100 || r.ci_low > r.percent ||
            r.percent > r.ci_high) {
            throw ValidationError("conditional survival row for " + to_string(r.stage) + ", year " +
                                  std::to_string(r.years_since_diagnosis) + " violates 0 <= low <= point <= high <= 100");
        }
    }
}

ConditionalSurvivalTable ConditionalSurvivalTable::seer_prostate() {
    using S = Stage;
    return ConditionalSurvivalTable({
        {S::local, 0, 100.0, 100.0, 100.0},
        {S::local, 1, 100.0, 100.0, 100.0},
        {S::local, 3, 100.0, 100.0, 100.0},
        {S::regional, 0, 100.0, 100.0, 100.0},
        {S::regional, 1, 99.3, 98.9, 99.5},
        {S::regional, 3, 98.9, 98.4, 99.2},
        {S::distant, 0, 29.2, 28.4, 29.9},
        {S::distant, 1, 34.1, 33.1, 35.1},
        {S::distant, 3, 45.6, 43.9, 47.2},
        {S::unstaged, 0, 76.6, 75.6, 77.5},
        {S::unstaged, 1, 81.1, 79.8, 82.1},
        {S::unstaged, 3, 82.8, 81.4, 84.1},
    });
}

const ConditionalSurvivalRow& ConditionalSurvivalTable::lookup(Stage stage, double years) const {
    const ConditionalSurvivalRow* best = nullptr;
    for (const auto& r : rows_) {
        if (r.stage != stage || r.years_since_diagnosis > years) continue;
        if (!best || r.years_since_diagnosis > best->years_since_diagnosis) best = &r;
    }
    if (!best) {
        throw ValidationError("no conditional survival row for stage " + to_string(stage) + " at " +
                              std::to_string(years) + " years");
    }
    return *best;
}

double TableOracle::residual_rate(double survival_fraction, double epsilon) {
    const double p = std::clamp(survival_fraction, epsilon, 1.0 - epsilon);
    return -std::log(p) / 60.0;
}

OracleAnswer TableOracle::answer(const OracleQuery& query) {
    const auto stage_code = query.feature("stage");
    if (!stage_code) throw MissingFeature("query " + std::to_string(query.query_id) + " has no 'stage' feature");
    const double years = query.feature("years_since_diagnosis").value_or(query.censoring_time / 12.0);
    const auto& row = table_.lookup(stage_from_code(*stage_code), std::max(0.0, years));

    const double rate = residual_rate(row.percent / 100.0, epsilon_);
    std::mt19937_64 rng(derive_seed(derive_seed(seed_, static_cast<std::uint64_t>(query.query_id)),
                                    static_cast<std::uint64_t>(query.candidate_id)));
    std::exponential_distribution<double> residual(rate);
    return {query.query_id, query.censoring_time + residual(rng)};
}

OracleAnswer OracleGateway::answer(const OracleQuery& query) {
    std::unique_lock lock(mutex_);
    if (shutdown_) throw OracleError("oracle gateway is shut down");
    pending_ = query;
    answer_.reset();
    query_posted_.notify_all();

    const bool got = answer_posted_.wait_for(lock, timeout_, [&] { return answer_.has_value() || shutdown_; });
    if (!got || !answer_) {
        pending_.reset();
        closed_.insert(query.query_id);
        if (shutdown_) throw OracleError("oracle gateway shut down while waiting for query " +
                                         std::to_string(query.query_id));
        throw OracleTimeout("no answer for query " + std::to_string(query.query_id) + " within " +
                            std::to_string(timeout_.count()) + " ms");
    }
    OracleAnswer out = *answer_;
    answer_.reset();
    return out;
}

std::optional<OracleQuery> OracleGateway::pending(std::chrono::milliseconds wait) {
    std::unique_lock lock(mutex_);
    if (wait.count() > 0) query_posted_.wait_for(lock, wait, [&] { return pending_.has_value() || shutdown_; });
    return pending_;
}

SubmitResult OracleGateway::submit(QueryId query_id, double event_time) {
    std::lock_guard lock(mutex_);
    if (!pending_ || pending_->query_id != query_id) {
        if (closed_.contains(query_id)) {
            return {SubmitOutcome::conflict, "query " + std::to_string(query_id) + " is already closed"};
        }
        return {SubmitOutcome::not_found, "no pending query with id " + std::to_string(query_id)};
    }
    if (!std::isfinite(event_time)) return {SubmitOutcome::invalid, "event_time must be a finite number"};
    if (event_time < pending_->censoring_time) {
        return {SubmitOutcome::invalid, "event_time " + std::to_string(event_time) +
                                            " is below the censoring time " +
                                            std::to_string(pending_->censoring_time)};
    }
    answer_ = OracleAnswer{query_id, event_time};
    closed_.insert(query_id);
    pending_.reset();
    answer_posted_.notify_all();
    return {SubmitOutcome::accepted, "accepted"};
}

void OracleGateway::publish_status(RunStatus status) {
    std::lock_guard lock(mutex_);
    status_ = std::move(status);
}

RunStatus OracleGateway::status() const {
    std::lock_guard lock(mutex_);
    return status_;
}

void OracleGateway::shutdown() {
    std::lock_guard lock(mutex_);
    shutdown_ = true;
    query_posted_.notify_all();
    answer_posted_.notify_all();
}

}  // namespace dasa
