#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dasa/cox.hpp"
#include "dasa/dataset.hpp"
#include "dasa/oracle.hpp"
#include "dasa/parallel.hpp"
#include "dasa/rsf.hpp"

namespace dasa {

/// Candidate event times T_1 < ... < T_S for the EPI expectation.
struct TimeGrid {
    std::vector<double> times;

    std::size_t size() const noexcept { return times.size(); }
};

/// Quantiles at levels (s - 0.5) / S, s = 1..S, of the observed event times in
/// `train` (5%, 15%, ..., 95% for S = 10); duplicates collapse.
TimeGrid make_time_grid(const Dataset& train, std::size_t points = 10);

/// Per-candidate grid: every time not above the censoring time is moved just
/// past it (a hypothetical event cannot precede observed censoring); duplicates
/// collapse so the grid stays strictly increasing.
TimeGrid adjust_for_censoring(const TimeGrid& grid, double censoring_time);

/// A model fitted on one training set, as the active loop sees it.
class FittedModel {
public:
    virtual ~FittedModel() = default;
    /// Higher means riskier; used for the c-index.
    virtual double risk_score(std::span<const double> x) const = 0;
    /// h(t | x), the EPI weight.
    virtual double hazard(double t, std::span<const double> x) const = 0;
    virtual bool converged() const { return true; }
};

/// A survival model family that can be (re)fitted. fit() must be thread-safe.
class ModelClass {
public:
    virtual ~ModelClass() = default;
    /// Throws dasa::Error on failure. `warm_start` may seed the optimiser.
    virtual std::unique_ptr<FittedModel> fit(const Dataset& train, const FittedModel* warm_start) const = 0;
    virtual std::string name() const = 0;
};

class CoxFitted final : public FittedModel {
public:
    explicit CoxFitted(CoxModel model) : model_(std::move(model)) {}
    double risk_score(std::span<const double> x) const override { return linear_predictor(x, model_.beta); }
    double hazard(double t, std::span<const double> x) const override { return hazard_at(model_, t, x).value; }
    bool converged() const override { return model_.converged; }
    const CoxModel& model() const noexcept { return model_; }

private:
    CoxModel model_;
};

class CoxModelClass final : public ModelClass {
public:
    explicit CoxModelClass(CoxOptions options = {}) : options_(options) {}
    std::unique_ptr<FittedModel> fit(const Dataset& train, const FittedModel* warm_start) const override;
    std::string name() const override { return "cox"; }

private:
    CoxOptions options_;
};

class RsfFitted final : public FittedModel {
public:
    explicit RsfFitted(RsfModel model) : model_(std::move(model)) {}
    double risk_score(std::span<const double> x) const override { return predict_mortality(model_, x); }
    double hazard(double t, std::span<const double> x) const override { return rsf_hazard_at(model_, t, x); }
    const RsfModel& model() const noexcept { return model_; }

private:
    RsfModel model_;
};

class RsfModelClass final : public ModelClass {
public:
    explicit RsfModelClass(RsfConfig config = {}, Execution execution = Execution::serial)
        : config_(config), execution_(execution) {}
    std::unique_ptr<FittedModel> fit(const Dataset& train, const FittedModel* warm_start) const override;
    std::string name() const override { return "rsf"; }

private:
    RsfConfig config_;
    Execution execution_;
};

std::vector<double> risk_scores(const FittedModel& model, const Dataset& data);
double validation_c_index(const FittedModel& model, const Dataset& validation);

/// Marker for a hypothetical refit that failed; never selected.
inline constexpr double kFailedDelta = -std::numeric_limits<double>::infinity();

/// c-index change on `validation` after refitting on train + {candidate observed
/// as an event at `event_time`}. `current_c` is the current model's validation
/// c-index; a failed or non-converged refit yields kFailedDelta.
double delta_c(const ModelClass& model_class, const FittedModel& current, double current_c, const Dataset& train,
               const SurvivalRecord& candidate, double event_time, const Dataset& validation);

/// Convenience form that fits the current model on `train` first.
double delta_c(const ModelClass& model_class, const Dataset& train, const SurvivalRecord& candidate,
               double event_time, const Dataset& validation);

struct EpiTerm {
    double time = 0.0;
    double delta_c = 0.0;
    double weight = 0.0;  // h(T_s | candidate) under the current model
};

struct EpiScore {
    RecordId candidate_id = 0;
    double expected_delta_c = 0.0;
    std::vector<EpiTerm> per_time;
    bool uniform_fallback = false;  // all hazard weights were zero
};

/// Hazard-weighted mean of the terms' delta_c. Any failed term makes the whole
/// score kFailedDelta; zero total weight falls back to uniform weights.
EpiScore combine_terms(RecordId candidate_id, std::vector<EpiTerm> terms);

EpiScore epi_score(const SurvivalRecord& candidate, const FittedModel& current, double current_c,
                   const ModelClass& model_class, const Dataset& train, const Dataset& validation,
                   const TimeGrid& grid);

struct QuerySelection {
    RecordId candidate_id = 0;
    std::vector<EpiScore> scores;  // pool order
};

/// Expected c-index changes closer than this (relative) count as tied.
inline constexpr double kScoreTieTolerance = 1e-12;

/// argmax over the pool of the expected c-index change, ties to the lowest id.
/// The parallel schedule evaluates every (candidate, T_s) refit concurrently
/// and reduces in pool order, so it matches the serial reference exactly.
QuerySelection select_query(const Dataset& pool, const FittedModel& current, double current_c,
                            const ModelClass& model_class, const Dataset& train, const Dataset& validation,
                            const TimeGrid& grid, Execution execution = Execution::parallel);

enum class Strategy { epi, random };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct ActiveConfig {
    int max_iter = 20;
    Strategy strategy = Strategy::epi;
    std::size_t grid_points = 10;
    std::size_t pool_subsample = 0;  // 0 scores the whole pool
    std::uint64_t seed = 0;          // random strategy and pool subsampling
    Execution execution = Execution::parallel;
};

struct RoundRecord {
    int round = 0;
    double c_index = 0.0;
    std::optional<RecordId> selected_id;
    std::optional<double> expected_delta_c;
};

struct ActiveLearningState {
    Dataset train;
    Dataset pool;  // censored candidates in the represented feature space
    Dataset validation;
    std::vector<std::string> original_feature_names;
    std::unordered_map<RecordId, std::vector<double>> pool_originals;  // id -> original features
    int round = 0;
    int max_iter = 0;
    std::vector<RoundRecord> history;  // round 0 baseline first
    std::optional<std::string> error;  // set when a round aborted
    QueryId next_query_id = 1;
};

using RoundObserver = std::function<void(const ActiveLearningState&)>;

/// The active survival loop: fit, score the pool, query the oracle with the
/// chosen record's original features, move it to train as an event at the
/// answered time, refit and record the validation c-index. Runs max_iter
/// rounds unless the pool runs out (clean stop) or a round aborts (error set).
ActiveLearningState run_dasa(ActiveLearningState state, Oracle& oracle, const ModelClass& model_class,
                             const ActiveConfig& config, const RoundObserver& observer = {});

/// round,c_index,selected_id,expected_delta_c
void write_history_csv(const ActiveLearningState& state, const std::string& path);

}  // namespace dasa
