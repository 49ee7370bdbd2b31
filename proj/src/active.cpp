#include "dasa/active.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "dasa/concordance.hpp"
#include "dasa/errors.hpp"

namespace dasa {
namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

SurvivalRecord as_event(const SurvivalRecord& candidate, double event_time) {
    return {candidate.id, candidate.covariates, event_time, true};
}

}  // namespace

TimeGrid make_time_grid(const Dataset& train, std::size_t points) {
    if (points == 0) throw ValidationError("time grid needs at least one point");
    std::vector<double> event_times;
    for (const auto& r : train.records()) {
        if (r.event) event_times.push_back(r.time);
    }
    if (event_times.empty()) throw NoEvents("time grid needs observed event times");
    std::sort(event_times.begin(), event_times.end());

    TimeGrid grid;
    const double last = static_cast<double>(event_times.size() - 1);
    for (std::size_t s = 1; s <= points; ++s) {
        const double level = (static_cast<double>(s) - 0.5) / static_cast<double>(points);
        const double h = last * level;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, event_times.size() - 1);
        const double q = event_times[lo] + (h - static_cast<double>(lo)) * (event_times[hi] - event_times[lo]);
        if (grid.times.empty() || q > grid.times.back()) grid.times.push_back(q);
    }
    return grid;
}

TimeGrid adjust_for_censoring(const TimeGrid& grid, double censoring_time) {
    const double just_after = std::nextafter(censoring_time, std::numeric_limits<double>::infinity());
    TimeGrid out;
    for (double t : grid.times) {
        const double v = t > censoring_time ? t : just_after;
        if (out.times.empty() || v > out.times.back()) out.times.push_back(v);
    }
    return out;
}

std::unique_ptr<FittedModel> CoxModelClass::fit(const Dataset& train, const FittedModel* warm_start) const {
    std::span<const double> init;
    if (const auto* cox = dynamic_cast<const CoxFitted*>(warm_start)) {
        if (cox->model().beta.size() == train.n_features()) init = cox->model().beta;
    }
    return std::make_unique<CoxFitted>(fit_cox(train, options_, init));
}

std::unique_ptr<FittedModel> RsfModelClass::fit(const Dataset& train, const FittedModel*) const {
    return std::make_unique<RsfFitted>(fit_rsf(train, config_, execution_));
}

std::vector<double> risk_scores(const FittedModel& model, const Dataset& data) {
    std::vector<double> scores;
    scores.reserve(data.size());
    for (const auto& r : data.records()) scores.push_back(model.risk_score(r.covariates));
    return scores;
}

double validation_c_index(const FittedModel& model, const Dataset& validation) {
    const auto scores = risk_scores(model, validation);
    return concordance_index(scores, validation).c_index;
}

double delta_c(const ModelClass& model_class, const FittedModel& current, double current_c, const Dataset& train,
               const SurvivalRecord& candidate, double event_time, const Dataset& validation) {
    try {
        Dataset augmented = train;
        augmented.add(as_event(candidate, event_time));
        const auto refit = model_class.fit(augmented, &current);
        if (!refit->converged()) return kFailedDelta;
        return validation_c_index(*refit, validation) - current_c;
    } catch (const Error&) {
        return kFailedDelta;
    }
}

double delta_c(const ModelClass& model_class, const Dataset& train, const SurvivalRecord& candidate,
               double event_time, const Dataset& validation) {
    const auto current = model_class.fit(train, nullptr);
    const double current_c = validation_c_index(*current, validation);
    return delta_c(model_class, *current, current_c, train, candidate, event_time, validation);
}

EpiScore combine_terms(RecordId candidate_id, std::vector<EpiTerm> terms) {
    EpiScore score;
    score.candidate_id = candidate_id;
    score.per_time = std::move(terms);
    double weight_sum = 0.0, weighted = 0.0, plain = 0.0;
    for (const auto& t : score.per_time) {
        if (t.delta_c == kFailedDelta) {
            score.expected_delta_c = kFailedDelta;
            return score;
        }
        weight_sum += t.weight;
        weighted += t.weight * t.delta_c;
        plain += t.delta_c;
    }
    if (weight_sum > 0.0) {
        score.expected_delta_c = weighted / weight_sum;
    } else {
        score.uniform_fallback = true;
        score.expected_delta_c = plain / static_cast<double>(score.per_time.size());
    }
    return score;
}

EpiScore epi_score(const SurvivalRecord& candidate, const FittedModel& current, double current_c,
                   const ModelClass& model_class, const Dataset& train, const Dataset& validation,
                   const TimeGrid& grid) {
    const TimeGrid own = adjust_for_censoring(grid, candidate.time);
    std::vector<EpiTerm> terms;
    for (double t : own.times) {
        terms.push_back({t, delta_c(model_class, current, current_c, train, candidate, t, validation),
                         current.hazard(t, candidate.covariates)});
    }
    return combine_terms(candidate.id, std::move(terms));
}

QuerySelection select_query(const Dataset& pool, const FittedModel& current, double current_c,
                            const ModelClass& model_class, const Dataset& train, const Dataset& validation,
                            const TimeGrid& grid, Execution execution) {
    if (pool.empty()) throw EmptyPool();
    if (grid.times.empty()) throw ValidationError("time grid is empty");

    QuerySelection out;
    if (execution == Execution::serial) {
        for (const auto& candidate : pool.records()) {
            out.scores.push_back(epi_score(candidate, current, current_c, model_class, train, validation, grid));
        }
    } else {
        // Weights are cheap and computed up front; the refits run as one flat
        // parallel loop over every (candidate, time) pair.
        const std::size_t n = pool.size();
        std::vector<std::vector<EpiTerm>> terms(n);
        std::vector<std::pair<std::size_t, std::size_t>> work;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& candidate = pool[i];
            for (double t : adjust_for_censoring(grid, candidate.time).times) {
                terms[i].push_back({t, 0.0, current.hazard(t, candidate.covariates)});
                work.emplace_back(i, terms[i].size() - 1);
            }
        }
        const auto total = static_cast<std::ptrdiff_t>(work.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t k = 0; k < total; ++k) {
            const auto [i, s] = work[static_cast<std::size_t>(k)];
            auto& term = terms[i][s];
            term.delta_c = delta_c(model_class, current, current_c, train, pool[i], term.time, validation);
        }
        for (std::size_t i = 0; i < n; ++i) out.scores.push_back(combine_terms(pool[i].id, std::move(terms[i])));
    }

    const EpiScore* best = nullptr;
    for (const auto& s : out.scores) {
        if (!best) {
            best = &s;
            continue;
        }
        const double a = s.expected_delta_c, b = best->expected_delta_c;
        const bool tied = a == b || std::abs(a - b) <= kScoreTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
        if ((!tied && a > b) || (tied && s.candidate_id < best->candidate_id)) best = &s;
    }
    out.candidate_id = best->candidate_id;
    return out;
}

std::string to_string(Strategy s) { return s == Strategy::epi ? "epi" : "random"; }

Strategy strategy_from_string(const std::string& name) {
    if (name == "epi") return Strategy::epi;
    if (name == "random") return Strategy::random;
    throw ValidationError("unknown strategy '" + name + "' (expected epi or random)");
}

ActiveLearningState run_dasa(ActiveLearningState state, Oracle& oracle, const ModelClass& model_class,
                             const ActiveConfig& config, const RoundObserver& observer) {
    if (config.max_iter < 0) throw ValidationError("max_iter must be >= 0");
    for (const auto& r : state.pool.records()) {
        if (state.train.contains(r.id)) {
            throw ValidationError("record " + std::to_string(r.id) + " is in both train and pool");
        }
    }
    state.max_iter = config.max_iter;
    state.error.reset();

    std::unique_ptr<FittedModel> model;
    double current_c = 0.0;
    try {
        model = model_class.fit(state.train, nullptr);
    } catch (const Error& e) {
        state.error = std::string("initial fit failed: ") + e.what();
        return state;
    }
    current_c = validation_c_index(*model, state.validation);
    if (state.history.empty()) state.history.push_back({state.round, current_c, std::nullopt, std::nullopt});
    if (observer) observer(state);

    std::mt19937_64 rng(config.seed);
    while (state.round < config.max_iter) {
        if (state.pool.empty()) break;

        // Candidates scored this round (optionally a random subset of the pool).
        const Dataset* candidates = &state.pool;
        Dataset subset;
        if (config.strategy == Strategy::epi && config.pool_subsample > 0 &&
            state.pool.size() > config.pool_subsample) {
            std::vector<std::size_t> idx(state.pool.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(config.pool_subsample);
            std::sort(idx.begin(), idx.end());
            subset = Dataset(state.pool.feature_names());
            for (auto i : idx) subset.add(state.pool[i]);
            candidates = &subset;
        }

        RecordId chosen = 0;
        std::optional<double> expected;
        if (config.strategy == Strategy::epi) {
            const TimeGrid grid = make_time_grid(state.train, config.grid_points);
            const auto selection = select_query(*candidates, *model, current_c, model_class, state.train,
                                                state.validation, grid, config.execution);
            chosen = selection.candidate_id;
            for (const auto& s : selection.scores) {
                if (s.candidate_id == chosen) expected = s.expected_delta_c;
            }
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, state.pool.size() - 1);
            chosen = state.pool[pick(rng)].id;
        }

        const auto& record = state.pool[*state.pool.index_of(chosen)];
        OracleQuery query;
        query.query_id = state.next_query_id++;
        query.candidate_id = chosen;
        query.censoring_time = record.time;
        query.context = {state.round, current_c};
        const auto originals = state.pool_originals.find(chosen);
        const auto& values = originals != state.pool_originals.end() ? originals->second : record.covariates;
        const auto& names = originals != state.pool_originals.end() ? state.original_feature_names
                                                                    : state.pool.feature_names();
        for (std::size_t k = 0; k < values.size() && k < names.size(); ++k) {
            query.original_features.emplace_back(names[k], values[k]);
        }

        OracleAnswer answer;
        try {
            answer = oracle.answer(query);
        } catch (const OracleError& e) {
            state.error = std::string("oracle failed in round ") + std::to_string(state.round + 1) + ": " + e.what();
            return state;
        }
        if (answer.query_id != query.query_id || !std::isfinite(answer.event_time) ||
            answer.event_time < query.censoring_time) {
            state.error = "oracle answer for query " + std::to_string(query.query_id) +
                          " violates event_time >= censoring_time";
            return state;
        }

        SurvivalRecord moved = state.pool.remove(chosen);
        state.pool_originals.erase(chosen);
        moved.time = answer.event_time;
        moved.event = true;
        state.train.add(std::move(moved));
        ++state.round;

        try {
            model = model_class.fit(state.train, model.get());
        } catch (const Error& e) {
            state.error = std::string("refit failed in round ") + std::to_string(state.round) + ": " + e.what();
            return state;
        }
        current_c = validation_c_index(*model, state.validation);
        state.history.push_back({state.round, current_c, chosen, expected});
        if (observer) observer(state);
    }
    return state;
}

void write_history_csv(const ActiveLearningState& state, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "round,c_index,selected_id,expected_delta_c\n";
    for (const auto& h : state.history) {
        out << h.round << ',' << format_double(h.c_index) << ',';
        if (h.selected_id) out << *h.selected_id;
        out << ',';
        if (h.expected_delta_c) out << format_double(*h.expected_delta_c);
        out << '\n';
    }
}

}  // namespace dasa
