#include "dasa/rsf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dasa/errors.hpp"

namespace dasa {
namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double statistic = 0.0;
};

class TreeGrower {
public:
    TreeGrower(const Dataset& data, const RsfConfig& config, int mtry, std::uint64_t seed)
        : data_(data), config_(config), mtry_(mtry), rng_(seed) {}

    SurvivalTree grow() {
        const std::size_t n = data_.size();
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = pick(rng_);
        std::sort(sample.begin(), sample.end());
        tree_.nodes.clear();
        build(std::move(sample), 0);
        return std::move(tree_);
    }

private:
    int count_events(const std::vector<std::size_t>& samples) const {
        int e = 0;
        for (auto i : samples) e += data_[i].event ? 1 : 0;
        return e;
    }

    int build(std::vector<std::size_t> samples, int depth) {
        const int node_id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();

        const int events = count_events(samples);
        const bool depth_ok = config_.max_depth <= 0 || depth < config_.max_depth;
        SplitChoice split;
        if (depth_ok && events >= 2 * config_.min_leaf_events) split = best_split(samples);

        if (split.feature < 0) {
            make_leaf(tree_.nodes[static_cast<std::size_t>(node_id)], samples);
            return node_id;
        }
        std::vector<std::size_t> left, right;
        for (auto i : samples) {
            (data_[i].covariates[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right)
                .push_back(i);
        }
        samples.clear();
        samples.shrink_to_fit();
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(node_id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return node_id;
    }

    void make_leaf(SurvivalTreeNode& leaf, const std::vector<std::size_t>& samples) const {
        std::vector<std::pair<double, bool>> obs;
        obs.reserve(samples.size());
        for (auto i : samples) obs.emplace_back(data_[i].time, data_[i].event);
        std::sort(obs.begin(), obs.end());
        double at_risk = static_cast<double>(obs.size());
        double cum = 0.0;
        for (std::size_t k = 0; k < obs.size();) {
            std::size_t e = k;
            int deaths = 0;
            while (e < obs.size() && obs[e].first == obs[k].first) {
                deaths += obs[e].second ? 1 : 0;
                ++e;
            }
            if (deaths > 0) {
                cum += deaths / at_risk;
                leaf.times.push_back(obs[k].first);
                leaf.cumulative_hazard.push_back(cum);
            }
            at_risk -= static_cast<double>(e - k);
            k = e;
        }
    }

    std::vector<int> draw_features() {
        const int p = static_cast<int>(data_.n_features());
        std::vector<int> features(static_cast<std::size_t>(p));
        std::iota(features.begin(), features.end(), 0);
        for (int k = 0; k < mtry_; ++k) {
            std::uniform_int_distribution<int> pick(k, p - 1);
            std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(pick(rng_))]);
        }
        features.resize(static_cast<std::size_t>(mtry_));
        return features;
    }

    SplitChoice best_split(const std::vector<std::size_t>& samples) {
        // Distinct event times in the node, and per-sample risk/death indices.
        std::vector<double> event_times;
        for (auto i : samples) {
            if (data_[i].event) event_times.push_back(data_[i].time);
        }
        std::sort(event_times.begin(), event_times.end());
        event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
        const std::size_t T = event_times.size();
        SplitChoice best;
        if (T == 0) return best;

        const std::size_t m = samples.size();
        std::vector<std::size_t> risk_len(m);  // at risk at event_times[0..risk_len)
        std::vector<std::size_t> death_at(m, T);
        std::vector<double> at_risk(T, 0.0), deaths(T, 0.0);
        for (std::size_t s = 0; s < m; ++s) {
            const auto& rec = data_[samples[s]];
            risk_len[s] = static_cast<std::size_t>(
                std::upper_bound(event_times.begin(), event_times.end(), rec.time) - event_times.begin());
            for (std::size_t k = 0; k < risk_len[s]; ++k) at_risk[k] += 1.0;
            if (rec.event) {
                death_at[s] = risk_len[s] - 1;
                deaths[death_at[s]] += 1.0;
            }
        }
        const int total_events = count_events(samples);

        std::vector<std::size_t> order(m);
        std::vector<double> left_risk(T), left_deaths(T);
        for (int feature : draw_features()) {
            const auto f = static_cast<std::size_t>(feature);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return data_[samples[a]].covariates[f] < data_[samples[b]].covariates[f];
            });
            std::fill(left_risk.begin(), left_risk.end(), 0.0);
            std::fill(left_deaths.begin(), left_deaths.end(), 0.0);
            int left_events = 0;
            for (std::size_t j = 0; j + 1 < m; ++j) {
                const std::size_t s = order[j];
                for (std::size_t k = 0; k < risk_len[s]; ++k) left_risk[k] += 1.0;
                if (death_at[s] < T) {
                    left_deaths[death_at[s]] += 1.0;
                    ++left_events;
                }
                const double here = data_[samples[s]].covariates[f];
                const double next = data_[samples[order[j + 1]]].covariates[f];
                if (!(here < next)) continue;
                if (left_events < config_.min_leaf_events ||
                    total_events - left_events < config_.min_leaf_events) {
                    continue;
                }
                double numerator = 0.0, variance = 0.0;
                for (std::size_t k = 0; k < T; ++k) {
                    const double y = at_risk[k];
                    if (y < 2.0) break;  // risk sets only shrink with k
                    const double d = deaths[k];
                    const double share = left_risk[k] / y;
                    numerator += left_deaths[k] - left_risk[k] * d / y;
                    variance += share * (1.0 - share) * (y - d) / (y - 1.0) * d;
                }
                if (variance <= 0.0) continue;
                const double stat = std::abs(numerator) / std::sqrt(variance);
                if (stat > best.statistic) {
                    best.statistic = stat;
                    best.feature = feature;
                    best.threshold = 0.5 * (here + next);
                    if (best.threshold >= next) best.threshold = here;
                }
            }
        }
        return best;
    }

    const Dataset& data_;
    const RsfConfig& config_;
    int mtry_;
    std::mt19937_64 rng_;
    SurvivalTree tree_;
};

double leaf_cumulative_at(const SurvivalTreeNode& leaf, double t) {
    auto it = std::upper_bound(leaf.times.begin(), leaf.times.end(), t);
    if (it == leaf.times.begin()) return 0.0;
    return leaf.cumulative_hazard[static_cast<std::size_t>(it - leaf.times.begin()) - 1];
}

void check_dimension(const RsfModel& model, std::span<const double> x) {
    if (x.size() != model.n_features) {
        throw DimensionError("forest expects " + std::to_string(model.n_features) + " covariates, got " +
                             std::to_string(x.size()));
    }
}

}  // namespace

const SurvivalTreeNode& SurvivalTree::leaf_for(std::span<const double> x) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
        const auto& node = nodes[at];
        at = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                  : node.right);
    }
    return nodes[at];
}

RsfModel fit_rsf(const Dataset& data, const RsfConfig& config, Execution execution) {
    if (config.n_trees < 1) throw ValidationError("n_trees must be >= 1");
    if (config.min_leaf_events < 1) throw ValidationError("min_leaf_events must be >= 1");
    if (data.n_features() == 0) throw ValidationError("forest needs at least one feature");
    const std::size_t events = data.n_events();
    if (events == 0 || events < static_cast<std::size_t>(config.min_leaf_events)) {
        throw NoEvents("forest needs at least " + std::to_string(config.min_leaf_events) + " events, data has " +
                       std::to_string(events));
    }
    const auto times = data.times();
    if (std::all_of(times.begin(), times.end(), [&](double t) { return t == times.front(); })) {
        throw DegenerateData("all observed times are equal");
    }

    const int p = static_cast<int>(data.n_features());
    const int mtry = config.mtry > 0 ? std::min(config.mtry, p)
                                     : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));

    RsfModel model;
    model.config = config;
    model.n_features = data.n_features();
    for (const auto& r : data.records()) {
        if (r.event) model.grid.push_back(r.time);
    }
    std::sort(model.grid.begin(), model.grid.end());
    model.grid.erase(std::unique(model.grid.begin(), model.grid.end()), model.grid.end());

    model.trees.resize(static_cast<std::size_t>(config.n_trees));
    auto grow_one = [&](int t) {
        TreeGrower grower(data, config, mtry, config.seed + static_cast<std::uint64_t>(t));
        model.trees[static_cast<std::size_t>(t)] = grower.grow();
    };
    if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int t = 0; t < config.n_trees; ++t) grow_one(t);
    } else {
        for (int t = 0; t < config.n_trees; ++t) grow_one(t);
    }
    return model;
}

std::vector<double> ensemble_cumulative_hazard(const RsfModel& model, std::span<const double> x) {
    check_dimension(model, x);
    std::vector<double> chf(model.grid.size(), 0.0);
    for (const auto& tree : model.trees) {
        const auto& leaf = tree.leaf_for(x);
        for (std::size_t k = 0; k < model.grid.size(); ++k) chf[k] += leaf_cumulative_at(leaf, model.grid[k]);
    }
    const double scale = 1.0 / static_cast<double>(model.trees.size());
    for (auto& v : chf) v *= scale;
    return chf;
}

double predict_mortality(const RsfModel& model, std::span<const double> x) {
    const auto chf = ensemble_cumulative_hazard(model, x);
    return std::accumulate(chf.begin(), chf.end(), 0.0);
}

double rsf_hazard_at(const RsfModel& model, double t, std::span<const double> x) {
    const auto& grid = model.grid;
    if (grid.empty() || t < grid.front()) return 0.0;
    auto it = std::lower_bound(grid.begin(), grid.end(), t);
    std::size_t k;
    if (it == grid.end()) {
        k = grid.size() - 1;
    } else {
        k = static_cast<std::size_t>(it - grid.begin());
        if (k > 0 && t - grid[k - 1] <= grid[k] - t) --k;
    }
    const auto chf = ensemble_cumulative_hazard(model, x);
    return k == 0 ? chf[0] : chf[k] - chf[k - 1];
}

double log_rank_statistic(std::span<const double> times, const std::vector<bool>& events,
                          const std::vector<bool>& left) {
    const std::size_t n = times.size();
    if (events.size() != n || left.size() != n) throw DimensionError("log_rank_statistic: length mismatch");
    std::vector<double> event_times;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i]) event_times.push_back(times[i]);
    }
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
    double numerator = 0.0, variance = 0.0;
    for (double t : event_times) {
        double y = 0, y1 = 0, d = 0, d1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (times[i] >= t) {
                y += 1;
                if (left[i]) y1 += 1;
            }
            if (times[i] == t && events[i]) {
                d += 1;
                if (left[i]) d1 += 1;
            }
        }
        if (y < 2) continue;
        numerator += d1 - y1 * d / y;
        variance += (y1 / y) * (1 - y1 / y) * (y - d) / (y - 1) * d;
    }
    if (variance <= 0.0) return 0.0;
    return std::abs(numerator) / std::sqrt(variance);
}

}  // namespace dasa
