#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dasa/dataset.hpp"
#include "dasa/parallel.hpp"

namespace dasa {

struct RsfConfig {
    int n_trees = 200;
    int mtry = 0;             // 0 -> ceil(sqrt(p))
    int min_leaf_events = 3;  // each child of a split keeps at least this many in-bag events
    int max_depth = 0;        // 0 -> unbounded
    std::uint64_t seed = 0;   // tree t draws from seed + t

    bool operator==(const RsfConfig&) const = default;
};

struct SurvivalTreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    // Leaf Nelson-Aalen estimate from in-bag records.
    std::vector<double> times;
    std::vector<double> cumulative_hazard;

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const SurvivalTreeNode&) const = default;
};

struct SurvivalTree {
    std::vector<SurvivalTreeNode> nodes;  // nodes[0] is the root

    const SurvivalTreeNode& leaf_for(std::span<const double> x) const;
    bool operator==(const SurvivalTree&) const = default;
};

struct RsfModel {
    std::vector<SurvivalTree> trees;
    RsfConfig config;
    std::size_t n_features = 0;
    std::vector<double> grid;  // distinct training event times

    int n_trees() const noexcept { return static_cast<int>(trees.size()); }
    bool operator==(const RsfModel&) const = default;
};

/// Grows a forest of log-rank survival trees, one bootstrap sample per tree.
/// The serial and parallel schedules build identical forests.
RsfModel fit_rsf(const Dataset& data, const RsfConfig& config = {},
                 Execution execution = Execution::parallel);

/// Tree-averaged cumulative hazard at each grid time.
std::vector<double> ensemble_cumulative_hazard(const RsfModel& model, std::span<const double> x);

/// Sum over the grid of the tree-averaged cumulative hazard.
double predict_mortality(const RsfModel& model, std::span<const double> x);

/// Increment of the ensemble cumulative hazard at the grid time nearest t
/// (0 before the first grid time).
double rsf_hazard_at(const RsfModel& model, double t, std::span<const double> x);

/// Absolute log-rank statistic for splitting (time, event) into the two groups
/// given by `left`. Exposed for tests.
double log_rank_statistic(std::span<const double> times, const std::vector<bool>& events,
                          const std::vector<bool>& left);

}  // namespace dasa
