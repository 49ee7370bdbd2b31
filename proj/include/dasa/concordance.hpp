#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dasa/dataset.hpp"

namespace dasa {

struct ConcordanceResult {
    double c_index = 0.0;
    std::size_t concordant = 0;
    std::size_t comparable = 0;
    std::size_t ties = 0;  // comparable pairs with equal scores, counted 0.5
};

/// Harrell's concordance. A pair (i, j) is comparable when i has an observed
/// event and time_i < time_j; it is concordant when score_i > score_j (higher
/// score = higher risk). Runs in O(n log n) with a Fenwick tree over score ranks.
///
/// Throws NoComparablePairs when no pair is comparable and DimensionError when
/// the score count differs from the record count.
ConcordanceResult concordance_index(std::span<const double> scores, std::span<const double> times,
                                    const std::vector<bool>& events);
ConcordanceResult concordance_index(std::span<const double> scores, const Dataset& data);

}  // namespace dasa
