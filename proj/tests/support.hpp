#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dasa/dataset.hpp"

namespace testing_support {

inline std::vector<std::string> feature_names(std::size_t p) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < p; ++k) names.push_back("x" + std::to_string(k + 1));
    return names;
}

/// Small random survival dataset. Times are drawn from a coarse lattice when
/// `tie_prob` > 0 so that tied times occur.
inline dasa::Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t p, double event_prob = 0.7,
                                    double tie_prob = 0.0, dasa::RecordId first_id = 1) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    dasa::Dataset data(feature_names(p));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(p);
        for (auto& v : x) v = normal(rng);
        double t = unit(rng) < tie_prob ? std::floor(unit(rng) * 5.0) + 1.0 : 0.5 + 10.0 * unit(rng);
        data.add({first_id + static_cast<dasa::RecordId>(i), x, t, unit(rng) < event_prob});
    }
    return data;
}

}  // namespace testing_support
