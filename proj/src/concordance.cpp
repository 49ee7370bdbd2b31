#include "dasa/concordance.hpp"

#include <algorithm>
#include <numeric>

#include "dasa/errors.hpp"

namespace dasa {
namespace {

class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
    void add(std::size_t i) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
    }
    // Count of inserted ranks < i.
    std::size_t prefix(std::size_t i) const {
        std::size_t s = 0;
        for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<std::size_t> tree_;
};

}  // namespace

ConcordanceResult concordance_index(std::span<const double> scores, std::span<const double> times,
                                    const std::vector<bool>& events) {
    const std::size_t n = scores.size();
    if (times.size() != n || events.size() != n) {
        throw DimensionError("concordance_index: scores, times and events must have equal length");
    }

    // Dense ranks of the scores so equal scores share a rank.
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        rank[i] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), scores[i]) -
                                           sorted.begin());
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

    // Sweep from the latest time down. Each block of equal times is queried
    // against the strictly later records already inserted, then inserted.
    ConcordanceResult out;
    Fenwick inserted(sorted.size());
    std::size_t later = 0;
    for (std::size_t b = 0; b < n;) {
        std::size_t e = b;
        while (e < n && times[order[e]] == times[order[b]]) ++e;
        for (std::size_t k = b; k < e; ++k) {
            const std::size_t i = order[k];
            if (!events[i]) continue;
            const std::size_t below = inserted.prefix(rank[i]);
            const std::size_t at_or_below = inserted.prefix(rank[i] + 1);
            out.comparable += later;
            out.concordant += below;
            out.ties += at_or_below - below;
        }
        for (std::size_t k = b; k < e; ++k) inserted.add(rank[order[k]]);
        later += e - b;
        b = e;
    }
    if (out.comparable == 0) throw NoComparablePairs();
    out.c_index = (static_cast<double>(out.concordant) + 0.5 * static_cast<double>(out.ties)) /
                  static_cast<double>(out.comparable);
    return out;
}

ConcordanceResult concordance_index(std::span<const double> scores, const Dataset& data) {
    const auto times = data.times();
    return concordance_index(scores, times, data.events());
}

}  // namespace dasa
