#include "dasa/datakit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "dasa/errors.hpp"
#include "dasa/parallel.hpp"

namespace dasa {
namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                              : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::optional<double> parse_double(const std::string& cell) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    if (!cell.empty() && *begin == '+') ++begin;
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end || cell.empty()) return std::nullopt;
    return v;
}

std::optional<bool> parse_event(const std::string& cell) {
    std::string lower(cell);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "1" || lower == "true") return true;
    if (lower == "0" || lower == "false") return false;
    return std::nullopt;
}

double censored_fraction(const std::vector<double>& latent, const std::vector<double>& exp_draws, double rate) {
    std::size_t censored = 0;
    for (std::size_t i = 0; i < latent.size(); ++i) {
        if (exp_draws[i] / rate < latent[i]) ++censored;
    }
    return static_cast<double>(censored) / static_cast<double>(latent.size());
}

void validate(const SynthConfig& c) {
    if (c.n == 0) throw ValidationError("n must be >= 1");
    if (!c.true_beta.empty() && c.true_beta.size() != c.p) {
        throw ValidationError("true_beta must have p = " + std::to_string(c.p) + " entries");
    }
    if (!(c.censoring_rate >= 0.0 && c.censoring_rate < 1.0)) {
        throw ValidationError("censoring_rate must lie in [0, 1)");
    }
    std::visit(
        [](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, ExponentialBaseline>) {
                if (!(b.rate > 0.0)) throw ValidationError("exponential rate must be > 0");
            } else {
                if (!(b.shape > 0.0) || !(b.scale > 0.0)) {
                    throw ValidationError("weibull shape and scale must be > 0");
                }
            }
        },
        c.baseline);
    for (const auto& t : c.treatments) {
        if (!(t.prevalence >= 0.0 && t.prevalence <= 1.0)) {
            throw ValidationError("treatment prevalence must lie in [0, 1]");
        }
    }
}

}  // namespace

double proportional_hazards_time(const BaselineDistribution& baseline, double eta, double target) {
    const double base_target = target * std::exp(-eta);
    return std::visit(
        [&](const auto& b) -> double {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, ExponentialBaseline>) {
                return base_target / b.rate;
            } else {
                return b.scale * std::pow(base_target, 1.0 / b.shape);
            }
        },
        baseline);
}

SynthData generate(const SynthConfig& config) {
    validate(config);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto positive_unit = [&] {
        double u;
        do u = unit(rng);
        while (u <= 0.0);
        return u;
    };

    const std::size_t p = config.p;
    std::vector<std::vector<double>> loadings;
    std::vector<double> loading_norm(p, 1.0);
    if (config.factor_rank > 0) {
        loadings.assign(p, std::vector<double>(config.factor_rank));
        for (std::size_t j = 0; j < p; ++j) {
            double ss = config.factor_noise * config.factor_noise;
            for (auto& a : loadings[j]) {
                a = normal(rng);
                ss += a * a;
            }
            loading_norm[j] = std::sqrt(ss);
        }
    }

    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    for (const auto& t : config.treatments) names.push_back(t.name);

    const std::size_t n = config.n;
    std::vector<std::vector<double>> rows(n);
    std::vector<double> latent(n), exp_draws(n);
    std::vector<double> factors(config.factor_rank);
    for (std::size_t i = 0; i < n; ++i) {
        auto& x = rows[i];
        x.reserve(names.size());
        if (config.factor_rank == 0) {
            for (std::size_t j = 0; j < p; ++j) x.push_back(normal(rng));
        } else {
            for (auto& f : factors) f = normal(rng);
            for (std::size_t j = 0; j < p; ++j) {
                double v = config.factor_noise * normal(rng);
                for (std::size_t k = 0; k < config.factor_rank; ++k) v += loadings[j][k] * factors[k];
                x.push_back(v / loading_norm[j]);
            }
        }
        for (const auto& t : config.treatments) x.push_back(unit(rng) < t.prevalence ? 1.0 : 0.0);

        double eta = 0.0;
        for (std::size_t j = 0; j < p && !config.true_beta.empty(); ++j) eta += config.true_beta[j] * x[j];
        for (std::size_t k = 0; k < config.treatments.size(); ++k) eta += config.treatments[k].beta * x[p + k];
        latent[i] = proportional_hazards_time(config.baseline, eta, -std::log(positive_unit()));
        exp_draws[i] = -std::log(positive_unit());
    }

    // Censoring times C_i = E_i / rate with E_i ~ Exp(1); bisection on log(rate).
    double rate = 0.0;
    if (config.censoring_rate > 0.0) {
        double lo = std::log(1e-12), hi = std::log(1e12);
        double best_rate = std::exp(hi), best_gap = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double frac = censored_fraction(latent, exp_draws, std::exp(mid));
            const double gap = std::abs(frac - config.censoring_rate);
            if (gap < best_gap) {
                best_gap = gap;
                best_rate = std::exp(mid);
            }
            if (frac < config.censoring_rate) lo = mid;
            else hi = mid;
        }
        if (best_gap > 0.02) {
            throw CalibrationError("censoring rate " + format_double(config.censoring_rate) +
                                   " unreachable within 0.02 for n = " + std::to_string(n) +
                                   " (closest " + format_double(best_gap) + " away)");
        }
        rate = best_rate;
    }

    SynthData out{Dataset(names), {}};
    for (std::size_t i = 0; i < n; ++i) {
        const double censor = rate > 0.0 ? exp_draws[i] / rate : std::numeric_limits<double>::infinity();
        const auto id = static_cast<RecordId>(i + 1);
        const bool event = latent[i] <= censor;
        out.data.add({id, std::move(rows[i]), event ? latent[i] : censor, event});
        out.latent_times.emplace(id, latent[i]);
    }
    return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": missing header row");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    const auto header = split_line(line);

    auto column = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(path + ": missing required column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t id_col = column(schema.id_column);
    const std::size_t time_col = column(schema.time_column);
    const std::size_t event_col = column(schema.event_column);
    std::vector<std::size_t> feature_cols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == id_col || c == time_col || c == event_col) continue;
        feature_cols.push_back(c);
        names.push_back(header[c]);
    }

    Dataset data(names);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        const std::string where = path + " line " + std::to_string(line_no);
        if (cells.size() != header.size()) {
            throw DataError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }
        SurvivalRecord r;
        RecordId id = 0;
        const auto& id_cell = cells[id_col];
        auto res = std::from_chars(id_cell.data(), id_cell.data() + id_cell.size(), id);
        if (res.ec != std::errc() || res.ptr != id_cell.data() + id_cell.size()) {
            throw DataError(where + ": id '" + id_cell + "' is not an integer");
        }
        r.id = id;
        const auto time = parse_double(cells[time_col]);
        if (!time || !std::isfinite(*time)) throw DataError(where + ": unparseable time '" + cells[time_col] + "'");
        if (*time < 0.0) throw DataError(where + ": negative time " + cells[time_col]);
        r.time = *time;
        const auto event = parse_event(cells[event_col]);
        if (!event) throw DataError(where + ": event must be 0/1/true/false, got '" + cells[event_col] + "'");
        r.event = *event;
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            const auto v = parse_double(cells[feature_cols[k]]);
            if (!v || !std::isfinite(*v)) {
                throw DataError(where + ": unparseable value '" + cells[feature_cols[k]] + "' in column '" +
                                names[k] + "'");
            }
            r.covariates.push_back(*v);
        }
        try {
            data.add(std::move(r));
        } catch (const ValidationError& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    return data;
}

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "id,time,event";
    for (const auto& name : data.feature_names()) out << ',' << name;
    out << '\n';
    for (const auto& r : data.records()) {
        out << r.id << ',' << format_double(r.time) << ',' << (r.event ? 1 : 0);
        for (double v : r.covariates) out << ',' << format_double(v);
        out << '\n';
    }
}

LatentTimes load_truth_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": missing header row");
    const auto header = split_line(line);
    if (header.size() != 2 || header[0] != "id" || header[1] != "latent_time") {
        throw DataError(path + ": header must be 'id,latent_time'");
    }
    LatentTimes truth;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        const std::string where = path + " line " + std::to_string(line_no);
        RecordId id = 0;
        auto res = cells.size() == 2 ? std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), id)
                                     : std::from_chars_result{nullptr, std::errc::invalid_argument};
        const auto t = cells.size() == 2 ? parse_double(cells[1]) : std::nullopt;
        if (res.ec != std::errc() || !t || *t < 0.0) throw DataError(where + ": malformed row");
        truth[id] = *t;
    }
    return truth;
}

void write_truth_csv(const LatentTimes& truth, const std::string& path) {
    std::vector<std::pair<RecordId, double>> rows(truth.begin(), truth.end());
    std::sort(rows.begin(), rows.end());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "id,latent_time\n";
    for (const auto& [id, t] : rows) out << id << ',' << format_double(t) << '\n';
}

std::string truth_path_for(const std::string& csv_path) {
    constexpr std::string_view ext = ".csv";
    if (csv_path.size() >= ext.size() && csv_path.compare(csv_path.size() - ext.size(), ext.size(), ext) == 0) {
        return csv_path.substr(0, csv_path.size() - ext.size()) + ".truth.csv";
    }
    return csv_path + ".truth.csv";
}

Split split(const Dataset& data, const SplitSpec& spec) {
    const std::size_t needed = spec.train_n + spec.pool_n + spec.validation_n + spec.test_n;
    if (needed > data.size()) {
        throw ValidationError("split needs " + std::to_string(needed) + " records, dataset has " +
                              std::to_string(data.size()));
    }
    std::vector<std::size_t> order(data.size());
    for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(attempt)));
        std::shuffle(order.begin(), order.end(), rng);

        std::size_t train_events = 0;
        for (std::size_t k = 0; k < spec.train_n; ++k) train_events += data[order[k]].event ? 1 : 0;
        if (train_events < spec.min_train_events) continue;

        const auto& names = data.feature_names();
        Split out{Dataset(names), Dataset(names), Dataset(names), Dataset(names)};
        std::size_t at = 0;
        auto take = [&](Dataset& dst, std::size_t count, bool censor) {
            for (std::size_t k = 0; k < count; ++k, ++at) {
                SurvivalRecord r = data[order[at]];
                if (censor) r.event = false;
                dst.add(std::move(r));
            }
        };
        take(out.train, spec.train_n, false);
        take(out.pool, spec.pool_n, true);
        take(out.validation, spec.validation_n, false);
        take(out.test, spec.test_n, false);
        return out;
    }
    throw SplitError("could not draw a train set with >= " + std::to_string(spec.min_train_events) +
                     " events in " + std::to_string(spec.max_retries + 1) + " attempts");
}

Standardizer Standardizer::fit(const Dataset& data, const std::vector<std::string>& excluded) {
    Standardizer s;
    s.names_ = data.feature_names();
    const std::size_t p = data.n_features();
    s.mean_.assign(p, 0.0);
    s.scale_.assign(p, 1.0);
    if (data.empty()) return s;
    const double n = static_cast<double>(data.size());
    for (std::size_t j = 0; j < p; ++j) {
        if (std::find(excluded.begin(), excluded.end(), s.names_[j]) != excluded.end()) continue;
        double mean = 0.0;
        for (const auto& r : data.records()) mean += r.covariates[j];
        mean /= n;
        double var = 0.0;
        for (const auto& r : data.records()) var += (r.covariates[j] - mean) * (r.covariates[j] - mean);
        const double sd = std::sqrt(var / n);
        s.mean_[j] = mean;
        s.scale_[j] = sd < 1e-12 ? 1.0 : sd;
    }
    return s;
}

Dataset Standardizer::apply(const Dataset& data) const {
    if (data.feature_names() != names_) throw DimensionError("standardizer fitted on different columns");
    Dataset out(names_);
    for (SurvivalRecord r : data.records()) {
        for (std::size_t j = 0; j < r.covariates.size(); ++j) r.covariates[j] = (r.covariates[j] - mean_[j]) / scale_[j];
        out.add(std::move(r));
    }
    return out;
}

Dataset select_columns(const Dataset& data, const std::vector<std::string>& columns) {
    std::vector<std::size_t> idx;
    for (const auto& c : columns) {
        const auto k = data.feature_index(c);
        if (!k) throw ValidationError("no column named '" + c + "'");
        idx.push_back(*k);
    }
    Dataset out(columns);
    for (const auto& r : data.records()) {
        SurvivalRecord s{r.id, {}, r.time, r.event};
        for (auto k : idx) s.covariates.push_back(r.covariates[k]);
        out.add(std::move(s));
    }
    return out;
}

}  // namespace dasa
