#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "dasa/dataset.hpp"

namespace dasa {

struct ExponentialBaseline {
    double rate = 0.01;  // per month
};
struct WeibullBaseline {
    double shape = 1.5;
    double scale = 60.0;  // months
};
using BaselineDistribution = std::variant<ExponentialBaseline, WeibullBaseline>;

struct PlantedTreatment {
    std::string name;
    double beta = 0.0;
    double prevalence = 0.5;
};

struct SynthConfig {
    std::size_t n = 500;
    std::size_t p = 10;
    std::vector<double> true_beta;  // length p; empty means all zero
    BaselineDistribution baseline = ExponentialBaseline{};
    double censoring_rate = 0.2;
    std::vector<PlantedTreatment> treatments;  // appended as binary columns after the p features
    // > 0: covariates share a low-rank factor structure (each column still
    // marginally standard normal); 0: independent columns.
    std::size_t factor_rank = 0;
    double factor_noise = 0.3;
    std::uint64_t seed = 0;
};

using LatentTimes = std::unordered_map<RecordId, double>;

struct SynthData {
    Dataset data;
    LatentTimes latent_times;
};

/// Inverse of the baseline cumulative hazard: the time at which
/// H0(t) exp(eta) reaches `target`.
double proportional_hazards_time(const BaselineDistribution& baseline, double eta, double target);

/// Draws covariates, proportional-hazards event times and independent
/// exponential censoring calibrated by bisection to censoring_rate +/- 0.02.
/// Record ids are 1..n. Throws ValidationError for invalid configs and
/// CalibrationError when the censoring target cannot be met.
SynthData generate(const SynthConfig& config);

struct CsvSchema {
    std::string id_column = "id";
    std::string time_column = "time";
    std::string event_column = "event";
};

/// Reads `id,time,event,<features...>` (columns may appear in any order; every
/// other column is a feature). Errors name the offending 1-based line.
Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
void write_csv(const Dataset& data, const std::string& path);

LatentTimes load_truth_csv(const std::string& path);
void write_truth_csv(const LatentTimes& truth, const std::string& path);
/// `<stem>.truth.csv` next to a dataset path `<stem>.csv`.
std::string truth_path_for(const std::string& csv_path);

struct SplitSpec {
    std::size_t train_n = 25;
    std::size_t pool_n = 200;
    std::size_t validation_n = 100;
    std::size_t test_n = 0;
    std::uint64_t seed = 0;
    std::size_t min_train_events = 2;
    int max_retries = 20;
};

struct Split {
    Dataset train;
    Dataset pool;  // event flags forced to false, times are censoring times
    Dataset validation;
    Dataset test;
};

/// Disjoint random partition. Retries with derived seeds while the train set
/// has fewer than min_train_events events; throws SplitError after max_retries.
Split split(const Dataset& data, const SplitSpec& spec);

/// Per-column mean/scale fitted on one dataset and applied to others. Columns
/// listed in `excluded` are left untouched.
class Standardizer {
public:
    Standardizer() = default;
    static Standardizer fit(const Dataset& data, const std::vector<std::string>& excluded = {});
    Dataset apply(const Dataset& data) const;

    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& scale() const noexcept { return scale_; }

private:
    std::vector<std::string> names_;
    std::vector<double> mean_;
    std::vector<double> scale_;
};

/// Subset of columns, in the given order.
Dataset select_columns(const Dataset& data, const std::vector<std::string>& columns);

}  // namespace dasa
