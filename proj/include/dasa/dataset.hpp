#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

namespace dasa {

using RecordId = std::int64_t;

/// One right-censored observation: covariates, observed time (months) and
/// whether the event was observed at that time.
struct SurvivalRecord {
    RecordId id = 0;
    std::vector<double> covariates;
    double time = 0.0;
    bool event = false;

    bool operator==(const SurvivalRecord&) const = default;
};

/// Ordered collection of records sharing one covariate layout.
///
/// Every insertion validates the record invariants (time >= 0 and finite,
/// finite covariates of the dataset's width, unique id) and throws
/// ValidationError on violation, so a constructed Dataset is always valid.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<std::string> feature_names);
    Dataset(std::vector<std::string> feature_names, std::vector<SurvivalRecord> records);

    void add(SurvivalRecord record);
    SurvivalRecord remove(RecordId id);

    const std::vector<SurvivalRecord>& records() const noexcept { return records_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const SurvivalRecord& operator[](std::size_t i) const { return records_[i]; }

    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t n_features() const noexcept { return feature_names_.size(); }
    std::size_t n_events() const noexcept;

    bool contains(RecordId id) const { return ids_.contains(id); }
    std::optional<std::size_t> index_of(RecordId id) const;
    std::optional<std::size_t> feature_index(const std::string& name) const;

    std::vector<double> times() const;
    std::vector<bool> events() const;
    /// Row-major view copied into an (n x p) matrix.
    Eigen::MatrixXd covariate_matrix() const;

    bool operator==(const Dataset& other) const {
        return feature_names_ == other.feature_names_ && records_ == other.records_;
    }

private:
    void validate(const SurvivalRecord& record) const;

    std::vector<std::string> feature_names_;
    std::vector<SurvivalRecord> records_;
    std::unordered_set<RecordId> ids_;
};

/// Linear predictor x . beta.
double linear_predictor(std::span<const double> x, std::span<const double> beta);

/// Copy of `data` with feature matrix replaced by `covariates` (same row order).
Dataset with_covariates(const Dataset& data, const Eigen::MatrixXd& covariates,
                        std::vector<std::string> feature_names);

}  // namespace dasa
