#include "dasa/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "dasa/errors.hpp"

namespace dasa {

Dataset::Dataset(std::vector<std::string> feature_names) : feature_names_(std::move(feature_names)) {}

Dataset::Dataset(std::vector<std::string> feature_names, std::vector<SurvivalRecord> records)
    : feature_names_(std::move(feature_names)) {
    records_.reserve(records.size());
    for (auto& r : records) add(std::move(r));
}

void Dataset::validate(const SurvivalRecord& r) const {
    if (!std::isfinite(r.time) || r.time < 0.0) {
        throw ValidationError("record " + std::to_string(r.id) + ": time must be finite and >= 0");
    }
    if (r.covariates.size() != feature_names_.size()) {
        throw ValidationError("record " + std::to_string(r.id) + ": expected " +
                              std::to_string(feature_names_.size()) + " covariates, got " +
                              std::to_string(r.covariates.size()));
    }
    for (double v : r.covariates) {
        if (!std::isfinite(v)) {
            throw ValidationError("record " + std::to_string(r.id) + ": non-finite covariate");
        }
    }
    if (ids_.contains(r.id)) {
        throw ValidationError("duplicate record id " + std::to_string(r.id));
    }
}

void Dataset::add(SurvivalRecord record) {
    validate(record);
    ids_.insert(record.id);
    records_.push_back(std::move(record));
}

SurvivalRecord Dataset::remove(RecordId id) {
    auto idx = index_of(id);
    if (!idx) throw ValidationError("no record with id " + std::to_string(id));
    SurvivalRecord out = std::move(records_[*idx]);
    records_.erase(records_.begin() + static_cast<std::ptrdiff_t>(*idx));
    ids_.erase(id);
    return out;
}

std::size_t Dataset::n_events() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.event; }));
}

std::optional<std::size_t> Dataset::index_of(RecordId id) const {
    if (!ids_.contains(id)) return std::nullopt;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (records_[i].id == id) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> Dataset::feature_index(const std::string& name) const {
    auto it = std::find(feature_names_.begin(), feature_names_.end(), name);
    if (it == feature_names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - feature_names_.begin());
}

std::vector<double> Dataset::times() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.time);
    return out;
}

std::vector<bool> Dataset::events() const {
    std::vector<bool> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.event);
    return out;
}

Eigen::MatrixXd Dataset::covariate_matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(records_.size()),
                      static_cast<Eigen::Index>(feature_names_.size()));
    for (std::size_t i = 0; i < records_.size(); ++i) {
        for (std::size_t j = 0; j < feature_names_.size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records_[i].covariates[j];
        }
    }
    return m;
}

double linear_predictor(std::span<const double> x, std::span<const double> beta) {
    if (x.size() != beta.size()) {
        throw DimensionError("covariate length " + std::to_string(x.size()) +
                             " does not match coefficient length " + std::to_string(beta.size()));
    }
    double eta = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) eta += x[k] * beta[k];
    return eta;
}

Dataset with_covariates(const Dataset& data, const Eigen::MatrixXd& covariates,
                        std::vector<std::string> feature_names) {
    if (covariates.rows() != static_cast<Eigen::Index>(data.size()) ||
        covariates.cols() != static_cast<Eigen::Index>(feature_names.size())) {
        throw DimensionError("replacement covariate matrix has the wrong shape");
    }
    Dataset out(std::move(feature_names));
    for (std::size_t i = 0; i < data.size(); ++i) {
        SurvivalRecord r = data[i];
        r.covariates.assign(static_cast<std::size_t>(covariates.cols()), 0.0);
        for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
            r.covariates[static_cast<std::size_t>(j)] = covariates(static_cast<Eigen::Index>(i), j);
        }
        out.add(std::move(r));
    }
    return out;
}

}  // namespace dasa
