#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dasa/active.hpp"
#include "dasa/cox.hpp"
#include "dasa/datakit.hpp"
#include "dasa/dataset.hpp"
#include "dasa/oracle.hpp"
#include "dasa/representation.hpp"

namespace dasa {

/// Encodes the non-treatment columns with a trained autoencoder and appends the
/// treatment columns untouched. Output columns: z1..zk, then the treatments in
/// the order given.
class TreatmentEncoder {
public:
    TreatmentEncoder() = default;

    /// Trains the encoder on the non-treatment columns of `data`.
    static TreatmentEncoder fit(const Dataset& data, const std::vector<std::string>& treatment_columns,
                                const SaeConfig& sae);

    Dataset apply(const Dataset& data) const;

    const SaeWeights& weights() const noexcept { return weights_; }
    const std::vector<std::string>& treatment_columns() const noexcept { return treatments_; }
    const std::vector<std::string>& encoded_columns() const noexcept { return encoded_; }

private:
    SaeWeights weights_;
    std::vector<std::string> treatments_;
    std::vector<std::string> encoded_;
};

/// Throws ValidationError unless every listed column exists and is 0/1 valued.
void check_treatment_columns(const Dataset& data, const std::vector<std::string>& treatment_columns);

/// Fit-and-apply on one dataset.
Dataset build_treatment_features(const Dataset& data, const std::vector<std::string>& treatment_columns,
                                 const SaeConfig& sae);

struct TreatmentConfig {
    int runs = 10;
    int rounds = 20;
    std::uint64_t seed = 0;
    SplitSpec split{300, 60, 40, 0};  // per-run seed is derived from `seed`
    SaeConfig sae{};                  // encoder (150, 100, 5)
    CoxOptions cox{};
    std::size_t grid_points = 10;
    std::size_t pool_subsample = 0;
    bool include_baseline = true;     // also report an unregularised Cox fit on the raw features
};

struct TreatmentEffect {
    std::string treatment;
    double coefficient = 0.0;   // ln of the run-averaged hazard ratio
    double hazard_ratio = 1.0;  // exp(coefficient)
    double mean_beta = 0.0;     // arithmetic mean of the per-run coefficients
    std::vector<double> run_betas;
    int rank = 0;               // 1 = lowest hazard ratio
};

struct MethodReport {
    std::string method;
    std::vector<TreatmentEffect> effects;  // in treatment-column order
    std::vector<std::string> ranking;      // ascending hazard ratio
    int runs_succeeded = 0;
    int runs_failed = 0;

    const TreatmentEffect& effect(const std::string& treatment) const;
};

struct TreatmentReport {
    std::vector<MethodReport> methods;  // "DASA-Cox" first, then "COX-Base" when requested
    int runs = 0;
    int rounds = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> failures;  // one message per excluded run

    const MethodReport& method(const std::string& name) const;
};

/// Runs the represent-then-query pipeline `runs` times with derived seeds and
/// averages exp(beta) per treatment over the successful runs. Runs execute in
/// parallel when the oracle allows concurrent use. Throws AllRunsFailed when no
/// run produces a converged Cox fit.
TreatmentReport recommend(const Dataset& data, const std::vector<std::string>& treatment_columns,
                          const TreatmentConfig& config, Oracle& oracle);

/// method,treatment,coefficient,hazard_ratio,rank
void write_treatment_csv(const TreatmentReport& report, const std::string& path);

/// Method x treatment table of hazard ratios.
std::string format_treatment_table(const TreatmentReport& report);

}  // namespace dasa
