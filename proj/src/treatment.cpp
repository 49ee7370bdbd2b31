#include "dasa/treatment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
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

std::vector<std::string> non_treatment_columns(const Dataset& data, const std::vector<std::string>& treatments) {
    std::vector<std::string> out;
    for (const auto& name : data.feature_names()) {
        if (std::find(treatments.begin(), treatments.end(), name) == treatments.end()) out.push_back(name);
    }
    return out;
}

Dataset concat_rows(const Dataset& a, const Dataset& b) {
    Dataset out = a;
    for (const auto& r : b.records()) out.add(r);
    return out;
}

struct RunOutcome {
    std::optional<std::vector<double>> dasa_betas;
    std::optional<std::vector<double>> baseline_betas;
    std::vector<std::string> failures;
};

MethodReport summarise(const std::string& method, const std::vector<std::string>& treatments,
                       const std::vector<std::vector<double>>& betas, int failed) {
    MethodReport report;
    report.method = method;
    report.runs_succeeded = static_cast<int>(betas.size());
    report.runs_failed = failed;
    for (std::size_t t = 0; t < treatments.size(); ++t) {
        TreatmentEffect e;
        e.treatment = treatments[t];
        double hr_sum = 0.0, beta_sum = 0.0;
        for (const auto& run : betas) {
            e.run_betas.push_back(run[t]);
            hr_sum += std::exp(run[t]);
            beta_sum += run[t];
        }
        const double n = static_cast<double>(betas.size());
        e.coefficient = std::log(hr_sum / n);
        e.hazard_ratio = std::exp(e.coefficient);
        e.mean_beta = beta_sum / n;
        report.effects.push_back(std::move(e));
    }
    std::vector<std::size_t> order(treatments.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return report.effects[a].hazard_ratio < report.effects[b].hazard_ratio;
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
        report.effects[order[r]].rank = static_cast<int>(r + 1);
        report.ranking.push_back(report.effects[order[r]].treatment);
    }
    return report;
}

}  // namespace

void check_treatment_columns(const Dataset& data, const std::vector<std::string>& treatment_columns) {
    if (treatment_columns.empty()) throw ValidationError("at least one treatment column is required");
    for (const auto& name : treatment_columns) {
        const auto col = data.feature_index(name);
        if (!col) throw ValidationError("treatment column '" + name + "' not found");
        for (const auto& r : data.records()) {
            const double v = r.covariates[*col];
            if (v != 0.0 && v != 1.0) {
                throw ValidationError("treatment column '" + name + "' is not binary (record " +
                                      std::to_string(r.id) + " has " + std::to_string(v) + ")");
            }
        }
    }
}

TreatmentEncoder TreatmentEncoder::fit(const Dataset& data, const std::vector<std::string>& treatment_columns,
                                       const SaeConfig& sae) {
    check_treatment_columns(data, treatment_columns);
    TreatmentEncoder enc;
    enc.treatments_ = treatment_columns;
    enc.encoded_ = non_treatment_columns(data, treatment_columns);
    if (enc.encoded_.empty()) throw ValidationError("no non-treatment columns left to encode");
    enc.weights_ = train_sae(select_columns(data, enc.encoded_).covariate_matrix(), sae);
    return enc;
}

Dataset TreatmentEncoder::apply(const Dataset& data) const {
    check_treatment_columns(data, treatments_);
    const Eigen::MatrixXd latent = encode(weights_, select_columns(data, encoded_).covariate_matrix());
    const Eigen::MatrixXd flags = select_columns(data, treatments_).covariate_matrix();

    Eigen::MatrixXd combined(data.size(), latent.cols() + flags.cols());
    combined << latent, flags;
    std::vector<std::string> names;
    for (Eigen::Index k = 0; k < latent.cols(); ++k) names.push_back("z" + std::to_string(k + 1));
    names.insert(names.end(), treatments_.begin(), treatments_.end());
    return with_covariates(data, combined, std::move(names));
}

Dataset build_treatment_features(const Dataset& data, const std::vector<std::string>& treatment_columns,
                                 const SaeConfig& sae) {
    return TreatmentEncoder::fit(data, treatment_columns, sae).apply(data);
}

const TreatmentEffect& MethodReport::effect(const std::string& treatment) const {
    for (const auto& e : effects) {
        if (e.treatment == treatment) return e;
    }
    throw ValidationError("no effect reported for treatment '" + treatment + "'");
}

const MethodReport& TreatmentReport::method(const std::string& name) const {
    for (const auto& m : methods) {
        if (m.method == name) return m;
    }
    throw ValidationError("no method '" + name + "' in the report");
}

TreatmentReport recommend(const Dataset& data, const std::vector<std::string>& treatment_columns,
                          const TreatmentConfig& config, Oracle& oracle) {
    if (config.runs < 1) throw ValidationError("runs must be >= 1");
    if (config.rounds < 0) throw ValidationError("rounds must be >= 0");
    check_treatment_columns(data, treatment_columns);

    const CoxModelClass model_class(config.cox);
    CoxOptions baseline_options = config.cox;
    baseline_options.ridge = 0.0;
    baseline_options.compute_baseline = false;

    std::vector<std::size_t> raw_treatment_idx;
    for (const auto& t : treatment_columns) raw_treatment_idx.push_back(*data.feature_index(t));

    std::vector<RunOutcome> outcomes(static_cast<std::size_t>(config.runs));
    const bool parallel = oracle.concurrent_safe();

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int run = 0; run < config.runs; ++run) {
        auto& out = outcomes[static_cast<std::size_t>(run)];
        const std::string tag = "run " + std::to_string(run);
        const std::uint64_t run_seed = derive_seed(config.seed, static_cast<std::uint64_t>(run));
        try {
            SplitSpec spec = config.split;
            spec.seed = run_seed;
            const Split parts = split(data, spec);

            if (config.include_baseline) {
                try {
                    const CoxModel base = fit_cox(parts.train, baseline_options);
                    if (base.converged) {
                        std::vector<double> b;
                        for (auto i : raw_treatment_idx) b.push_back(base.beta[i]);
                        out.baseline_betas = std::move(b);
                    } else {
                        out.failures.push_back(tag + " COX-Base: fit did not converge");
                    }
                } catch (const Error& e) {
                    out.failures.push_back(tag + " COX-Base: " + e.what());
                }
            }

            SaeConfig sae = config.sae;
            sae.seed = run_seed;
            const auto encoder = TreatmentEncoder::fit(concat_rows(parts.train, parts.pool), treatment_columns, sae);

            ActiveLearningState state;
            state.train = encoder.apply(parts.train);
            state.pool = encoder.apply(parts.pool);
            state.validation = encoder.apply(parts.validation);
            state.original_feature_names = data.feature_names();
            for (const auto& r : parts.pool.records()) state.pool_originals[r.id] = r.covariates;

            ActiveConfig active;
            active.max_iter = config.rounds;
            active.strategy = Strategy::epi;
            active.grid_points = config.grid_points;
            active.pool_subsample = config.pool_subsample;
            active.seed = run_seed;
            active.execution = parallel ? Execution::serial : Execution::parallel;
            const auto final_state = run_dasa(std::move(state), oracle, model_class, active);
            if (final_state.error) {
                out.failures.push_back(tag + " DASA-Cox: " + *final_state.error);
                continue;
            }

            const CoxModel fitted = fit_cox(final_state.train, config.cox);
            if (!fitted.converged) {
                out.failures.push_back(tag + " DASA-Cox: final fit did not converge");
                continue;
            }
            const std::size_t offset = fitted.beta.size() - treatment_columns.size();
            out.dasa_betas = std::vector<double>(fitted.beta.begin() + static_cast<std::ptrdiff_t>(offset),
                                                 fitted.beta.end());
        } catch (const std::exception& e) {
            out.failures.push_back(tag + " DASA-Cox: " + e.what());
        }
    }

    TreatmentReport report;
    report.runs = config.runs;
    report.rounds = config.rounds;
    report.seed = config.seed;
    std::vector<std::vector<double>> dasa, base;
    for (const auto& o : outcomes) {
        if (o.dasa_betas) dasa.push_back(*o.dasa_betas);
        if (o.baseline_betas) base.push_back(*o.baseline_betas);
        report.failures.insert(report.failures.end(), o.failures.begin(), o.failures.end());
    }
    if (dasa.empty()) {
        std::string msg = "all " + std::to_string(config.runs) + " treatment runs failed";
        if (!report.failures.empty()) msg += " (first: " + report.failures.front() + ")";
        throw AllRunsFailed(msg);
    }
    report.methods.push_back(
        summarise("DASA-Cox", treatment_columns, dasa, config.runs - static_cast<int>(dasa.size())));
    if (config.include_baseline && !base.empty()) {
        report.methods.push_back(
            summarise("COX-Base", treatment_columns, base, config.runs - static_cast<int>(base.size())));
    }
    return report;
}

void write_treatment_csv(const TreatmentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "method,treatment,coefficient,hazard_ratio,rank\n";
    for (const auto& m : report.methods) {
        for (const auto& e : m.effects) {
            out << m.method << ',' << e.treatment << ',' << format_double(e.coefficient) << ','
                << format_double(e.hazard_ratio) << ',' << e.rank << '\n';
        }
    }
}

std::string format_treatment_table(const TreatmentReport& report) {
    std::ostringstream out;
    if (report.methods.empty()) return {};
    const auto& treatments = report.methods.front().effects;

    std::size_t method_width = 6;
    for (const auto& m : report.methods) method_width = std::max(method_width, m.method.size());
    std::vector<std::size_t> widths;
    for (const auto& e : treatments) widths.push_back(std::max<std::size_t>(e.treatment.size(), 6));

    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
    out << pad("Method", method_width);
    for (std::size_t t = 0; t < treatments.size(); ++t) out << "  " << pad(treatments[t].treatment, widths[t]);
    out << '\n';
    for (const auto& m : report.methods) {
        out << pad(m.method, method_width);
        for (std::size_t t = 0; t < m.effects.size(); ++t) {
            char cell[32];
            std::snprintf(cell, sizeof(cell), "%.2f", m.effects[t].hazard_ratio);
            out << "  " << pad(cell, widths[t]);
        }
        out << '\n';
    }
    out << "(hazard ratios averaged over " << report.runs << " runs, " << report.rounds << " rounds each)\n";
    return out.str();
}

}  // namespace dasa
