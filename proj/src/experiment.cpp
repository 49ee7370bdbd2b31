#include "dasa/experiment.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "dasa/errors.hpp"
#include "dasa/oracle.hpp"
#include "dasa/parallel.hpp"

namespace dasa {
namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
    int n = 0;
};

MeanSd mean_sd(const std::vector<double>& v) {
    MeanSd out;
    out.n = static_cast<int>(v.size());
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return out;
}

Dataset encode_dataset(const SaeWeights& weights, const Dataset& data) {
    const Eigen::MatrixXd z = encode(weights, data.covariate_matrix());
    std::vector<std::string> names;
    for (Eigen::Index k = 0; k < z.cols(); ++k) names.push_back("z" + std::to_string(k + 1));
    return with_covariates(data, z, std::move(names));
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace

SynthConfig default_experiment_data(std::size_t n, std::uint64_t seed) {
    SynthConfig c;
    c.n = n;
    c.p = 20;
    c.true_beta.assign(20, 0.0);
    const double planted[] = {0.4, -0.35, 0.3, -0.25, 0.2, -0.2, 0.15, -0.15, 0.1, -0.1};
    for (std::size_t j = 0; j < std::size(planted); ++j) c.true_beta[j] = planted[j];
    c.baseline = WeibullBaseline{1.5, 60.0};
    c.censoring_rate = 0.2;
    c.factor_rank = 5;
    c.factor_noise = 0.3;
    c.seed = seed;
    return c;
}

PreparedRun prepare_run(const Dataset& data, std::size_t train_n, std::size_t pool_n, std::size_t validation_n,
                        const RepresentationSpec& representation, std::uint64_t seed) {
    SplitSpec spec;
    spec.train_n = train_n;
    spec.pool_n = pool_n;
    spec.validation_n = validation_n;
    spec.seed = seed;
    const Split parts = split(data, spec);

    PreparedRun out;
    out.seed = seed;
    auto& state = out.state;
    state.original_feature_names = data.feature_names();
    for (const auto& r : parts.pool.records()) state.pool_originals[r.id] = r.covariates;

    if (!representation.enabled) {
        state.train = parts.train;
        state.pool = parts.pool;
        state.validation = parts.validation;
        return out;
    }
    Eigen::MatrixXd unlabeled(parts.train.size() + parts.pool.size(), data.n_features());
    unlabeled << parts.train.covariate_matrix(), parts.pool.covariate_matrix();
    SaeConfig sae = representation.sae;
    sae.seed = seed;
    const SaeWeights weights = train_sae(unlabeled, sae);
    state.train = encode_dataset(weights, parts.train);
    state.pool = encode_dataset(weights, parts.pool);
    state.validation = encode_dataset(weights, parts.validation);
    return out;
}

std::unique_ptr<ModelClass> make_model_class(const std::string& model, const CoxOptions& cox, const RsfConfig& rsf,
                                             std::uint64_t seed) {
    if (model == "cox") return std::make_unique<CoxModelClass>(cox);
    if (model == "rsf") {
        RsfConfig c = rsf;
        c.seed = seed;
        return std::make_unique<RsfModelClass>(c);
    }
    throw ValidationError("unknown model '" + model + "' (expected cox or rsf)");
}

CompareResult run_compare(const Dataset& data, const LatentTimes& truth, const CompareSpec& spec) {
    if (spec.rounds < 1) throw ValidationError("rounds must be >= 1");
    if (spec.runs < 1) throw ValidationError("runs must be >= 1");
    if (spec.models.empty() || spec.strategies.empty() || spec.sizes.empty()) {
        throw ValidationError("compare needs at least one model, strategy and size");
    }
    for (const auto& m : spec.models) make_model_class(m, spec.cox, spec.rsf, 0);

    struct Cell {
        std::size_t size;
        int run;
    };
    std::vector<Cell> cells;
    for (auto size : spec.sizes) {
        for (int run = 0; run < spec.runs; ++run) cells.push_back({size, run});
    }
    const std::size_t per_cell = spec.models.size() * spec.strategies.size();
    std::vector<RunResult> results(cells.size() * per_cell);
    GroundTruthOracle oracle(truth);
    const Execution inner = cells.size() > 1 ? Execution::serial : Execution::parallel;

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(cells.size()); ++c) {
        const Cell cell = cells[static_cast<std::size_t>(c)];
        const std::uint64_t seed =
            derive_seed(derive_seed(spec.seed, cell.size), static_cast<std::uint64_t>(cell.run));
        RunResult* slot = &results[static_cast<std::size_t>(c) * per_cell];

        std::optional<PreparedRun> prepared;
        std::optional<std::string> prepare_error;
        try {
            prepared = prepare_run(data, cell.size, spec.pool_n, spec.validation_n, spec.representation, seed);
        } catch (const std::exception& e) {
            prepare_error = e.what();
        }

        for (const auto& model : spec.models) {
            for (auto strategy : spec.strategies) {
                RunResult& r = *slot++;
                r.model = model;
                r.strategy = strategy;
                r.size = cell.size;
                r.run = cell.run;
                r.seed = seed;
                if (prepare_error) {
                    r.error = *prepare_error;
                    continue;
                }
                try {
                    const auto model_class = make_model_class(model, spec.cox, spec.rsf, seed);
                    ActiveConfig config;
                    config.max_iter = spec.rounds;
                    config.strategy = strategy;
                    config.grid_points = spec.grid_points;
                    config.pool_subsample = spec.pool_subsample;
                    config.seed = seed;
                    config.execution = inner;
                    const auto final_state = run_dasa(prepared->state, oracle, *model_class, config);
                    r.history = final_state.history;
                    r.error = final_state.error;
                } catch (const std::exception& e) {
                    r.error = e.what();
                }
            }
        }
    }

    CompareResult out;
    out.runs = std::move(results);
    for (const auto& model : spec.models) {
        for (auto strategy : spec.strategies) {
            for (auto size : spec.sizes) {
                CellSummary s;
                s.model = model;
                s.strategy = strategy;
                s.size = size;
                std::vector<double> initial, final;
                for (const auto& r : out.runs) {
                    if (r.model != model || r.strategy != strategy || r.size != size) continue;
                    if (r.error || r.history.empty()) {
                        ++s.runs_failed;
                        continue;
                    }
                    initial.push_back(r.history.front().c_index);
                    final.push_back(r.history.back().c_index);
                }
                s.runs_ok = static_cast<int>(final.size());
                s.mean_initial_c = mean_sd(initial).mean;
                const auto f = mean_sd(final);
                s.mean_final_c = f.mean;
                s.sd_final_c = f.sd;
                out.summary.push_back(s);
            }
        }
    }
    return out;
}

std::vector<std::string> write_compare_outputs(const CompareResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    std::vector<std::string> paths;

    {
        const auto path = dir / "summary.csv";
        auto out = open_output(path);
        out << "model,strategy,size,runs,failed,mean_initial_c_index,mean_final_c_index,sd_final_c_index\n";
        for (const auto& s : result.summary) {
            out << s.model << ',' << to_string(s.strategy) << ',' << s.size << ',' << s.runs_ok << ','
                << s.runs_failed << ',' << format_double(s.mean_initial_c) << ',' << format_double(s.mean_final_c)
                << ',' << format_double(s.sd_final_c) << '\n';
        }
        paths.push_back(path.string());
    }
    {
        const auto path = dir / "runs.csv";
        auto out = open_output(path);
        out << "model,strategy,size,run,seed,round,c_index,selected_id,expected_delta_c,error\n";
        for (const auto& r : result.runs) {
            const std::string prefix = r.model + ',' + to_string(r.strategy) + ',' + std::to_string(r.size) + ',' +
                                       std::to_string(r.run) + ',' + std::to_string(r.seed) + ',';
            if (r.history.empty()) {
                out << prefix << ",,,," << (r.error ? *r.error : "") << '\n';
                continue;
            }
            for (std::size_t i = 0; i < r.history.size(); ++i) {
                const auto& h = r.history[i];
                out << prefix << h.round << ',' << format_double(h.c_index) << ',';
                if (h.selected_id) out << *h.selected_id;
                out << ',';
                if (h.expected_delta_c) out << format_double(*h.expected_delta_c);
                out << ',';
                if (i + 1 == r.history.size() && r.error) out << '"' << *r.error << '"';
                out << '\n';
            }
        }
        paths.push_back(path.string());
    }
    for (const auto& s : result.summary) {
        std::map<int, std::vector<double>> by_round;
        for (const auto& r : result.runs) {
            if (r.model != s.model || r.strategy != s.strategy || r.size != s.size || r.error) continue;
            for (const auto& h : r.history) by_round[h.round].push_back(h.c_index);
        }
        const auto path = dir / ("curve_" + s.model + "_" + to_string(s.strategy) + "_" + std::to_string(s.size) + ".csv");
        auto out = open_output(path);
        out << "round,mean_c_index,sd_c_index,runs\n";
        for (const auto& [round, values] : by_round) {
            const auto m = mean_sd(values);
            out << round << ',' << format_double(m.mean) << ',' << format_double(m.sd) << ',' << m.n << '\n';
        }
        paths.push_back(path.string());
    }
    return paths;
}

}  // namespace dasa
