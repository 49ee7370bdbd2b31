#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dasa/active.hpp"
#include "dasa/cox.hpp"
#include "dasa/datakit.hpp"
#include "dasa/representation.hpp"
#include "dasa/rsf.hpp"

namespace dasa {

/// Synthetic cohort used by the experiment commands when no data file is
/// given: p = 20 correlated covariates driven by 5 latent factors, Weibull
/// baseline, 20% censoring.
SynthConfig default_experiment_data(std::size_t n, std::uint64_t seed);

struct RepresentationSpec {
    bool enabled = true;
    SaeConfig sae{{16, 10, 5}, Activation::tanh, 200, 32, 1e-3, 0};
};

/// Everything one active run needs, built from a dataset and a split seed.
struct PreparedRun {
    ActiveLearningState state;
    std::uint64_t seed = 0;
};

/// Splits `data`, trains the representation on train + pool (when enabled)
/// and returns the initial loop state with original pool features attached.
PreparedRun prepare_run(const Dataset& data, std::size_t train_n, std::size_t pool_n, std::size_t validation_n,
                        const RepresentationSpec& representation, std::uint64_t seed);

struct CompareSpec {
    std::vector<std::string> models{"cox"};  // cox | rsf
    std::vector<Strategy> strategies{Strategy::epi, Strategy::random};
    std::vector<std::size_t> sizes{25};
    int rounds = 20;
    int runs = 10;
    std::uint64_t seed = 0;
    std::size_t pool_n = 200;
    std::size_t validation_n = 100;
    std::size_t grid_points = 10;
    std::size_t pool_subsample = 0;
    RepresentationSpec representation{};
    CoxOptions cox{};
    RsfConfig rsf{50, 0, 3, 0, 0};
};

struct RunResult {
    std::string model;
    Strategy strategy = Strategy::epi;
    std::size_t size = 0;
    int run = 0;
    std::uint64_t seed = 0;
    std::vector<RoundRecord> history;
    std::optional<std::string> error;
};

struct CellSummary {
    std::string model;
    Strategy strategy = Strategy::epi;
    std::size_t size = 0;
    int runs_ok = 0;
    int runs_failed = 0;
    double mean_initial_c = 0.0;
    double mean_final_c = 0.0;
    double sd_final_c = 0.0;
};

struct CompareResult {
    std::vector<RunResult> runs;          // (model, size, run, strategy) order
    std::vector<CellSummary> summary;     // (model, strategy, size) order
};

std::unique_ptr<ModelClass> make_model_class(const std::string& model, const CoxOptions& cox, const RsfConfig& rsf,
                                             std::uint64_t seed);

/// Runs the model x strategy x size x run grid. Within one (size, run) cell
/// every strategy and model sees the same split and representation, so the
/// strategies are compared paired. Cells run in parallel.
CompareResult run_compare(const Dataset& data, const LatentTimes& truth, const CompareSpec& spec);

/// summary.csv, runs.csv and one curve_<model>_<strategy>_<size>.csv per cell.
/// Returns the written paths.
std::vector<std::string> write_compare_outputs(const CompareResult& result, const std::string& out_dir);

}  // namespace dasa
