#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dasa/active.hpp"
#include "dasa/concordance.hpp"
#include "dasa/cox.hpp"
#include "dasa/datakit.hpp"
#include "dasa/errors.hpp"
#include "dasa/experiment.hpp"
#include "dasa/oracle.hpp"
#include "dasa/oracle_http.hpp"
#include "dasa/rsf.hpp"
#include "dasa/treatment.hpp"

namespace fs = std::filesystem;
using namespace dasa;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kMissingFile = 3, kOracleTimeout = 4, kDataError = 5 };

struct MissingFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw MissingFile("file not found: " + path);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> parse_layers(const std::string& s) {
    std::vector<int> out;
    for (const auto& item : split_list(s)) out.push_back(std::stoi(item));
    if (out.empty()) throw UsageError("--layers needs at least one width");
    return out;
}

std::string wrote(const std::string& path) {
    std::cout << "wrote " << path << '\n';
    return path;
}

fs::path ensure_dir(const std::string& dir) {
    fs::create_directories(dir);
    return fs::path(dir);
}

struct DataSource {
    std::string data_path;
    std::string truth_path;
    std::size_t n = 0;
};

SynthData load_or_synthesize(const DataSource& src, std::size_t default_n, std::uint64_t seed, bool need_truth) {
    if (src.data_path.empty()) {
        return generate(default_experiment_data(src.n ? src.n : default_n, seed));
    }
    require_file(src.data_path);
    SynthData out{load_csv(src.data_path), {}};
    const std::string truth = src.truth_path.empty() ? truth_path_for(src.data_path) : src.truth_path;
    if (fs::exists(truth)) {
        out.latent_times = load_truth_csv(truth);
    } else if (need_truth) {
        throw MissingFile("ground-truth oracle needs " + truth);
    }
    return out;
}

struct RepresentOptions {
    std::string layers = "16,10,5";
    std::string activation = "tanh";
    int epochs = 200;
    bool disabled = false;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--layers", layers, "encoder widths, comma separated (last = latent dim)")->capture_default_str();
        cmd.add_option("--activation", activation, "sigmoid | tanh | relu")->capture_default_str();
        cmd.add_option("--epochs", epochs, "autoencoder training epochs")->capture_default_str();
        cmd.add_flag("--no-represent", disabled, "use the raw covariates");
    }

    RepresentationSpec spec() const {
        RepresentationSpec r;
        r.enabled = !disabled;
        r.sae.layer_sizes = parse_layers(layers);
        r.sae.activation = activation_from_string(activation);
        r.sae.epochs = epochs;
        return r;
    }
};

struct LoopOptions {
    DataSource source;
    std::string model = "cox";
    std::string strategy = "epi";
    std::string oracle = "truth";
    std::size_t train_n = 25;
    std::size_t pool_n = 200;
    std::size_t validation_n = 100;
    std::size_t grid_points = 10;
    std::size_t subsample = 0;
    int rounds = 20;
    int trees = 50;
    std::uint64_t seed = 0;
    std::string out = "dasa_out";
    RepresentOptions represent;

    void add_to(CLI::App& cmd) {
        auto* data = cmd.add_option("--data", source.data_path, "CSV dataset (id,time,event,features...)");
        cmd.add_option("--truth", source.truth_path, "latent-time sidecar (default <data>.truth.csv)")->needs(data);
        cmd.add_option("--n", source.n, "synthetic cohort size when --data is absent")->excludes(data);
        cmd.add_option("--model", model, "cox | rsf")->capture_default_str();
        cmd.add_option("--strategy", strategy, "epi | random")->capture_default_str();
        cmd.add_option("--train", train_n, "initial training size")->capture_default_str();
        cmd.add_option("--pool", pool_n, "pool size")->capture_default_str();
        cmd.add_option("--validation", validation_n, "validation size")->capture_default_str();
        cmd.add_option("--grid", grid_points, "EPI time-grid points")->capture_default_str();
        cmd.add_option("--subsample", subsample, "score a random subset of this many pool records (0 = all)");
        cmd.add_option("--rounds", rounds, "active rounds")->capture_default_str()->check(CLI::PositiveNumber);
        cmd.add_option("--trees", trees, "trees for --model rsf")->capture_default_str();
        cmd.add_option("--seed", seed, "random seed")->capture_default_str();
        cmd.add_option("--out", out, "output directory")->capture_default_str();
        represent.add_to(cmd);
    }

    std::size_t default_n() const { return train_n + pool_n + validation_n; }

    ActiveConfig active_config() const {
        ActiveConfig c;
        c.max_iter = rounds;
        c.strategy = strategy_from_string(strategy);
        c.grid_points = grid_points;
        c.pool_subsample = subsample;
        c.seed = seed;
        return c;
    }

    RsfConfig rsf_config() const {
        RsfConfig c;
        c.n_trees = trees;
        return c;
    }
};

/// Forwards to another oracle and remembers whether it timed out.
class TimeoutWatch final : public Oracle {
public:
    explicit TimeoutWatch(Oracle& inner) : inner_(inner) {}
    OracleAnswer answer(const OracleQuery& q) override {
        try {
            return inner_.answer(q);
        } catch (const OracleTimeout&) {
            timed_out = true;
            throw;
        }
    }
    bool timed_out = false;

private:
    Oracle& inner_;
};

int finish_run(const ActiveLearningState& state, const fs::path& dir, bool timed_out) {
    const auto history = (dir / "history.csv").string();
    write_history_csv(state, history);
    wrote(history);
    if (!state.history.empty()) {
        std::cout << "c-index round 0: " << state.history.front().c_index << ", round " << state.history.back().round
                  << ": " << state.history.back().c_index << '\n';
    }
    if (state.error) {
        std::cerr << "error: " << *state.error << '\n';
        return timed_out ? kOracleTimeout : kDataError;
    }
    return kOk;
}

int cmd_synth(std::size_t n, std::size_t p, double censoring, const std::string& beta, const std::string& baseline,
              double rate, double shape, double scale, const std::string& treatments, std::size_t factor_rank,
              std::uint64_t seed, const std::string& out) {
    SynthConfig c;
    c.n = n;
    c.p = p;
    c.censoring_rate = censoring;
    c.seed = seed;
    c.factor_rank = factor_rank;
    for (const auto& b : split_list(beta)) c.true_beta.push_back(std::stod(b));
    if (baseline == "exponential") c.baseline = ExponentialBaseline{rate};
    else if (baseline == "weibull") c.baseline = WeibullBaseline{shape, scale};
    else throw UsageError("--baseline must be exponential or weibull");
    for (const auto& spec : split_list(treatments)) {
        std::stringstream in(spec);
        std::string name, b, prev;
        std::getline(in, name, ':');
        std::getline(in, b, ':');
        std::getline(in, prev, ':');
        if (name.empty() || b.empty()) throw UsageError("--treatments entries are name:beta[:prevalence]");
        c.treatments.push_back({name, std::stod(b), prev.empty() ? 0.5 : std::stod(prev)});
    }
    const auto data = generate(c);
    const fs::path path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_csv(data.data, out);
    wrote(out);
    const auto truth = truth_path_for(out);
    write_truth_csv(data.latent_times, truth);
    wrote(truth);
    return kOk;
}

int cmd_fit(const std::string& data_path, const std::string& model, int trees, std::uint64_t seed,
            const std::string& out) {
    require_file(data_path);
    const Dataset data = load_csv(data_path);
    nlohmann::ordered_json doc;
    doc["model"] = model;
    doc["n"] = data.size();
    doc["events"] = data.n_events();
    if (model == "cox") {
        const auto fit = fit_cox(data);
        nlohmann::ordered_json coef = nlohmann::ordered_json::object();
        for (std::size_t j = 0; j < fit.beta.size(); ++j) coef[data.feature_names()[j]] = fit.beta[j];
        doc["coefficients"] = coef;
        doc["log_partial_likelihood"] = fit.log_partial_likelihood;
        doc["iterations"] = fit.iterations;
        doc["converged"] = fit.converged;
        CoxFitted fitted(fit);
        doc["c_index"] = validation_c_index(fitted, data);
    } else if (model == "rsf") {
        RsfConfig c;
        c.n_trees = trees;
        c.seed = seed;
        RsfFitted fitted(fit_rsf(data, c, Execution::parallel));
        doc["trees"] = trees;
        doc["seed"] = seed;
        doc["c_index"] = validation_c_index(fitted, data);
    } else {
        throw UsageError("--model must be cox or rsf");
    }
    const fs::path dir = ensure_dir(out);
    const auto path = (dir / ("fit_" + model + ".json")).string();
    std::ofstream(path) << doc.dump(2) << '\n';
    std::cout << doc.dump(2) << '\n';
    wrote(path);
    return kOk;
}

int cmd_active(const LoopOptions& o) {
    const auto data = load_or_synthesize(o.source, o.default_n(), o.seed, o.oracle == "truth");
    auto prepared = prepare_run(data.data, o.train_n, o.pool_n, o.validation_n, o.represent.spec(), o.seed);
    const auto model_class = make_model_class(o.model, CoxOptions{}, o.rsf_config(), o.seed);

    std::unique_ptr<Oracle> oracle;
    if (o.oracle == "truth") oracle = std::make_unique<GroundTruthOracle>(data.latent_times);
    else if (o.oracle == "table") oracle = std::make_unique<TableOracle>(ConditionalSurvivalTable::seer_prostate(), o.seed);
    else throw UsageError("--oracle must be truth or table");

    const fs::path dir = ensure_dir(o.out);
    const auto state = run_dasa(std::move(prepared.state), *oracle, *model_class, o.active_config(),
                                [](const ActiveLearningState& s) {
                                    std::cout << "round " << s.history.back().round << " c-index "
                                              << s.history.back().c_index << '\n';
                                });
    return finish_run(state, dir, false);
}

int cmd_compare(const LoopOptions& o, const std::string& models, const std::string& sizes, int runs) {
    CompareSpec spec;
    spec.models = split_list(models);
    spec.sizes.clear();
    for (const auto& s : split_list(sizes)) spec.sizes.push_back(static_cast<std::size_t>(std::stoul(s)));
    if (spec.sizes.empty()) throw UsageError("--sizes needs at least one size");
    spec.rounds = o.rounds;
    spec.runs = runs;
    spec.seed = o.seed;
    spec.pool_n = o.pool_n;
    spec.validation_n = o.validation_n;
    spec.grid_points = o.grid_points;
    spec.pool_subsample = o.subsample;
    spec.representation = o.represent.spec();
    spec.rsf = o.rsf_config();

    std::size_t largest = 0;
    for (auto s : spec.sizes) largest = std::max(largest, s);
    const auto data = load_or_synthesize(o.source, largest + o.pool_n + o.validation_n, o.seed, true);
    const auto result = run_compare(data.data, data.latent_times, spec);
    for (const auto& s : result.summary) {
        std::cout << s.model << ' ' << to_string(s.strategy) << " size " << s.size << ": final c-index "
                  << s.mean_final_c << " (round 0 " << s.mean_initial_c << ", " << s.runs_ok << " runs";
        if (s.runs_failed) std::cout << ", " << s.runs_failed << " failed";
        std::cout << ")\n";
    }
    for (const auto& p : write_compare_outputs(result, o.out)) wrote(p);
    return kOk;
}

int cmd_treat(const DataSource& source, const std::string& treatments, const TreatmentConfig& config,
              const std::string& oracle_name, const std::string& layers, int epochs, const std::string& out) {
    SynthData data;
    std::vector<std::string> columns = split_list(treatments);
    if (source.data_path.empty()) {
        SynthConfig c;
        c.n = source.n ? source.n : 400;
        c.p = 10;
        c.true_beta.assign(10, 0.0);
        c.censoring_rate = 0.2;
        c.seed = config.seed;
        c.treatments = {{"chemotherapy", std::log(0.74)}, {"radiotherapy", std::log(1.04)}, {"surgery", std::log(1.38)}};
        data = generate(c);
        if (columns.empty()) columns = {"chemotherapy", "radiotherapy", "surgery"};
    } else {
        data = load_or_synthesize(source, 0, config.seed, oracle_name == "truth");
    }
    if (columns.empty()) throw UsageError("--treatments is required with --data");

    TreatmentConfig cfg = config;
    cfg.sae.layer_sizes = parse_layers(layers);
    cfg.sae.epochs = epochs;

    std::unique_ptr<Oracle> oracle;
    if (oracle_name == "truth") oracle = std::make_unique<GroundTruthOracle>(data.latent_times);
    else if (oracle_name == "table") oracle = std::make_unique<TableOracle>(ConditionalSurvivalTable::seer_prostate(), cfg.seed);
    else throw UsageError("--oracle must be truth or table");

    const auto report = recommend(data.data, columns, cfg, *oracle);
    std::cout << format_treatment_table(report);
    for (const auto& f : report.failures) std::cerr << "excluded: " << f << '\n';
    const fs::path dir = ensure_dir(out);
    const auto path = (dir / "treatment_report.csv").string();
    write_treatment_csv(report, path);
    wrote(path);
    return kOk;
}

int cmd_serve(const LoopOptions& o, const std::string& host, int port, int timeout_seconds) {
    const auto data = load_or_synthesize(o.source, o.default_n(), o.seed, false);
    auto prepared = prepare_run(data.data, o.train_n, o.pool_n, o.validation_n, o.represent.spec(), o.seed);
    const auto model_class = make_model_class(o.model, CoxOptions{}, o.rsf_config(), o.seed);

    OracleGateway gateway{std::chrono::seconds(timeout_seconds)};
    OracleHttpServer server(gateway);
    const int bound = server.start(host, port);
    std::cout << "oracle service listening on http://" << host << ':' << bound << "/api/v1" << std::endl;

    auto publish = [&](const ActiveLearningState& s, const std::string& state) {
        RunStatus status;
        status.state = state;
        status.round = s.round;
        if (!s.history.empty()) status.c_index = s.history.back().c_index;
        for (const auto& h : s.history) status.history.push_back({h.round, h.c_index});
        status.train_size = s.train.size();
        status.pool_size = s.pool.size();
        status.error = s.error;
        gateway.publish_status(std::move(status));
    };
    publish(prepared.state, "running");

    TimeoutWatch watch(gateway);
    const auto state = run_dasa(std::move(prepared.state), watch, *model_class, o.active_config(),
                                [&](const ActiveLearningState& s) {
                                    publish(s, "running");
                                    std::cout << "round " << s.history.back().round << " c-index "
                                              << s.history.back().c_index << std::endl;
                                });
    publish(state, state.error ? "aborted" : "finished");
    gateway.shutdown();
    server.stop();
    return finish_run(state, ensure_dir(o.out), watch.timed_out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active survival analysis with learned representations"};
    app.require_subcommand(1);

    // synth
    std::size_t synth_n = 500, synth_p = 10, factor_rank = 0;
    double censoring = 0.2, rate = 0.01, shape = 1.5, scale = 60.0;
    std::string beta, baseline = "exponential", treatments, synth_out = "synth.csv";
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "generate a synthetic proportional-hazards cohort");
    synth->add_option("--n", synth_n, "records")->capture_default_str();
    synth->add_option("--p", synth_p, "covariates")->capture_default_str();
    synth->add_option("--beta", beta, "true coefficients, comma separated (default all zero)");
    synth->add_option("--censoring", censoring, "target censored fraction")->capture_default_str();
    synth->add_option("--baseline", baseline, "exponential | weibull")->capture_default_str();
    synth->add_option("--rate", rate, "exponential baseline rate per month")->capture_default_str();
    synth->add_option("--shape", shape, "Weibull shape")->capture_default_str();
    synth->add_option("--scale", scale, "Weibull scale (months)")->capture_default_str();
    synth->add_option("--treatments", treatments, "binary treatment columns as name:beta[:prevalence],...");
    synth->add_option("--factor-rank", factor_rank, "latent factors behind the covariates (0 = independent)");
    synth->add_option("--seed", synth_seed, "random seed")->capture_default_str();
    synth->add_option("--out", synth_out, "output CSV (truth sidecar written next to it)")->capture_default_str();

    // fit
    std::string fit_data, fit_model = "cox", fit_out = "dasa_out";
    int fit_trees = 200;
    std::uint64_t fit_seed = 0;
    auto* fit = app.add_subcommand("fit", "fit a survival model to a CSV dataset");
    fit->add_option("--data", fit_data, "CSV dataset")->required();
    fit->add_option("--model", fit_model, "cox | rsf")->capture_default_str();
    fit->add_option("--trees", fit_trees, "trees for rsf")->capture_default_str();
    fit->add_option("--seed", fit_seed, "random seed")->capture_default_str();
    fit->add_option("--out", fit_out, "output directory")->capture_default_str();

    // active
    LoopOptions active_opts;
    auto* active = app.add_subcommand("active", "run the active survival loop once");
    active_opts.add_to(*active);
    active->add_option("--oracle", active_opts.oracle, "truth | table")->capture_default_str();

    // compare
    LoopOptions compare_opts;
    std::string compare_models = "cox", sizes = "25";
    int compare_runs = 10;
    auto* compare = app.add_subcommand("compare", "EPI versus random sampling over models, sizes and runs");
    compare_opts.add_to(*compare);
    compare->remove_option(compare->get_option("--model"));
    compare->remove_option(compare->get_option("--strategy"));
    compare->remove_option(compare->get_option("--train"));
    compare->add_option("--model", compare_models, "cox, rsf or cox,rsf")->capture_default_str();
    compare->add_option("--sizes", sizes, "training sizes, comma separated")->capture_default_str();
    compare->add_option("--runs", compare_runs, "runs per cell")->capture_default_str()->check(CLI::PositiveNumber);

    // treat
    DataSource treat_source;
    TreatmentConfig treat_config;
    std::string treat_columns, treat_oracle = "truth", treat_layers = "150,100,5", treat_out = "dasa_out";
    int treat_epochs = 200;
    auto* treat = app.add_subcommand("treat", "rank treatments by run-averaged hazard ratio");
    auto* treat_data = treat->add_option("--data", treat_source.data_path, "CSV dataset");
    treat->add_option("--truth", treat_source.truth_path, "latent-time sidecar")->needs(treat_data);
    treat->add_option("--n", treat_source.n, "synthetic cohort size when --data is absent")->excludes(treat_data);
    treat->add_option("--treatments", treat_columns, "binary treatment columns, comma separated");
    treat->add_option("--oracle", treat_oracle, "truth | table")->capture_default_str();
    treat->add_option("--runs", treat_config.runs, "runs to average")->capture_default_str()->check(CLI::PositiveNumber);
    treat->add_option("--rounds", treat_config.rounds, "active rounds per run")->capture_default_str();
    treat->add_option("--train", treat_config.split.train_n, "initial training size")->capture_default_str();
    treat->add_option("--pool", treat_config.split.pool_n, "pool size")->capture_default_str();
    treat->add_option("--validation", treat_config.split.validation_n, "validation size")->capture_default_str();
    treat->add_option("--layers", treat_layers, "encoder widths")->capture_default_str();
    treat->add_option("--epochs", treat_epochs, "autoencoder epochs")->capture_default_str();
    treat->add_option("--seed", treat_config.seed, "random seed")->capture_default_str();
    treat->add_option("--out", treat_out, "output directory")->capture_default_str();
    std::string treat_model = "cox";
    treat->add_option("--model", treat_model, "cox (hazard ratios need coefficients)")->check(CLI::IsMember({"cox"}));

    // serve
    LoopOptions serve_opts;
    std::string host = "127.0.0.1";
    int port = 8080, timeout_seconds = 600;
    auto* serve = app.add_subcommand("serve", "run the active loop with a human oracle over HTTP");
    serve_opts.add_to(*serve);
    serve->add_option("--host", host, "bind address")->capture_default_str();
    serve->add_option("--port", port, "port (0 picks a free one)")->capture_default_str();
    serve->add_option("--timeout-seconds", timeout_seconds, "seconds to wait for each answer")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*synth) {
            return cmd_synth(synth_n, synth_p, censoring, beta, baseline, rate, shape, scale, treatments, factor_rank,
                             synth_seed, synth_out);
        }
        if (*fit) return cmd_fit(fit_data, fit_model, fit_trees, fit_seed, fit_out);
        if (*active) return cmd_active(active_opts);
        if (*compare) return cmd_compare(compare_opts, compare_models, sizes, compare_runs);
        if (*treat) {
            return cmd_treat(treat_source, treat_columns, treat_config, treat_oracle, treat_layers, treat_epochs,
                             treat_out);
        }
        if (*serve) return cmd_serve(serve_opts, host, port, timeout_seconds);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const MissingFile& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kMissingFile;
    } catch (const OracleTimeout& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOracleTimeout;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
