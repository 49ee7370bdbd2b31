#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dasa/datakit.hpp"
#include "dasa/errors.hpp"
#include "dasa/treatment.hpp"

using namespace dasa;
using Catch::Approx;

namespace {

const std::vector<std::string> kTreatments{"chemotherapy", "radiotherapy", "surgery"};

SynthData planted(std::size_t n, std::uint64_t seed, std::vector<double> betas = {std::log(0.74), std::log(1.04),
                                                                                  std::log(1.38)}) {
    SynthConfig c;
    c.n = n;
    c.p = 6;
    c.true_beta = {0.3, -0.2, 0.0, 0.0, 0.1, 0.0};
    c.censoring_rate = 0.2;
    c.seed = seed;
    for (std::size_t i = 0; i < kTreatments.size(); ++i) c.treatments.push_back({kTreatments[i], betas[i], 0.5});
    return generate(c);
}

SaeConfig tiny_sae() {
    SaeConfig s;
    s.layer_sizes = {4, 2};
    s.epochs = 10;
    return s;
}

TreatmentConfig quick_config() {
    TreatmentConfig c;
    c.runs = 3;
    c.rounds = 2;
    c.seed = 7;
    c.split = SplitSpec{60, 20, 20, 0};
    c.sae = tiny_sae();
    c.grid_points = 3;
    return c;
}

class RefusingOracle final : public Oracle {
public:
    OracleAnswer answer(const OracleQuery&) override { throw OracleTimeout("nobody home"); }
};

}  // namespace

TEST_CASE("treatment features append raw flags after the latent code", "[treatment]") {
    const auto data = planted(80, 1);
    SaeConfig sae = tiny_sae();
    sae.layer_sizes = {6, 5};
    const auto out = build_treatment_features(data.data, kTreatments, sae);
    REQUIRE(out.n_features() == 8);
    CHECK(out.feature_names() ==
          std::vector<std::string>{"z1", "z2", "z3", "z4", "z5", "chemotherapy", "radiotherapy", "surgery"});
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& src = data.data[i];
        const auto& dst = out[i];
        CHECK(dst.id == src.id);
        CHECK(dst.time == src.time);
        CHECK(dst.event == src.event);
        for (std::size_t k = 0; k < kTreatments.size(); ++k) {
            CHECK(dst.covariates[5 + k] == src.covariates[*data.data.feature_index(kTreatments[k])]);
        }
    }
}

TEST_CASE("treatment layout ignores the order of other columns", "[treatment]") {
    const auto data = planted(60, 2);
    std::vector<std::string> shuffled{"surgery", "x6", "x3", "chemotherapy", "x1", "x5", "radiotherapy", "x2", "x4"};
    const auto permuted = select_columns(data.data, shuffled);
    const auto out = build_treatment_features(permuted, kTreatments, tiny_sae());
    REQUIRE(out.n_features() == 5);
    CHECK(out.feature_names()[2] == "chemotherapy");
    CHECK(out.feature_names()[3] == "radiotherapy");
    CHECK(out.feature_names()[4] == "surgery");
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].covariates[2] == permuted[i].covariates[3]);
        CHECK(out[i].covariates[4] == permuted[i].covariates[0]);
    }
}

TEST_CASE("encoder fitted once applies to other sets", "[treatment]") {
    const auto data = planted(60, 3);
    const auto enc = TreatmentEncoder::fit(data.data, kTreatments, tiny_sae());
    CHECK(enc.encoded_columns().size() == 6);
    CHECK(enc.treatment_columns() == kTreatments);
    CHECK(enc.apply(data.data) == build_treatment_features(data.data, kTreatments, tiny_sae()));
}

TEST_CASE("treatment columns must exist and be binary", "[treatment]") {
    const auto data = planted(40, 4);
    CHECK_NOTHROW(check_treatment_columns(data.data, kTreatments));
    CHECK_THROWS_AS(check_treatment_columns(data.data, {"immunotherapy"}), ValidationError);
    CHECK_THROWS_AS(check_treatment_columns(data.data, {"x1"}), ValidationError);
    CHECK_THROWS_AS(build_treatment_features(data.data, {"x1"}, tiny_sae()), ValidationError);
}

TEST_CASE("report aggregates hazard ratios over runs", "[treatment]") {
    const auto data = planted(120, 5);
    GroundTruthOracle oracle(data.latent_times);
    const auto report = recommend(data.data, kTreatments, quick_config(), oracle);
    REQUIRE(report.methods.size() == 2);
    CHECK(report.methods[0].method == "DASA-Cox");
    CHECK(report.methods[1].method == "COX-Base");
    CHECK(report.runs == 3);
    CHECK(report.rounds == 2);

    for (const auto& m : report.methods) {
        CHECK(m.runs_succeeded + m.runs_failed == 3);
        REQUIRE(m.effects.size() == 3);
        for (const auto& e : m.effects) {
            REQUIRE(e.run_betas.size() == static_cast<std::size_t>(m.runs_succeeded));
            double mean_hr = 0.0, mean_beta = 0.0;
            for (double b : e.run_betas) {
                mean_hr += std::exp(b);
                mean_beta += b;
            }
            mean_hr /= double(e.run_betas.size());
            mean_beta /= double(e.run_betas.size());
            CHECK(e.hazard_ratio == Approx(mean_hr));
            CHECK(e.hazard_ratio == Approx(std::exp(e.coefficient)));
            CHECK(e.mean_beta == Approx(mean_beta));
        }
        // Ranking lists treatments by ascending hazard ratio, ranks match positions.
        REQUIRE(m.ranking.size() == 3);
        for (std::size_t r = 0; r < 3; ++r) CHECK(m.effect(m.ranking[r]).rank == int(r) + 1);
        for (std::size_t r = 1; r < 3; ++r) {
            CHECK(m.effect(m.ranking[r - 1]).hazard_ratio <= m.effect(m.ranking[r]).hazard_ratio);
        }
    }
    CHECK_THROWS(report.method("nope"));
}

TEST_CASE("recommend is deterministic", "[treatment]") {
    const auto data = planted(100, 6);
    GroundTruthOracle oracle(data.latent_times);
    auto cfg = quick_config();
    cfg.runs = 2;
    const auto a = recommend(data.data, kTreatments, cfg, oracle);
    const auto b = recommend(data.data, kTreatments, cfg, oracle);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(a.methods[0].effects[t].run_betas == b.methods[0].effects[t].run_betas);
    }
}

TEST_CASE("every run failing raises AllRunsFailed", "[treatment]") {
    const auto data = planted(100, 7);
    RefusingOracle oracle;
    auto cfg = quick_config();
    cfg.runs = 2;
    CHECK_THROWS_AS(recommend(data.data, kTreatments, cfg, oracle), AllRunsFailed);
    cfg.runs = 0;
    CHECK_THROWS_AS(recommend(data.data, kTreatments, cfg, oracle), ValidationError);
}

TEST_CASE("baseline can be left out", "[treatment]") {
    const auto data = planted(100, 8);
    GroundTruthOracle oracle(data.latent_times);
    auto cfg = quick_config();
    cfg.runs = 1;
    cfg.include_baseline = false;
    const auto report = recommend(data.data, kTreatments, cfg, oracle);
    CHECK(report.methods.size() == 1);
}

TEST_CASE("treatment CSV and table output", "[treatment]") {
    const auto data = planted(100, 9);
    GroundTruthOracle oracle(data.latent_times);
    auto cfg = quick_config();
    cfg.runs = 2;
    const auto report = recommend(data.data, kTreatments, cfg, oracle);

    const auto path = (std::filesystem::temp_directory_path() / "dasa_treatment_test.csv").string();
    write_treatment_csv(report, path);
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    std::filesystem::remove(path);
    REQUIRE(lines.size() == 7);
    CHECK(lines[0] == "method,treatment,coefficient,hazard_ratio,rank");
    CHECK(lines[1].rfind("DASA-Cox,chemotherapy,", 0) == 0);
    CHECK(lines[6].rfind("COX-Base,surgery,", 0) == 0);

    const auto table = format_treatment_table(report);
    for (const auto& t : kTreatments) CHECK(table.find(t) != std::string::npos);
    CHECK(table.find("DASA-Cox") != std::string::npos);
    CHECK(table.find("COX-Base") != std::string::npos);
}
