#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "dasa/concordance.hpp"
#include "dasa/cox.hpp"
#include "dasa/datakit.hpp"
#include "dasa/dataset.hpp"
#include "dasa/errors.hpp"
#include "oracles/reference.hpp"
#include "support.hpp"

using namespace dasa;
using Catch::Approx;
using testing_support::random_dataset;

namespace {

Dataset one_feature(std::vector<double> x, std::vector<double> t, std::vector<bool> e) {
    Dataset d({"x"});
    for (std::size_t i = 0; i < x.size(); ++i) d.add({static_cast<RecordId>(i + 1), {x[i]}, t[i], e[i]});
    return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

TEST_CASE("Dataset rejects records violating invariants", "[dataset]") {
    Dataset d({"a", "b"});
    CHECK_THROWS_AS(d.add({1, {0.0, 1.0}, -1.0, true}), ValidationError);
    CHECK_THROWS_AS(d.add({1, {0.0}, 1.0, true}), ValidationError);
    CHECK_THROWS_AS(d.add({1, {0.0, NAN}, 1.0, true}), ValidationError);
    d.add({1, {0.0, 1.0}, 2.0, true});
    CHECK_THROWS_AS(d.add({1, {0.0, 1.0}, 3.0, false}), ValidationError);
    CHECK(d.size() == 1);
    CHECK(d.n_events() == 1);
}

TEST_CASE("Dataset remove returns the record and frees the id", "[dataset]") {
    Dataset d({"a"});
    d.add({5, {1.0}, 2.0, false});
    d.add({7, {2.0}, 3.0, true});
    const auto r = d.remove(5);
    CHECK(r.id == 5);
    CHECK_FALSE(d.contains(5));
    CHECK(d.index_of(7) == std::optional<std::size_t>(0));
    d.add(r);
    CHECK(d.contains(5));
    CHECK_THROWS_AS(d.remove(99), ValidationError);
}

TEST_CASE("linear_predictor checks dimensions", "[dataset]") {
    const std::vector<double> x{1.0, 2.0}, b{0.5, -1.0};
    CHECK(linear_predictor(x, b) == Approx(-1.5));
    const std::vector<double> short_b{1.0};
    CHECK_THROWS_AS(linear_predictor(x, short_b), DimensionError);
}

// ---------------------------------------------------------------------------
// Partial likelihood and Cox fitting
// ---------------------------------------------------------------------------

TEST_CASE("partial likelihood matches the risk-set definition", "[cox]") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 30; ++rep) {
        const auto data = random_dataset(rng, 15, 3, 0.7, 0.4);
        if (data.n_events() == 0) continue;
        std::normal_distribution<double> normal(0.0, 0.7);
        std::vector<double> beta{normal(rng), normal(rng), normal(rng)};
        CHECK(partial_log_likelihood(beta, data) == Approx(oracle::log_partial_likelihood(beta, data)).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradient and Hessian match finite differences", "[cox]") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const auto data = random_dataset(rng, 20, 3, 0.6, 0.3);
        if (data.n_events() == 0) continue;
        std::normal_distribution<double> normal(0.0, 0.5);
        std::vector<double> beta{normal(rng), normal(rng), normal(rng)};
        const auto pl = partial_log_likelihood_derivatives(beta, data);
        const auto fd = oracle::finite_difference(
            [&](const std::vector<double>& b) { return oracle::log_partial_likelihood(b, data); }, beta);
        for (std::size_t k = 0; k < 3; ++k) CHECK(pl.gradient(k) == Approx(fd[k]).epsilon(1e-5).margin(1e-7));

        for (std::size_t k = 0; k < 3; ++k) {
            const auto fd_row = oracle::finite_difference(
                [&](const std::vector<double>& b) {
                    return partial_log_likelihood_derivatives(b, data).gradient(static_cast<Eigen::Index>(k));
                },
                beta);
            for (std::size_t j = 0; j < 3; ++j) CHECK(pl.hessian(k, j) == Approx(fd_row[j]).epsilon(1e-5).margin(1e-7));
        }
    }
}

TEST_CASE("fit_cox reaches the grid-search maximiser", "[cox]") {
    std::mt19937_64 rng(13);
    int checked = 0;
    while (checked < 8) {
        const auto data = random_dataset(rng, 12, 2, 0.7, 0.3);
        if (data.n_events() < 2) continue;
        const auto grid = oracle::grid_search_cox(data);
        if (grid.on_boundary) continue;
        const auto fit = fit_cox(data);
        REQUIRE(fit.converged);
        for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(fit.beta[k] - grid.beta[k]) <= 1e-3);
        CHECK(fit.log_partial_likelihood >= grid.value - 1e-9);
        ++checked;
    }
}

TEST_CASE("fit_cox warm start reaches the same optimum", "[cox]") {
    std::mt19937_64 rng(14);
    const auto data = random_dataset(rng, 40, 3, 0.7);
    const auto cold = fit_cox(data);
    const std::vector<double> init{0.3, -0.2, 0.1};
    const auto warm = fit_cox(data, {}, init);
    for (std::size_t k = 0; k < 3; ++k) CHECK(warm.beta[k] == Approx(cold.beta[k]).margin(1e-6));
}

TEST_CASE("fit_cox holds constant columns at zero", "[cox]") {
    Dataset d({"x", "c"});
    std::mt19937_64 rng(15);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 30; ++i) d.add({i + 1, {normal(rng), 2.5}, 1.0 + i, i % 3 != 0});
    const auto fit = fit_cox(d);
    CHECK(fit.converged);
    CHECK(fit.constant_columns[1]);
    CHECK(fit.beta[1] == 0.0);
}

TEST_CASE("fit_cox error cases", "[cox]") {
    SECTION("no events") {
        const auto d = one_feature({1, 2, 3}, {1, 2, 3}, {false, false, false});
        CHECK_THROWS_AS(fit_cox(d), NoEvents);
    }
    SECTION("perfect separation") {
        // Risk increases perfectly with x: the likelihood keeps rising as beta grows.
        const auto d = one_feature({5, 4, 3, 2, 1}, {1, 2, 3, 4, 5}, {true, true, true, true, true});
        CoxOptions o;
        o.ridge = 0.0;
        o.tolerance = 1e-12;
        o.beta_bound = 5.0;
        CHECK_THROWS_AS(fit_cox(d, o), SeparationError);
    }
    SECTION("dimension mismatch") {
        const auto d = one_feature({1, 2}, {1, 2}, {true, true});
        const std::vector<double> beta{1.0, 2.0};
        CHECK_THROWS_AS(partial_log_likelihood(beta, d), DimensionError);
    }
}

TEST_CASE("fit_cox recovers planted coefficients on a large sample", "[cox][datakit]") {
    SynthConfig c;
    c.n = 2000;
    c.p = 2;
    c.true_beta = {1.0, -0.5};
    c.censoring_rate = 0.2;
    c.seed = 21;
    const auto data = generate(c);
    const auto fit = fit_cox(data.data);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.beta[0] - 1.0) <= 0.1);
    CHECK(std::abs(fit.beta[1] + 0.5) <= 0.1);
}

// ---------------------------------------------------------------------------
// Baseline hazard and survival curves
// ---------------------------------------------------------------------------

TEST_CASE("Breslow baseline matches the reference estimator", "[cox][baseline]") {
    std::mt19937_64 rng(16);
    for (int rep = 0; rep < 10; ++rep) {
        const auto data = random_dataset(rng, 25, 2, 0.6, 0.5);
        if (data.n_events() == 0) continue;
        const std::vector<double> beta{0.4, -0.3};
        const auto base = breslow_baseline(beta, data);
        const auto ref = oracle::breslow(beta, data);
        REQUIRE(base.times == ref.times);
        double running = 0.0;
        for (std::size_t k = 0; k < ref.times.size(); ++k) {
            CHECK(base.increments[k] == Approx(ref.increments[k]).epsilon(1e-12));
            running += ref.increments[k];
            CHECK(base.cumulative[k] == Approx(running).epsilon(1e-12));
        }
    }
}

TEST_CASE("Breslow baseline at beta = 0 is the Nelson-Aalen estimator", "[cox][baseline]") {
    const auto d = one_feature({0, 0, 0, 0}, {1, 2, 2, 3}, {true, true, false, true});
    const std::vector<double> beta{0.0};
    const auto base = breslow_baseline(beta, d);
    REQUIRE(base.times == std::vector<double>{1, 2, 3});
    CHECK(base.increments[0] == Approx(1.0 / 4));
    CHECK(base.increments[1] == Approx(1.0 / 3));
    CHECK(base.increments[2] == Approx(1.0));
    CHECK(base.cumulative_at(0.5) == 0.0);
    CHECK(base.cumulative_at(2.5) == Approx(1.0 / 4 + 1.0 / 3));
}

TEST_CASE("hazard_at uses the nearest event time and flags early times", "[cox][baseline]") {
    const auto d = one_feature({0.1, -0.4, 0.3, 0.0, 0.2}, {2, 4, 6, 8, 10}, {true, true, false, true, true});
    const auto model = fit_cox(d);
    const std::vector<double> x{0.5};
    const double scale = std::exp(0.5 * model.beta[0]);

    const auto early = hazard_at(model, 1.0, x);
    CHECK(early.before_first_event);
    CHECK(early.value == 0.0);

    const auto& b = model.baseline;
    CHECK(hazard_at(model, 4.9, x).value == Approx(b.increments[1] * scale));   // nearest 4
    CHECK(hazard_at(model, 6.0, x).value == Approx(b.increments[1] * scale));   // 4 and 8 equidistant: earlier
    CHECK(hazard_at(model, 7.1, x).value == Approx(b.increments[2] * scale));   // nearest 8
    CHECK(hazard_at(model, 50.0, x).value == Approx(b.increments[3] * scale));  // beyond the last
}

TEST_CASE("survival_function is a non-increasing step function from 1", "[cox][baseline]") {
    std::mt19937_64 rng(17);
    const auto data = random_dataset(rng, 40, 2, 0.7);
    const auto model = fit_cox(data);
    const std::vector<double> x{0.3, -1.0};
    const auto s = survival_function(model, x);
    CHECK(s(0.0) == 1.0);
    double prev = 1.0;
    for (double t = 0.0; t < 12.0; t += 0.25) {
        const double v = s(t);
        CHECK(v <= prev);
        CHECK(v >= 0.0);
        CHECK(v == Approx(std::exp(-model.baseline.cumulative_at(t) * std::exp(linear_predictor(x, model.beta)))));
        prev = v;
    }
}

// ---------------------------------------------------------------------------
// Concordance
// ---------------------------------------------------------------------------

TEST_CASE("concordance_index equals pair enumeration", "[cindex]") {
    std::mt19937_64 rng(18);
    std::uniform_int_distribution<int> size(2, 50);
    std::uniform_int_distribution<int> coarse(0, 4);
    std::normal_distribution<double> normal;
    int checked = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const auto data = random_dataset(rng, static_cast<std::size_t>(size(rng)), 1, 0.6, 0.5);
        std::vector<double> scores;
        for (std::size_t i = 0; i < data.size(); ++i) scores.push_back(rep % 2 ? coarse(rng) : normal(rng));
        const auto times = data.times();
        const auto events = data.events();
        const auto ref = oracle::brute_force_pairs(scores, times, events);
        if (ref.comparable == 0) {
            CHECK_THROWS_AS(concordance_index(scores, times, events), NoComparablePairs);
            continue;
        }
        const auto c = concordance_index(scores, times, events);
        CHECK(static_cast<double>(c.comparable) == ref.comparable);
        CHECK(static_cast<double>(c.concordant) == ref.concordant);
        CHECK(static_cast<double>(c.ties) == ref.tied);
        CHECK(c.c_index == ref.c_index());
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("concordance_index small worked examples", "[cindex]") {
    const std::vector<double> times{1, 2, 3, 4};
    const std::vector<bool> all_events{true, true, true, true};
    const std::vector<double> perfect{4, 3, 2, 1};
    CHECK(concordance_index(perfect, times, all_events).c_index == 1.0);
    const std::vector<double> reversed{1, 2, 3, 4};
    CHECK(concordance_index(reversed, times, all_events).c_index == 0.0);
    const std::vector<double> flat{1, 1, 1, 1};
    CHECK(concordance_index(flat, times, all_events).c_index == 0.5);

    // Equal times are never comparable; censored subjects only serve as the later member.
    const std::vector<double> t2{2, 2, 3};
    const std::vector<bool> e2{true, true, false};
    const std::vector<double> s2{1, 0, 0.5};
    const auto c = concordance_index(s2, t2, e2);
    CHECK(c.comparable == 2);
    CHECK(c.concordant == 1);
}

TEST_CASE("concordance_index invariances", "[cindex]") {
    std::mt19937_64 rng(19);
    std::normal_distribution<double> normal;
    for (int rep = 0; rep < 50; ++rep) {
        const auto data = random_dataset(rng, 30, 1, 0.6, 0.3);
        std::vector<double> s, mono, neg;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double v = std::round(normal(rng) * 3.0) / 3.0;
            s.push_back(v);
            mono.push_back(std::exp(2.0 * v) + 7.0);
            neg.push_back(-v);
        }
        const auto a = concordance_index(s, data);
        const auto b = concordance_index(mono, data);
        const auto c = concordance_index(neg, data);
        CHECK(a.c_index == b.c_index);
        CHECK(c.concordant == a.comparable - a.concordant - a.ties);
        CHECK(c.ties == a.ties);
    }
}

TEST_CASE("concordance_index rejects mismatched lengths", "[cindex]") {
    const std::vector<double> s{1, 2}, t{1, 2, 3};
    const std::vector<bool> e{true, true, true};
    CHECK_THROWS_AS(concordance_index(s, t, e), DimensionError);
}
