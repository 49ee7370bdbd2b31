#include "dasa/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "dasa/errors.hpp"

namespace dasa {
namespace {

// Records sorted by decreasing time, grouped into blocks of equal time, so a
// single backward sweep accumulates each risk set {j : t_j >= t_i}.
class RiskSetSweep {
public:
    explicit RiskSetSweep(const Dataset& data) : n_(data.size()), p_(data.n_features()) {
        std::vector<std::size_t> order(n_);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return data[a].time > data[b].time; });
        x_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(p_));
        time_.resize(n_);
        event_.resize(n_);
        for (std::size_t r = 0; r < n_; ++r) {
            const auto& rec = data[order[r]];
            for (std::size_t k = 0; k < p_; ++k) {
                x_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rec.covariates[k];
            }
            time_[r] = rec.time;
            event_[r] = rec.event;
        }
        for (std::size_t r = 0; r < n_;) {
            std::size_t end = r + 1;
            while (end < n_ && time_[end] == time_[r]) ++end;
            blocks_.push_back({r, end});
            r = end;
        }
    }

    const Eigen::MatrixXd& x() const { return x_; }

    PartialLikelihood evaluate(const Eigen::VectorXd& beta, bool with_hessian) const {
        const auto p = static_cast<Eigen::Index>(p_);
        Eigen::VectorXd eta = x_ * beta;
        const double shift = n_ > 0 ? eta.maxCoeff() : 0.0;

        PartialLikelihood out;
        out.gradient = Eigen::VectorXd::Zero(p);
        if (with_hessian) out.hessian = Eigen::MatrixXd::Zero(p, p);

        double s0 = 0.0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd s2;
        if (with_hessian) s2 = Eigen::MatrixXd::Zero(p, p);

        for (const auto& [begin, end] : blocks_) {
            for (std::size_t r = begin; r < end; ++r) {
                const auto row = static_cast<Eigen::Index>(r);
                const double w = std::exp(eta(row) - shift);
                s0 += w;
                s1.noalias() += w * x_.row(row).transpose();
                if (with_hessian) s2.noalias() += w * x_.row(row).transpose() * x_.row(row);
            }
            Eigen::VectorXd mean;
            bool have_events = false;
            for (std::size_t r = begin; r < end; ++r) {
                if (!event_[r]) continue;
                const auto row = static_cast<Eigen::Index>(r);
                if (!have_events) {
                    mean = s1 / s0;
                    have_events = true;
                }
                out.value += eta(row) - (std::log(s0) + shift);
                out.gradient.noalias() += x_.row(row).transpose() - mean;
                if (with_hessian) out.hessian.noalias() -= s2 / s0 - mean * mean.transpose();
            }
        }
        return out;
    }

private:
    struct Block {
        std::size_t begin, end;
    };
    std::size_t n_, p_;
    Eigen::MatrixXd x_;
    std::vector<double> time_;
    std::vector<bool> event_;
    std::vector<Block> blocks_;
};

void require_events(const Dataset& data) {
    if (data.n_events() == 0) throw NoEvents();
}

void require_dimension(std::span<const double> beta, const Dataset& data) {
    if (beta.size() != data.n_features()) {
        throw DimensionError("beta has length " + std::to_string(beta.size()) + ", dataset has " +
                             std::to_string(data.n_features()) + " features");
    }
}

Eigen::VectorXd to_eigen(std::span<const double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

}  // namespace

double BaselineHazard::cumulative_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumulative[static_cast<std::size_t>(it - times.begin()) - 1];
}

double partial_log_likelihood(std::span<const double> beta, const Dataset& data) {
    require_events(data);
    require_dimension(beta, data);
    return RiskSetSweep(data).evaluate(to_eigen(beta), false).value;
}

PartialLikelihood partial_log_likelihood_derivatives(std::span<const double> beta, const Dataset& data) {
    require_events(data);
    require_dimension(beta, data);
    return RiskSetSweep(data).evaluate(to_eigen(beta), true);
}

CoxModel fit_cox(const Dataset& data, const CoxOptions& options, std::span<const double> initial_beta) {
    require_events(data);
    const std::size_t p = data.n_features();
    if (!initial_beta.empty()) require_dimension(initial_beta, data);

    const RiskSetSweep sweep(data);
    const Eigen::MatrixXd& x = sweep.x();

    CoxModel model;
    model.constant_columns.assign(p, false);
    std::vector<Eigen::Index> active;
    for (std::size_t k = 0; k < p; ++k) {
        const auto col = x.col(static_cast<Eigen::Index>(k));
        const double mean = col.mean();
        const double var = x.rows() > 0 ? (col.array() - mean).square().mean() : 0.0;
        if (var < 1e-12) {
            model.constant_columns[k] = true;
        } else {
            active.push_back(static_cast<Eigen::Index>(k));
        }
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    if (!initial_beta.empty()) {
        for (Eigen::Index k : active) beta(k) = initial_beta[static_cast<std::size_t>(k)];
    }
    const auto m = static_cast<Eigen::Index>(active.size());

    // Penalised objective restricted to the active coordinates.
    struct Objective {
        double value;
        Eigen::VectorXd gradient;
        Eigen::MatrixXd hessian;
        double log_pl;
    };
    auto evaluate = [&](const Eigen::VectorXd& b, bool with_hessian) {
        PartialLikelihood pl = sweep.evaluate(b, with_hessian);
        Objective obj;
        obj.log_pl = pl.value;
        obj.value = pl.value - 0.5 * options.ridge * b.squaredNorm();
        obj.gradient.resize(m);
        for (Eigen::Index a = 0; a < m; ++a) {
            obj.gradient(a) = pl.gradient(active[static_cast<std::size_t>(a)]) -
                              options.ridge * b(active[static_cast<std::size_t>(a)]);
        }
        if (with_hessian) {
            obj.hessian.resize(m, m);
            for (Eigen::Index a = 0; a < m; ++a) {
                for (Eigen::Index c = 0; c < m; ++c) {
                    obj.hessian(a, c) =
                        pl.hessian(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(c)]);
                }
                obj.hessian(a, a) -= options.ridge;
            }
        }
        return obj;
    };

    Objective current = evaluate(beta, true);
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        if (m == 0 || current.gradient.norm() <= options.tolerance) {
            model.converged = true;
            break;
        }
        // Newton direction on the negated (positive definite) Hessian.
        Eigen::VectorXd direction;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-current.hessian);
        bool newton_ok = ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-12;
        if (newton_ok) {
            direction = ldlt.solve(current.gradient);
            newton_ok = direction.allFinite() && direction.dot(current.gradient) > 0.0;
        }
        if (!newton_ok) direction = current.gradient;

        double step = 1.0;
        bool improved = false;
        Eigen::VectorXd candidate = beta;
        Objective next;
        for (int halving = 0; halving < 60; ++halving) {
            candidate = beta;
            for (Eigen::Index a = 0; a < m; ++a) {
                candidate(active[static_cast<std::size_t>(a)]) += step * direction(a);
            }
            next = evaluate(candidate, true);
            // Near the optimum the gain drops below the rounding error of the
            // objective; a smaller gradient then decides.
            const bool flat = std::abs(next.value - current.value) <= 1e-12 * (1.0 + std::abs(current.value));
            if (std::isfinite(next.value) &&
                (next.value > current.value || (flat && next.gradient.norm() < current.gradient.norm()))) {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;  // stalled: no ascent step exists at machine precision

        beta = candidate;
        current = std::move(next);
        if (beta.cwiseAbs().maxCoeff() > options.beta_bound) {
            throw SeparationError("coefficient exceeded " + std::to_string(options.beta_bound) +
                                  " in magnitude: partial likelihood is monotone (separated data)");
        }
    }
    if (!model.converged && (m == 0 || current.gradient.norm() <= options.tolerance)) model.converged = true;

    model.beta.assign(beta.data(), beta.data() + beta.size());
    model.iterations = iter;
    model.log_partial_likelihood = current.log_pl;
    model.gradient_norm = m == 0 ? 0.0 : current.gradient.norm();
    if (options.compute_baseline) model.baseline = breslow_baseline(model.beta, data);
    return model;
}

BaselineHazard breslow_baseline(std::span<const double> beta, const Dataset& data) {
    require_events(data);
    require_dimension(beta, data);

    const std::size_t n = data.size();
    std::vector<double> eta(n);
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        eta[i] = linear_predictor(data[i].covariates, beta);
        shift = std::max(shift, eta[i]);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data[a].time > data[b].time; });

    // Backward sweep collects (time, deaths, risk-set weight); reversed at the end.
    BaselineHazard h;
    double risk = 0.0;
    for (std::size_t r = 0; r < n;) {
        const double t = data[order[r]].time;
        std::size_t end = r;
        int deaths = 0;
        while (end < n && data[order[end]].time == t) {
            risk += std::exp(eta[order[end]] - shift);
            if (data[order[end]].event) ++deaths;
            ++end;
        }
        if (deaths > 0) {
            h.times.push_back(t);
            h.increments.push_back(static_cast<double>(deaths) / risk * std::exp(-shift));
        }
        r = end;
    }
    std::reverse(h.times.begin(), h.times.end());
    std::reverse(h.increments.begin(), h.increments.end());
    h.cumulative.resize(h.increments.size());
    std::partial_sum(h.increments.begin(), h.increments.end(), h.cumulative.begin());
    return h;
}

HazardValue hazard_at(const CoxModel& model, double t, std::span<const double> x) {
    const auto& times = model.baseline.times;
    if (times.empty() || t < times.front()) return {0.0, true};
    auto it = std::lower_bound(times.begin(), times.end(), t);
    std::size_t k;
    if (it == times.end()) {
        k = times.size() - 1;
    } else {
        k = static_cast<std::size_t>(it - times.begin());
        if (k > 0 && t - times[k - 1] <= times[k] - t) --k;
    }
    return {model.baseline.increments[k] * std::exp(linear_predictor(x, model.beta)), false};
}

double StepFunction::operator()(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return initial;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

StepFunction survival_function(const CoxModel& model, std::span<const double> x) {
    const double relative_risk = std::exp(linear_predictor(x, model.beta));
    StepFunction s;
    s.times = model.baseline.times;
    s.values.reserve(s.times.size());
    for (double cum : model.baseline.cumulative) s.values.push_back(std::exp(-cum * relative_risk));
    return s;
}

}  // namespace dasa
