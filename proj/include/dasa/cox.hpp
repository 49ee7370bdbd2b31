#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "dasa/dataset.hpp"

namespace dasa {

/// Breslow cumulative baseline hazard, a step function jumping at the distinct
/// observed event times.
struct BaselineHazard {
    std::vector<double> times;       // strictly increasing event times
    std::vector<double> increments;  // hazard mass at each event time
    std::vector<double> cumulative;  // running sum of increments

    /// H0(t): sum of increments at event times <= t.
    double cumulative_at(double t) const;
    bool empty() const noexcept { return times.empty(); }
};

struct CoxOptions {
    double tolerance = 1e-6;  // on the norm of the (ridge-penalised) gradient
    int max_iter = 100;
    double ridge = 1e-6;      // L2 stabiliser; excluded from the reported log PL
    double beta_bound = 30.0; // |beta_k| beyond this is treated as monotone likelihood
    bool compute_baseline = true;
};

struct CoxModel {
    std::vector<double> beta;
    BaselineHazard baseline;
    double log_partial_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    std::vector<bool> constant_columns;  // held at beta = 0, excluded from updates
};

/// Log partial likelihood, gradient and Hessian with Breslow handling of ties.
struct PartialLikelihood {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

double partial_log_likelihood(std::span<const double> beta, const Dataset& data);
PartialLikelihood partial_log_likelihood_derivatives(std::span<const double> beta, const Dataset& data);

/// Maximises the ridge-stabilised log partial likelihood by Newton-Raphson with
/// step halving, falling back to gradient ascent when the Hessian is near
/// singular. `initial_beta` (optional) warm-starts the iteration.
///
/// Throws NoEvents when the data has no events and SeparationError when a
/// coefficient runs past `beta_bound`. Running out of iterations is not an
/// error: the model comes back with converged = false.
CoxModel fit_cox(const Dataset& data, const CoxOptions& options = {},
                 std::span<const double> initial_beta = {});

BaselineHazard breslow_baseline(std::span<const double> beta, const Dataset& data);

struct HazardValue {
    double value = 0.0;
    bool before_first_event = false;
};

/// h(t | x) = h0(t) exp(x . beta), where h0(t) is the Breslow increment at the
/// event time nearest to t. Times before the first event give 0, flagged.
HazardValue hazard_at(const CoxModel& model, double t, std::span<const double> x);

/// Right-continuous step function with value `initial` before the first time.
struct StepFunction {
    std::vector<double> times;
    std::vector<double> values;
    double initial = 1.0;

    double operator()(double t) const;
};

/// S(t | x) = exp(-H0(t) exp(x . beta)).
StepFunction survival_function(const CoxModel& model, std::span<const double> x);

}  // namespace dasa
