#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gpode {

/// Precondition or argument-contract failure.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A Gram (or joint covariance) matrix could not be factorized even after
/// jitter escalation.
class IllConditionedModel : public std::runtime_error {
public:
    IllConditionedModel(const std::string& what, double condition_estimate)
        : std::runtime_error(what + " (condition estimate " +
                             std::to_string(condition_estimate) + ")"),
          condition_estimate(condition_estimate) {}

    double condition_estimate;
};

/// The ODE right-hand side failed to evaluate (singular metric, NaN, ...).
class RhsEvaluationError : public std::runtime_error {
public:
    RhsEvaluationError(const std::string& what, double t)
        : std::runtime_error(what + " at t=" + std::to_string(t)), t(t) {}

    double t;
};

/// Log map requested between (numerically) coincident points, or too many
/// sampled geodesics had vanishing initial velocity.
class DegenerateGeodesic : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Hyperparameter search found no finite evidence value.
class OptimizationFailed : public std::runtime_error {
public:
    OptimizationFailed(const std::string& what,
                       std::vector<std::pair<double, double>> trace)
        : std::runtime_error(what), trace(std::move(trace)) {}

    std::vector<std::pair<double, double>> trace;  // (lambda_sq, log evidence)
};

/// Classical reference solver did not converge; tests must skip, not pass.
class OracleFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gpode
