#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gpode/errors.hpp"
#include "gpode/metric_manifold.hpp"
#include "gpode/ode_callbacks.hpp"

namespace gpode {

/// Deterministic classical solution used as ground truth in tests and the
/// compare command.
struct OracleSolution {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> values;
    std::vector<Eigen::VectorXd> derivs;
    double length = 0.0;  // filled by oracle_length when a metric is known
    int shooting_iters = 0;
};

/// Fixed-step classic RK4 on (c, c')' = (c', f(c, c')) over [0, 1].
OracleSolution rk4_ivp(const OdeRhs& rhs, const Eigen::VectorXd& start,
                       const Eigen::VectorXd& velocity, int steps);

/// Newton shooting on the initial velocity with damped steps; the returned
/// solution satisfies both boundary conditions to tol or OracleFailure is
/// thrown.
OracleSolution shooting_bvp(const OdeRhs& rhs, const Eigen::VectorXd& start,
                            const Eigen::VectorXd& target, int steps,
                            double tol = 1e-9, int max_iters = 50);

/// Trapezoidal Riemannian length of an oracle solution under a metric field.
double oracle_length(const OracleSolution& sol, const MetricField& field);

}  // namespace gpode
