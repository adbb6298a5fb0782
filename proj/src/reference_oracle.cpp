#include "gpode/reference_oracle.hpp"

#include <cmath>

namespace gpode {

OracleSolution rk4_ivp(const OdeRhs& rhs, const Eigen::VectorXd& start,
                       const Eigen::VectorXd& velocity, int steps) {
    if (steps < 1) throw ContractViolation("rk4_ivp: steps must be >= 1");
    const double h = 1.0 / steps;

    OracleSolution sol;
    sol.times.reserve(steps + 1);
    sol.values.reserve(steps + 1);
    sol.derivs.reserve(steps + 1);

    Eigen::VectorXd c = start, v = velocity;
    sol.times.push_back(0.0);
    sol.values.push_back(c);
    sol.derivs.push_back(v);

    for (int i = 0; i < steps; ++i) {
        const Eigen::VectorXd k1c = v;
        const Eigen::VectorXd k1v = rhs(c, v);
        const Eigen::VectorXd k2c = v + 0.5 * h * k1v;
        const Eigen::VectorXd k2v = rhs(c + 0.5 * h * k1c, v + 0.5 * h * k1v);
        const Eigen::VectorXd k3c = v + 0.5 * h * k2v;
        const Eigen::VectorXd k3v = rhs(c + 0.5 * h * k2c, v + 0.5 * h * k2v);
        const Eigen::VectorXd k4c = v + h * k3v;
        const Eigen::VectorXd k4v = rhs(c + h * k3c, v + h * k3v);

        c += (h / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
        v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        sol.times.push_back((i + 1) * h);
        sol.values.push_back(c);
        sol.derivs.push_back(v);
    }
    return sol;
}

OracleSolution shooting_bvp(const OdeRhs& rhs, const Eigen::VectorXd& start,
                            const Eigen::VectorXd& target, int steps, double tol,
                            int max_iters) {
    if (!(tol > 0.0)) throw ContractViolation("shooting_bvp: tol must be positive");
    const int d = static_cast<int>(start.size());
    const double accept = tol * (1.0 + (target - start).norm());

    Eigen::VectorXd v = target - start;
    OracleSolution sol = rk4_ivp(rhs, start, v, steps);
    Eigen::VectorXd residual = sol.values.back() - target;

    for (int iter = 0; iter < max_iters; ++iter) {
        if (residual.norm() < accept) {
            sol.shooting_iters = iter;
            return sol;
        }
        // finite-difference Jacobian of the endpoint w.r.t. initial velocity
        Eigen::MatrixXd jac(d, d);
        const double h = 1e-6 * (1.0 + v.norm());
        for (int i = 0; i < d; ++i) {
            Eigen::VectorXd vp = v;
            vp[i] += h;
            jac.col(i) =
                (rk4_ivp(rhs, start, vp, steps).values.back() - sol.values.back()) / h;
        }
        Eigen::VectorXd step = jac.fullPivLu().solve(-residual);
        if (!step.allFinite()) {
            throw OracleFailure("shooting Jacobian solve produced non-finite step");
        }

        double damping = 1.0;
        bool improved = false;
        for (int halving = 0; halving <= 8; ++halving) {
            const Eigen::VectorXd v_try = v + damping * step;
            OracleSolution sol_try = rk4_ivp(rhs, start, v_try, steps);
            const Eigen::VectorXd res_try = sol_try.values.back() - target;
            if (res_try.norm() < residual.norm()) {
                v = v_try;
                sol = std::move(sol_try);
                residual = res_try;
                improved = true;
                break;
            }
            damping *= 0.5;
        }
        if (!improved) {
            throw OracleFailure("shooting stalled: damped steps did not reduce residual");
        }
    }
    if (residual.norm() < accept) {
        sol.shooting_iters = max_iters;
        return sol;
    }
    throw OracleFailure("shooting did not converge within max_iters");
}

double oracle_length(const OracleSolution& sol, const MetricField& field) {
    if (sol.times.size() < 2) return 0.0;
    double length = 0.0;
    double prev = std::sqrt(std::max(
        0.0, sol.derivs[0].dot(metric(field, sol.values[0]) * sol.derivs[0])));
    for (std::size_t i = 1; i < sol.times.size(); ++i) {
        const double cur = std::sqrt(std::max(
            0.0, sol.derivs[i].dot(metric(field, sol.values[i]) * sol.derivs[i])));
        length += 0.5 * (prev + cur) * (sol.times[i] - sol.times[i - 1]);
        prev = cur;
    }
    return length;
}

}  // namespace gpode
