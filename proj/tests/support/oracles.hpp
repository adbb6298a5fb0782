#pragma once

// Independent test oracles. Everything here conditions, differentiates or
// integrates by a different route than the library code it checks.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "gpode/gp_core.hpp"
#include "gpode/se_kernel.hpp"

namespace oracle {

/// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Central second difference.
inline double central_diff2(const std::function<double(double)>& f, double x,
                            double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

/// The plain (0,0) squared-exponential kernel, written out independently.
inline double k_plain(double t1, double t2, double lambda_sq) {
    const double u = t1 - t2;
    return std::exp(-0.5 * u * u / lambda_sq);
}

/// One central-difference step raising a kernel-entry order by one, in t1 or
/// t2. Chaining these from the plain kernel grounds every derivative order in
/// the (0,0) base while keeping a single O(h^2) difference per step (a deep
/// nested stencil with h = 1e-5 would be pure roundoff).
inline double kernel_fd_step(
    const std::function<double(double, double)>& lower, double t1, double t2,
    bool in_t1, double h = 1e-5) {
    if (in_t1) return (lower(t1 + h, t2) - lower(t1 - h, t2)) / (2.0 * h);
    return (lower(t1, t2 + h) - lower(t1, t2 - h)) / (2.0 * h);
}

/// Dense joint-Gaussian conditioning by Schur complement: builds the full
/// joint covariance over observations + queries and conditions directly.
/// Independent of CurveBelief's cached-factorization path.
struct DenseConditioning {
    Eigen::VectorXd mean;  // stacked posterior mean over queries
    Eigen::MatrixXd cov;   // stacked posterior covariance over queries
};

inline DenseConditioning schur_condition(
    const gpode::ObservationSet& obs, const gpode::AffineMean& mean_fn,
    const gpode::LengthScale& ls, const gpode::OutputCov& out_cov,
    const std::vector<gpode::Functional>& queries, double jitter_abs = 0.0) {
    const int d = out_cov.dim();
    const int q = obs.count();
    const int m = static_cast<int>(queries.size());

    std::vector<gpode::Functional> all = obs.functionals();
    all.insert(all.end(), queries.begin(), queries.end());
    const int total = q + m;

    Eigen::MatrixXd joint(total * d, total * d);
    for (int i = 0; i < total; ++i) {
        for (int j = 0; j < total; ++j) {
            const double k = gpode::k_eval(all[i].t, all[j].t, ls,
                                           {all[i].order, all[j].order});
            joint.block(i * d, j * d, d, d) = k * out_cov.cov;
        }
    }
    for (int i = 0; i < q; ++i) {
        joint.block(i * d, i * d, d, d) += obs.noise_blocks()[i];
    }
    joint.diagonal().head(q * d).array() += jitter_abs;

    const Eigen::MatrixXd a = joint.topLeftCorner(q * d, q * d);
    const Eigen::MatrixXd b = joint.topRightCorner(q * d, m * d);
    const Eigen::MatrixXd c = joint.bottomRightCorner(m * d, m * d);

    Eigen::VectorXd prior_obs(q * d), prior_query(m * d);
    for (int i = 0; i < q; ++i) {
        prior_obs.segment(i * d, d) =
            mean_fn.at(obs.functionals()[i].t, obs.functionals()[i].order);
    }
    for (int i = 0; i < m; ++i) {
        prior_query.segment(i * d, d) = mean_fn.at(queries[i].t, queries[i].order);
    }

    const Eigen::MatrixXd a_inv_b = a.fullPivLu().solve(b);
    DenseConditioning out;
    out.mean = prior_query + a_inv_b.transpose() * (obs.values() - prior_obs);
    out.cov = c - b.transpose() * a.fullPivLu().solve(b);
    return out;
}

/// Dense multivariate normal log density, evaluated through an
/// eigendecomposition rather than a Cholesky solve.
inline double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd vals = eig.eigenvalues();
    const Eigen::VectorXd proj = eig.eigenvectors().transpose() * (x - mean);
    double quad = 0.0, log_det = 0.0;
    for (int i = 0; i < vals.size(); ++i) {
        quad += proj[i] * proj[i] / vals[i];
        log_det += std::log(vals[i]);
    }
    return -0.5 * (quad + log_det + x.size() * std::log(2.0 * M_PI));
}

}  // namespace oracle
