#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gpode/errors.hpp"
#include "gpode/ode_callbacks.hpp"

namespace gpode {

/// One local metric tensor anchored at a center point.
struct LocalMetric {
    Eigen::VectorXd center;
    Eigen::MatrixXd tensor;
};

/// Smoothly varying Riemannian metric: a softmax-weighted combination of
/// local PSD tensors, M(x) = sum_r w_r(x) M_r with
/// w~_r(x) = exp(-rho/2 (x-mu_r)^T M_r (x-mu_r)).
struct MetricField {
    std::vector<LocalMetric> components;
    double rho = 1.0;

    int dim() const {
        return components.empty() ? 0 : static_cast<int>(components[0].center.size());
    }
    void validate() const;
};

/// Normalized component weights at x; computed with a log-sum-exp shift, sum
/// to one.
Eigen::VectorXd weights(const MetricField& field, const Eigen::VectorXd& x);

/// Metric tensor M(x).
Eigen::MatrixXd metric(const MetricField& field, const Eigen::VectorXd& x);

/// Spatial derivative d vec(M) / dx as a D^2 x D matrix; vec stacks M row by
/// row.
Eigen::MatrixXd metric_grad(const MetricField& field, const Eigen::VectorXd& x);

/// Geodesic equation right-hand side
/// c'' = -1/2 M(c)^{-1} [d vec(M)/dc]^T (c' (x) c').
Eigen::VectorXd geodesic_rhs(const MetricField& field, const Eigen::VectorXd& c,
                             const Eigen::VectorXd& c_prime);

/// Central finite-difference Jacobians of the geodesic rhs w.r.t. c and c'.
/// Returned in math orientation: row j, column i holds df_j/d(input_i).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> rhs_jacobians(
    const MetricField& field, const Eigen::VectorXd& c,
    const Eigen::VectorXd& c_prime, double base_step = 1e-5);

/// Elementwise max of |Jacobian| over the curve sketch, times safety,
/// transposed to the input-dim x output-dim orientation the error-covariance
/// formula uses.
JacobianBounds estimate_bounds(const MetricField& field,
                               const std::vector<CurvePoint>& curve_points,
                               double safety);

struct FitOptions {
    bool diagonal = false;      // restrict covariances to diagonals
    double rho_override = 0.0;  // <= 0 means choose automatically
    double covariance_reg = 1e-6;
};

/// Fits R local metrics to data by full-covariance Gaussian-mixture EM
/// (k-means++ style seeding); tensors are the inverse component covariances.
MetricField fit_local_metrics(const Eigen::MatrixXd& data, int n_components,
                              int iters, std::uint64_t seed,
                              const FitOptions& options = {});

}  // namespace gpode
