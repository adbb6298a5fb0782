#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gpode/metric_manifold.hpp"
#include "gpode/prob_ode.hpp"

namespace gpode {

/// Configuration shared by the statistics operations. sample_cov plays the
/// role of the dataset covariance S_x in the empirical-Bayes output scale; if
/// left empty it is taken from the data (data operations) or the identity
/// (standalone map evaluations).
struct StatsConfig {
    SolverConfig solver;
    Eigen::MatrixXd sample_cov;
    int n_samples = 100;
    int quad_points = 101;
};

/// Sampled mean and covariance of log-map vectors in a tangent space.
struct TangentStatistic {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    int n_samples = 0;
};

/// Karcher-mean iteration history.
struct MeanTrace {
    std::vector<EndpointDist> iterates;  // mu_0 .. mu_K distributions
    std::vector<double> step_norms;      // ||v_bar|| per iteration
    double step_size = 0.0;
    bool converged = false;
};

/// Two IVP halves of the first principal geodesic (forward along +v, backward
/// along -v).
struct PrincipalGeodesic {
    CurveBelief forward;
    CurveBelief backward;
};

struct PgaResult {
    EndpointDist mean;
    Eigen::MatrixXd directions;    // columns, descending eigenvalue order
    Eigen::VectorXd eigenvalues;
    std::vector<Eigen::MatrixXd> direction_covs;  // bootstrap, per direction
    std::vector<int> degenerate_directions;       // zero-eigenvalue columns
    std::optional<PrincipalGeodesic> principal;   // first principal geodesic
};

/// Joint draws of curve values and derivatives on a common grid.
struct SampledCurves {
    std::vector<double> ts;
    std::vector<Eigen::MatrixXd> values;  // per sample, n_t x D
    std::vector<Eigen::MatrixXd> derivs;  // per sample, n_t x D
};

SampledCurves sample_curves(const CurveBelief& belief, const std::vector<double>& ts,
                            int count, std::uint64_t seed);

/// Riemannian length of each sampled curve by composite trapezoidal
/// quadrature of ||c'||_M(c) on the sample grid.
std::vector<double> curve_length(const SampledCurves& samples,
                                 const MetricField& field);

/// Exponential map: IVP solve from a with initial velocity v; returns the
/// marginal distribution of c(1) and the full curve belief.
std::pair<EndpointDist, CurveBelief> exp_map(const EndpointDist& a,
                                             const EndpointDist& v,
                                             const MetricField& field,
                                             const StatsConfig& cfg);

/// Logarithm map statistic estimated from joint posterior samples of the
/// connecting geodesic: each sample contributes c'(0)/||c'(0)|| * Length(c).
TangentStatistic log_map(const EndpointDist& a, const EndpointDist& b,
                         const MetricField& field, const StatsConfig& cfg,
                         int n_samples, std::uint64_t seed);

/// log_map plus the per-sample tangent vectors (rows), for consumers that
/// need the sampling distribution itself.
std::pair<TangentStatistic, Eigen::MatrixXd> log_map_samples(
    const EndpointDist& a, const EndpointDist& b, const MetricField& field,
    const StatsConfig& cfg, int n_samples, std::uint64_t seed);

/// Uncertainty-tracking Karcher mean by tangent-space gradient descent.
MeanTrace karcher_mean(const Eigen::MatrixXd& data, const MetricField& field,
                       double alpha, int iters, const StatsConfig& cfg,
                       std::uint64_t seed);

/// Principal geodesic analysis in the tangent space at `mean`.
PgaResult pga(const Eigen::MatrixXd& data, const EndpointDist& mean,
              const MetricField& field, const StatsConfig& cfg, std::uint64_t seed);

/// Default rhs/bounds wiring for a metric field (geodesic equation, finite
/// difference Jacobian bounds with the config's safety factor).
OdeRhs field_rhs(const MetricField& field);
BoundsProvider field_bounds(const MetricField& field, double safety);

}  // namespace gpode
