#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gpode/gp_core.hpp"
#include "gpode/ode_callbacks.hpp"

namespace gpode {

/// Gaussian distribution over a boundary value (curve value or derivative).
struct EndpointDist {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    static EndpointDist exact(const Eigen::VectorXd& mean) {
        return {mean, Eigen::MatrixXd::Zero(mean.size(), mean.size())};
    }
    void validate() const;
};

enum class ProblemKind { Bvp, Ivp };

/// For BVPs `end` is the distribution of c(1); for IVPs it is the
/// distribution of the initial velocity c'(0).
struct ProblemSpec {
    ProblemKind kind = ProblemKind::Bvp;
    EndpointDist start;
    EndpointDist end;

    int dim() const { return static_cast<int>(start.mean.size()); }
    void validate() const;
};

enum class GridKind { Sigmoid, Linear };

struct LambdaSearch {
    enum class Mode { Golden, Newton, Fixed };
    Mode mode = Mode::Golden;
    double fixed_value = 1.0;

    static LambdaSearch golden() { return {Mode::Golden, 1.0}; }
    static LambdaSearch newton() { return {Mode::Newton, 1.0}; }
    static LambdaSearch fixed(double lambda_sq) { return {Mode::Fixed, lambda_sq}; }
};

struct SolverConfig {
    int n_points = 20;
    std::optional<GridKind> grid_kind;  // default: sigmoid for BVP, linear for IVP
    int refine_passes = 2;
    LambdaSearch lambda_search;
    JitterPolicy jitter;
    double bound_safety = 2.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-solve diagnostics.
struct SolveReport {
    std::vector<double> grid;
    double lambda_sq_final = 1.0;
    Eigen::MatrixXd v_used;
    std::vector<Eigen::MatrixXd> error_covs;
    int refine_passes_done = 0;
    std::vector<std::pair<double, double>> evidence_trace;  // (lambda_sq, log ev)
    double wall_seconds = 0.0;
};

/// Representer grid inside (0,1): sigmoid t_i = (1+erf(-1.5+3i/n))/2 or
/// linear t_i = i/(n+1), i = 1..n.
std::vector<double> make_grid(int n, GridKind kind);

/// Empirical-Bayes output covariance V = (d^T S d) S with d the
/// endpoint gap (BVP) or initial velocity (IVP); falls back to S when the
/// quadratic form degenerates.
OutputCov choose_output_cov(const ProblemSpec& spec,
                            const Eigen::MatrixXd& sample_cov);

/// Gaussian process conditioned on the boundary/initial values only, with the
/// matching linear prior mean.
CurveBelief condition_on_endpoints(const ProblemSpec& spec, const LengthScale& ls,
                                   const OutputCov& out_cov,
                                   const JitterPolicy& jitter = {});

/// Error covariance of a constructed second-derivative observation:
/// Lambda = U^T S_cc U + |U'^T S_c'c U| + |U^T S_cc' U'| + U'^T S_c'c' U',
/// symmetrized and clamped to PSD by eigenvalue truncation.
Eigen::MatrixXd error_cov(const Eigen::MatrixXd& sigma_blocks,
                          const Eigen::MatrixXd& bound_value,
                          const Eigen::MatrixXd& bound_velocity);

/// Full probabilistic solve: sequential construction of uncertain
/// second-derivative observations, iterative refinement, hyperparameter
/// selection per cfg.lambda_search.
std::pair<CurveBelief, SolveReport> solve(const ProblemSpec& spec, const OdeRhs& rhs,
                                          const BoundsProvider& bounds_provider,
                                          const SolverConfig& cfg,
                                          const Eigen::MatrixXd& sample_cov);

/// Re-evaluates the rhs at the current posterior mean estimates and replaces
/// observation values; the Gram factorization is shared, never rebuilt.
CurveBelief refine(const CurveBelief& belief, const OdeRhs& rhs, int passes);

/// d/d(lambda^2) and d^2/d(lambda^2)^2 of -2 log p(values | lambda) at fixed
/// observations.
std::pair<double, double> evidence_gradient(const ObservationSet& obs,
                                            const AffineMean& mean_fn,
                                            const LengthScale& ls,
                                            const OutputCov& out_cov,
                                            const JitterPolicy& jitter = {});

/// Maximizes the marginal likelihood over lambda^2. Observations are
/// regenerated by a fresh solve at every candidate.
std::pair<double, std::vector<std::pair<double, double>>> optimize_lambda(
    const ProblemSpec& spec, const OdeRhs& rhs, const BoundsProvider& bounds_provider,
    const SolverConfig& cfg, const Eigen::MatrixXd& sample_cov);

}  // namespace gpode
