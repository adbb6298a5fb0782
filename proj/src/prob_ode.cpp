#include "gpode/prob_ode.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace gpode {

void EndpointDist::validate() const {
    if (mean.size() == 0 || !mean.allFinite()) {
        throw ContractViolation("endpoint mean must be nonempty and finite");
    }
    if (cov.rows() != mean.size() || cov.cols() != mean.size() || !cov.allFinite()) {
        throw ContractViolation("endpoint covariance must be D x D and finite");
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw ContractViolation("endpoint covariance must be symmetric");
    }
}

void ProblemSpec::validate() const {
    start.validate();
    end.validate();
    if (start.mean.size() != end.mean.size()) {
        throw ContractViolation("problem endpoint dimensions disagree");
    }
}

void SolverConfig::validate() const {
    if (n_points < 1) throw ContractViolation("n_points must be >= 1");
    if (refine_passes < 0) throw ContractViolation("refine_passes must be >= 0");
    if (!(bound_safety >= 1.0)) throw ContractViolation("bound_safety must be >= 1");
    if (lambda_search.mode == LambdaSearch::Mode::Fixed) {
        LengthScale{lambda_search.fixed_value}.validate();
    }
}

std::vector<double> make_grid(int n, GridKind kind) {
    if (n < 1) throw ContractViolation("grid size must be >= 1");
    std::vector<double> grid(n);
    for (int i = 1; i <= n; ++i) {
        grid[i - 1] = kind == GridKind::Sigmoid
                          ? 0.5 * (1.0 + std::erf(-1.5 + 3.0 * i / n))
                          : static_cast<double>(i) / (n + 1);
    }
    return grid;
}

OutputCov choose_output_cov(const ProblemSpec& spec,
                            const Eigen::MatrixXd& sample_cov) {
    spec.validate();
    const int d = spec.dim();
    if (sample_cov.rows() != d || sample_cov.cols() != d) {
        throw ContractViolation("sample covariance must be D x D");
    }
    const double sym_scale = std::max(1.0, sample_cov.cwiseAbs().maxCoeff());
    if ((sample_cov - sample_cov.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * sym_scale) {
        throw ContractViolation("sample covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sample_cov);
    if (eig.eigenvalues().minCoeff() < -1e-8 * sym_scale) {
        throw ContractViolation("sample covariance must be positive semidefinite");
    }

    const Eigen::VectorXd gap = spec.kind == ProblemKind::Bvp
                                    ? (spec.start.mean - spec.end.mean).eval()
                                    : spec.end.mean;
    const double quad = gap.dot(sample_cov * gap);
    OutputCov out;
    out.cov = quad < 1e-12 ? sample_cov : (quad * sample_cov).eval();
    return out;
}

namespace {

Eigen::MatrixXd endpoint_noise(const Eigen::MatrixXd& cov) {
    // exact conditions get a hair of noise for conditioning stability
    if (cov.cwiseAbs().maxCoeff() == 0.0) {
        return 1e-10 * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    }
    return cov;
}

AffineMean prior_mean(const ProblemSpec& spec) {
    if (spec.kind == ProblemKind::Bvp) {
        return {spec.start.mean, spec.end.mean - spec.start.mean};
    }
    return {spec.start.mean, spec.end.mean};
}

}  // namespace

CurveBelief condition_on_endpoints(const ProblemSpec& spec, const LengthScale& ls,
                                   const OutputCov& out_cov,
                                   const JitterPolicy& jitter) {
    spec.validate();
    ObservationSet obs(spec.dim());
    obs.append({0.0, 0}, spec.start.mean, endpoint_noise(spec.start.cov));
    if (spec.kind == ProblemKind::Bvp) {
        obs.append({1.0, 0}, spec.end.mean, endpoint_noise(spec.end.cov));
    } else {
        obs.append({0.0, 1}, spec.end.mean, endpoint_noise(spec.end.cov));
    }
    return CurveBelief::build(prior_mean(spec), ls, out_cov, obs, jitter);
}

Eigen::MatrixXd error_cov(const Eigen::MatrixXd& sigma_blocks,
                          const Eigen::MatrixXd& bound_value,
                          const Eigen::MatrixXd& bound_velocity) {
    const int d = static_cast<int>(bound_value.rows());
    if (sigma_blocks.rows() != 2 * d || sigma_blocks.cols() != 2 * d) {
        throw ContractViolation("sigma blocks must be 2D x 2D");
    }
    if ((bound_value.array() < 0.0).any() || (bound_velocity.array() < 0.0).any()) {
        throw ContractViolation("Jacobian bounds must be elementwise nonnegative");
    }
    const Eigen::MatrixXd s_cc = sigma_blocks.topLeftCorner(d, d);
    const Eigen::MatrixXd s_cv = sigma_blocks.topRightCorner(d, d);
    const Eigen::MatrixXd s_vc = sigma_blocks.bottomLeftCorner(d, d);
    const Eigen::MatrixXd s_vv = sigma_blocks.bottomRightCorner(d, d);

    Eigen::MatrixXd lambda =
        bound_value.transpose() * s_cc * bound_value +
        (bound_velocity.transpose() * s_vc * bound_value).cwiseAbs() +
        (bound_value.transpose() * s_cv * bound_velocity).cwiseAbs() +
        bound_velocity.transpose() * s_vv * bound_velocity;
    lambda = 0.5 * (lambda + lambda.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lambda);
    const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

struct SequentialResult {
    CurveBelief belief;
    std::vector<Eigen::MatrixXd> error_covs;
};

Eigen::VectorXd eval_rhs(const OdeRhs& rhs, const Eigen::VectorXd& c,
                         const Eigen::VectorXd& cp, double t) {
    Eigen::VectorXd y;
    try {
        y = rhs(c, cp);
    } catch (const RhsEvaluationError& e) {
        throw RhsEvaluationError(e.what(), t);
    }
    if (y.size() != c.size() || !y.allFinite()) {
        throw RhsEvaluationError("rhs returned invalid value", t);
    }
    return y;
}

/// One full sequential construction of the observation set at a given length
/// scale (Y and Lambda regenerated from scratch).
SequentialResult sequential_solve(const ProblemSpec& spec, const OdeRhs& rhs,
                                  const JacobianBounds& bounds,
                                  const std::vector<double>& grid,
                                  const LengthScale& ls, const OutputCov& out_cov,
                                  const JitterPolicy& jitter) {
    CurveBelief belief = condition_on_endpoints(spec, ls, out_cov, jitter);
    std::vector<Eigen::MatrixXd> error_covs;
    error_covs.reserve(grid.size());

    const int d = spec.dim();
    for (double t : grid) {
        const auto [moments_mean, sigma] = belief.joint_moments({{t, 0}, {t, 1}});
        const Eigen::VectorXd c_hat = moments_mean.head(d);
        const Eigen::VectorXd cp_hat = moments_mean.tail(d);
        const Eigen::VectorXd y = eval_rhs(rhs, c_hat, cp_hat, t);
        const Eigen::MatrixXd lambda = error_cov(sigma, bounds.value, bounds.velocity);
        error_covs.push_back(lambda);
        belief = belief.extended({t, 2}, y, lambda, jitter);
    }
    return {std::move(belief), std::move(error_covs)};
}

GridKind resolve_grid_kind(const ProblemSpec& spec, const SolverConfig& cfg) {
    if (cfg.grid_kind) return *cfg.grid_kind;
    return spec.kind == ProblemKind::Bvp ? GridKind::Sigmoid : GridKind::Linear;
}

JacobianBounds prior_bounds(const ProblemSpec& spec, const BoundsProvider& provider,
                            const std::vector<double>& grid, const OutputCov& out_cov,
                            const SolverConfig& cfg) {
    // bounds are taken along the endpoint-conditioned prior's mean curve
    const CurveBelief prior =
        condition_on_endpoints(spec, LengthScale{1.0}, out_cov, cfg.jitter);
    std::vector<CurvePoint> points;
    points.reserve(grid.size());
    for (double t : grid) {
        points.push_back({prior.mean({t, 0}), prior.mean({t, 1})});
    }
    JacobianBounds bounds = provider(points);
    const int d = spec.dim();
    if (bounds.value.rows() != d || bounds.value.cols() != d ||
        bounds.velocity.rows() != d || bounds.velocity.cols() != d) {
        throw ContractViolation("bounds provider returned wrong dimensions");
    }
    return bounds;
}

double evidence_of(const CurveBelief& belief) { return belief.log_marginal(); }

}  // namespace

CurveBelief refine(const CurveBelief& belief, const OdeRhs& rhs, int passes) {
    if (passes < 0) throw ContractViolation("refine passes must be >= 0");
    const int d = belief.dim();
    CurveBelief current = belief;
    for (int pass = 0; pass < passes; ++pass) {
        const auto& fs = current.observations().functionals();
        Eigen::VectorXd values = current.observations().values();
        for (int i = 0; i < static_cast<int>(fs.size()); ++i) {
            if (fs[i].order != 2) continue;
            const Eigen::VectorXd c_hat = current.mean({fs[i].t, 0});
            const Eigen::VectorXd cp_hat = current.mean({fs[i].t, 1});
            values.segment(i * d, d) = eval_rhs(rhs, c_hat, cp_hat, fs[i].t);
        }
        current = current.with_values(values);
    }
    return current;
}

std::pair<double, double> evidence_gradient(const ObservationSet& obs,
                                            const AffineMean& mean_fn,
                                            const LengthScale& ls,
                                            const OutputCov& out_cov,
                                            const JitterPolicy& jitter) {
    const CurveBelief belief = CurveBelief::build(mean_fn, ls, out_cov, obs, jitter);
    const int d = out_cov.dim();
    Eigen::VectorXd resid = obs.values();
    for (int i = 0; i < obs.count(); ++i) {
        resid.segment(i * d, d) -=
            mean_fn.at(obs.functionals()[i].t, obs.functionals()[i].order);
    }
    const Eigen::VectorXd alpha = belief.solve_gram(resid);
    const Eigen::MatrixXd d_gram = gram_dlambda2(obs.functionals(), ls, out_cov, 1);
    const Eigen::MatrixXd d2_gram = gram_dlambda2(obs.functionals(), ls, out_cov, 2);

    const Eigen::MatrixXd gram_inv_d = belief.solve_gram(d_gram);
    const Eigen::MatrixXd gram_inv_d2 = belief.solve_gram(d2_gram);

    const double grad = -alpha.dot(d_gram * alpha) + gram_inv_d.trace();
    const Eigen::VectorXd da = d_gram * alpha;
    const Eigen::VectorXd gram_inv_da = belief.solve_gram(da);
    const double hess = 2.0 * da.dot(gram_inv_da) -
                        (gram_inv_d * gram_inv_d).trace() -
                        alpha.dot(d2_gram * alpha) + gram_inv_d2.trace();
    return {grad, hess};
}

namespace {

struct LambdaObjective {
    const ProblemSpec& spec;
    const OdeRhs& rhs;
    const JacobianBounds& bounds;
    const std::vector<double>& grid;
    const OutputCov& out_cov;
    const JitterPolicy& jitter;

    /// Fresh sequential solve at this length scale; returns the belief and
    /// its log evidence.
    std::pair<CurveBelief, double> at(double lambda_sq) const {
        const LengthScale ls{lambda_sq};
        SequentialResult res =
            sequential_solve(spec, rhs, bounds, grid, ls, out_cov, jitter);
        const double ev = evidence_of(res.belief);
        return {std::move(res.belief), ev};
    }
};

constexpr double kLambdaSqMin = 1e-4;
constexpr double kLambdaSqMax = 1e2;
constexpr double kSearchLogMin = -4.605170185988091;  // log 1e-2
constexpr double kSearchLogMax = 2.302585092994046;   // log 1e1

std::pair<double, std::vector<std::pair<double, double>>> golden_search(
    const LambdaObjective& objective) {
    std::vector<std::pair<double, double>> trace;
    const auto eval = [&](double x) {
        const double lambda_sq = std::exp(x);
        double ev = -std::numeric_limits<double>::infinity();
        try {
            ev = objective.at(lambda_sq).second;
        } catch (const IllConditionedModel&) {
            // leave -inf: treated as an invalid candidate
        }
        trace.emplace_back(lambda_sq, ev);
        return -ev;
    };

    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = kSearchLogMin, hi = kSearchLogMax;
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = eval(x1), f2 = eval(x2);
    for (int i = 0; i < 28; ++i) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(x2);
        }
    }

    double best_lambda = 0.0;
    double best_ev = -std::numeric_limits<double>::infinity();
    for (const auto& [lambda_sq, ev] : trace) {
        if (ev > best_ev) {
            best_ev = ev;
            best_lambda = lambda_sq;
        }
    }
    if (!std::isfinite(best_ev)) {
        throw OptimizationFailed("no finite evidence over the golden bracket", trace);
    }
    return {best_lambda, std::move(trace)};
}

std::pair<double, std::vector<std::pair<double, double>>> newton_search(
    const LambdaObjective& objective, const AffineMean& mean_fn) {
    std::vector<std::pair<double, double>> trace;
    const double x_min = std::log(kLambdaSqMin);
    const double x_max = std::log(kLambdaSqMax);

    // evaluate evidence and the fixed-Y gradient/curvature of -2 log p in
    // log lambda_sq; failures show up as -inf evidence
    struct Probe {
        double ev;
        double grad;
        double curv;
        bool ok;
    };
    const auto probe = [&](double x) -> Probe {
        const double lambda_sq = std::exp(x);
        try {
            auto [belief, ev] = objective.at(lambda_sq);
            const auto [g_l2, h_l2] =
                evidence_gradient(belief.observations(), mean_fn,
                                  LengthScale{lambda_sq}, objective.out_cov,
                                  objective.jitter);
            trace.emplace_back(lambda_sq, ev);
            return {ev, g_l2 * lambda_sq, h_l2 * lambda_sq * lambda_sq + g_l2 * lambda_sq,
                    true};
        } catch (const IllConditionedModel&) {
            trace.emplace_back(lambda_sq, -std::numeric_limits<double>::infinity());
            return {-std::numeric_limits<double>::infinity(), 0.0, 0.0, false};
        }
    };

    double x = 0.0;  // start at lambda_sq = 1
    Probe cur = probe(x);
    double best_x = x;
    double best_ev = cur.ev;

    for (int iter = 0; iter < 20 && cur.ok; ++iter) {
        if (std::abs(cur.grad) < 1e-6) break;
        double step = cur.curv > 0.0 ? -cur.grad / cur.curv
                                     : (cur.grad > 0.0 ? -0.5 : 0.5);
        step = std::clamp(step, -1.0, 1.0);

        // the quadratic model uses a frozen observation set; accept a step
        // only if the re-solved evidence actually improves, else halve it
        bool accepted = false;
        for (int halving = 0; halving < 6; ++halving) {
            const double x_try = std::clamp(x + step, x_min, x_max);
            if (x_try == x) break;
            const Probe next = probe(x_try);
            if (next.ok && next.ev >= cur.ev) {
                x = x_try;
                cur = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (cur.ev > best_ev) {
            best_ev = cur.ev;
            best_x = x;
        }
        if (!accepted) break;
    }
    if (!std::isfinite(best_ev)) {
        throw OptimizationFailed("no finite evidence along the Newton path", trace);
    }
    return {std::exp(best_x), std::move(trace)};
}

}  // namespace

std::pair<double, std::vector<std::pair<double, double>>> optimize_lambda(
    const ProblemSpec& spec, const OdeRhs& rhs, const BoundsProvider& bounds_provider,
    const SolverConfig& cfg, const Eigen::MatrixXd& sample_cov) {
    spec.validate();
    cfg.validate();
    if (cfg.lambda_search.mode == LambdaSearch::Mode::Fixed) {
        throw ContractViolation("optimize_lambda requires a non-fixed search mode");
    }
    const OutputCov out_cov = choose_output_cov(spec, sample_cov);
    const std::vector<double> grid =
        make_grid(cfg.n_points, resolve_grid_kind(spec, cfg));
    const JacobianBounds bounds = prior_bounds(spec, bounds_provider, grid, out_cov, cfg);
    const LambdaObjective objective{spec, rhs, bounds, grid, out_cov, cfg.jitter};
    if (cfg.lambda_search.mode == LambdaSearch::Mode::Golden) {
        return golden_search(objective);
    }
    return newton_search(objective, prior_mean(spec));
}

std::pair<CurveBelief, SolveReport> solve(const ProblemSpec& spec, const OdeRhs& rhs,
                                          const BoundsProvider& bounds_provider,
                                          const SolverConfig& cfg,
                                          const Eigen::MatrixXd& sample_cov) {
    const auto t_start = std::chrono::steady_clock::now();
    spec.validate();
    cfg.validate();

    SolveReport report;
    double lambda_sq = cfg.lambda_search.fixed_value;
    if (cfg.lambda_search.mode != LambdaSearch::Mode::Fixed) {
        auto [best, trace] = optimize_lambda(spec, rhs, bounds_provider, cfg, sample_cov);
        lambda_sq = best;
        report.evidence_trace = std::move(trace);
    }

    const OutputCov out_cov = choose_output_cov(spec, sample_cov);
    const std::vector<double> grid =
        make_grid(cfg.n_points, resolve_grid_kind(spec, cfg));
    const JacobianBounds bounds = prior_bounds(spec, bounds_provider, grid, out_cov, cfg);

    SequentialResult res = sequential_solve(spec, rhs, bounds, grid,
                                            LengthScale{lambda_sq}, out_cov, cfg.jitter);
    CurveBelief belief = refine(res.belief, rhs, cfg.refine_passes);

    report.grid = grid;
    report.lambda_sq_final = lambda_sq;
    report.v_used = out_cov.cov;
    report.error_covs = std::move(res.error_covs);
    report.refine_passes_done = cfg.refine_passes;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return {std::move(belief), std::move(report)};
}

}  // namespace gpode
