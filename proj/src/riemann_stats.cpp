#include "gpode/riemann_stats.hpp"

#include <algorithm>
#include <cmath>

#include "gpode/random.hpp"

namespace gpode {
namespace {

std::vector<double> uniform_grid(int n) {
    std::vector<double> ts(n);
    for (int i = 0; i < n; ++i) ts[i] = static_cast<double>(i) / (n - 1);
    return ts;
}

Eigen::MatrixXd resolve_sample_cov(const StatsConfig& cfg, int dim) {
    if (cfg.sample_cov.size() > 0) {
        if (cfg.sample_cov.rows() != dim || cfg.sample_cov.cols() != dim) {
            throw ContractViolation("sample covariance dimension mismatch");
        }
        return cfg.sample_cov;
    }
    return Eigen::MatrixXd::Identity(dim, dim);
}

Eigen::MatrixXd data_sample_cov(const Eigen::MatrixXd& data) {
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - mean;
    const double denom = std::max<double>(1, data.rows() - 1);
    return centered.transpose() * centered / denom;
}

Eigen::MatrixXd psd_project(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
           eig.eigenvectors().transpose();
}

}  // namespace

OdeRhs field_rhs(const MetricField& field) {
    return [field](const Eigen::VectorXd& c, const Eigen::VectorXd& cp) {
        return geodesic_rhs(field, c, cp);
    };
}

BoundsProvider field_bounds(const MetricField& field, double safety) {
    return [field, safety](const std::vector<CurvePoint>& points) {
        return estimate_bounds(field, points, safety);
    };
}

SampledCurves sample_curves(const CurveBelief& belief, const std::vector<double>& ts,
                            int count, std::uint64_t seed) {
    const int n_t = static_cast<int>(ts.size());
    const int d = belief.dim();
    std::vector<Functional> queries;
    queries.reserve(2 * n_t);
    for (double t : ts) queries.push_back({t, 0});
    for (double t : ts) queries.push_back({t, 1});

    const Eigen::MatrixXd draws = belief.joint_sample(queries, count, seed);

    SampledCurves out;
    out.ts = ts;
    out.values.reserve(count);
    out.derivs.reserve(count);
    for (int s = 0; s < count; ++s) {
        Eigen::MatrixXd value(n_t, d), deriv(n_t, d);
        for (int i = 0; i < n_t; ++i) {
            value.row(i) = draws.row(s).segment(i * d, d);
            deriv.row(i) = draws.row(s).segment((n_t + i) * d, d);
        }
        out.values.push_back(std::move(value));
        out.derivs.push_back(std::move(deriv));
    }
    return out;
}

std::vector<double> curve_length(const SampledCurves& samples,
                                 const MetricField& field) {
    const int n_t = static_cast<int>(samples.ts.size());
    if (n_t < 2) throw ContractViolation("curve_length: need at least two nodes");
    std::vector<double> lengths;
    lengths.reserve(samples.values.size());
    for (std::size_t s = 0; s < samples.values.size(); ++s) {
        const Eigen::MatrixXd& value = samples.values[s];
        const Eigen::MatrixXd& deriv = samples.derivs[s];
        double acc = 0.0;
        double prev = std::nan("");
        for (int i = 0; i < n_t; ++i) {
            const Eigen::VectorXd c = value.row(i);
            const Eigen::VectorXd cp = deriv.row(i);
            const double speed = std::sqrt(std::max(0.0, cp.dot(metric(field, c) * cp)));
            if (i > 0) {
                acc += 0.5 * (prev + speed) * (samples.ts[i] - samples.ts[i - 1]);
            }
            prev = speed;
        }
        lengths.push_back(acc);
    }
    return lengths;
}

std::pair<EndpointDist, CurveBelief> exp_map(const EndpointDist& a,
                                             const EndpointDist& v,
                                             const MetricField& field,
                                             const StatsConfig& cfg) {
    if (a.mean.size() != v.mean.size()) {
        throw ContractViolation("exp_map: dimension mismatch");
    }
    ProblemSpec spec{ProblemKind::Ivp, a, v};
    auto [belief, report] =
        solve(spec, field_rhs(field), field_bounds(field, cfg.solver.bound_safety),
              cfg.solver, resolve_sample_cov(cfg, spec.dim()));
    EndpointDist endpoint{belief.mean({1.0, 0}), belief.cov({1.0, 0}, {1.0, 0})};
    return {std::move(endpoint), std::move(belief)};
}

std::pair<TangentStatistic, Eigen::MatrixXd> log_map_samples(
    const EndpointDist& a, const EndpointDist& b, const MetricField& field,
    const StatsConfig& cfg, int n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw ContractViolation("log_map: n_samples must be >= 2");
    const int d = static_cast<int>(a.mean.size());
    const double scale = 1.0 + a.mean.norm() + b.mean.norm();
    if ((a.mean - b.mean).norm() < 1e-12 * scale) {
        throw DegenerateGeodesic("log map between coincident points");
    }

    ProblemSpec spec{ProblemKind::Bvp, a, b};
    auto [belief, report] =
        solve(spec, field_rhs(field), field_bounds(field, cfg.solver.bound_safety),
              cfg.solver, resolve_sample_cov(cfg, d));

    const SampledCurves samples =
        sample_curves(belief, uniform_grid(cfg.quad_points), n_samples, seed);
    const std::vector<double> lengths = curve_length(samples, field);

    // Normalize the initial velocity in the metric at the sampled start
    // point, then rescale to the sampled geodesic length. This makes the
    // unit-time exponential map the exact inverse: a unit-time geodesic with
    // initial velocity w covers Riemannian length ||w||_M(a).
    Eigen::MatrixXd tangents(n_samples, d);
    int kept = 0;
    for (int s = 0; s < n_samples; ++s) {
        const Eigen::VectorXd v0 = samples.derivs[s].row(0);
        const Eigen::VectorXd c0 = samples.values[s].row(0);
        const double norm =
            std::sqrt(std::max(0.0, v0.dot(metric(field, c0) * v0)));
        if (norm < 1e-12) continue;
        tangents.row(kept++) = (lengths[s] / norm) * v0.transpose();
    }
    if (kept < static_cast<int>(0.9 * n_samples) || kept < 2) {
        throw DegenerateGeodesic(
            "too many sampled geodesics had vanishing initial velocity");
    }
    tangents.conservativeResize(kept, d);

    TangentStatistic stat;
    stat.n_samples = kept;
    stat.mean = tangents.colwise().mean();
    const Eigen::MatrixXd centered = tangents.rowwise() - stat.mean.transpose();
    stat.cov = psd_project(centered.transpose() * centered / (kept - 1));
    return {std::move(stat), std::move(tangents)};
}

TangentStatistic log_map(const EndpointDist& a, const EndpointDist& b,
                         const MetricField& field, const StatsConfig& cfg,
                         int n_samples, std::uint64_t seed) {
    return log_map_samples(a, b, field, cfg, n_samples, seed).first;
}

MeanTrace karcher_mean(const Eigen::MatrixXd& data, const MetricField& field,
                       double alpha, int iters, const StatsConfig& cfg,
                       std::uint64_t seed) {
    const int p = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    if (p < 1) throw ContractViolation("karcher_mean: empty dataset");
    if (!(alpha > 0.0) || alpha > 1.0) {
        throw ContractViolation("karcher_mean: alpha must lie in (0, 1]");
    }

    StatsConfig local = cfg;
    if (local.sample_cov.size() == 0) local.sample_cov = data_sample_cov(data);
    const double data_scale = std::sqrt(local.sample_cov.trace()) + 1e-12;

    MeanTrace trace;
    trace.step_size = alpha;
    EndpointDist mu{data.colwise().mean().transpose(),
                    Eigen::MatrixXd::Zero(d, d)};
    trace.iterates.push_back(mu);

    for (int k = 0; k < iters; ++k) {
        Eigen::VectorXd v_bar = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd v_cov = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < p; ++i) {
            const Eigen::VectorXd x = data.row(i);
            if ((x - mu.mean).norm() < 1e-12 * (1.0 + x.norm() + mu.mean.norm())) {
                continue;  // Log_mu(mu) = 0, nothing to add
            }
            const TangentStatistic stat =
                log_map(mu, EndpointDist::exact(x), field, local, local.n_samples,
                        derive_seed(seed, static_cast<std::uint64_t>(k) * p + i));
            v_bar += stat.mean;
            v_cov += stat.cov;  // per-point solves treated as independent
        }
        v_bar /= p;
        v_cov /= static_cast<double>(p) * p;
        trace.step_norms.push_back(v_bar.norm());

        EndpointDist step{alpha * v_bar, alpha * alpha * psd_project(v_cov)};
        auto [next, belief] = exp_map(mu, step, field, local);
        next.cov = psd_project(next.cov);
        mu = next;
        trace.iterates.push_back(mu);
        if (v_bar.norm() < 1e-4 * data_scale) {
            trace.converged = true;
            break;
        }
    }
    return trace;
}

PgaResult pga(const Eigen::MatrixXd& data, const EndpointDist& mean,
              const MetricField& field, const StatsConfig& cfg,
              std::uint64_t seed) {
    const int p = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    if (p < 2) throw ContractViolation("pga: need at least two data points");

    StatsConfig local = cfg;
    if (local.sample_cov.size() == 0) local.sample_cov = data_sample_cov(data);

    Eigen::MatrixXd tangent_means(p, d);
    std::vector<Eigen::MatrixXd> tangent_samples;
    tangent_samples.reserve(p);
    for (int i = 0; i < p; ++i) {
        const Eigen::VectorXd x = data.row(i);
        if ((x - mean.mean).norm() < 1e-12 * (1.0 + x.norm() + mean.mean.norm())) {
            tangent_means.row(i).setZero();
            tangent_samples.push_back(Eigen::MatrixXd::Zero(2, d));
            continue;
        }
        auto [stat, samples] =
            log_map_samples(mean, EndpointDist::exact(x), field, local,
                            local.n_samples, derive_seed(seed, i));
        tangent_means.row(i) = stat.mean.transpose();
        tangent_samples.push_back(std::move(samples));
    }

    const auto pca = [d](const Eigen::MatrixXd& rows) {
        const Eigen::RowVectorXd center = rows.colwise().mean();
        const Eigen::MatrixXd centered = rows.rowwise() - center;
        const Eigen::MatrixXd cov =
            centered.transpose() * centered / std::max<double>(1, rows.rows() - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        // descending order, sign fixed so the largest-|entry| is positive
        Eigen::MatrixXd dirs(d, d);
        Eigen::VectorXd vals(d);
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd col = eig.eigenvectors().col(d - 1 - j);
            int argmax = 0;
            col.cwiseAbs().maxCoeff(&argmax);
            if (col[argmax] < 0.0) col = -col;
            dirs.col(j) = col;
            vals[j] = eig.eigenvalues()[d - 1 - j];
        }
        return std::make_pair(dirs, vals);
    };

    PgaResult result;
    result.mean = mean;
    std::tie(result.directions, result.eigenvalues) = pca(tangent_means);
    for (int j = 0; j < d; ++j) {
        if (result.eigenvalues[j] <
            1e-12 * std::max(result.eigenvalues.maxCoeff(), 1e-300)) {
            result.degenerate_directions.push_back(j);
        }
    }

    // bootstrap over the per-point tangent samples
    constexpr int kBootstrap = 20;
    std::vector<Eigen::MatrixXd> boot_dirs(d, Eigen::MatrixXd(kBootstrap, d));
    GaussianSampler rng(derive_seed(seed, 0x626f6f74ULL));
    Eigen::MatrixXd resampled(p, d);
    for (int b = 0; b < kBootstrap; ++b) {
        for (int i = 0; i < p; ++i) {
            const auto& samples = tangent_samples[i];
            resampled.row(i) = samples.row(static_cast<int>(rng.below(samples.rows())));
        }
        auto [dirs, vals] = pca(resampled);
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd col = dirs.col(j);
            if (col.dot(result.directions.col(j)) < 0.0) col = -col;
            boot_dirs[j].row(b) = col.transpose();
        }
    }
    for (int j = 0; j < d; ++j) {
        const Eigen::RowVectorXd center = boot_dirs[j].colwise().mean();
        const Eigen::MatrixXd centered = boot_dirs[j].rowwise() - center;
        result.direction_covs.push_back(centered.transpose() * centered /
                                        (kBootstrap - 1));
    }

    // first principal geodesic as two IVPs reaching +-3 standard deviations
    const double sigma1 = std::sqrt(std::max(0.0, result.eigenvalues[0]));
    const Eigen::VectorXd v1 = result.directions.col(0);
    const Eigen::MatrixXd v_cov =
        psd_project(9.0 * sigma1 * sigma1 * result.direction_covs[0]);
    auto [end_fwd, fwd] =
        exp_map(mean, {3.0 * sigma1 * v1, v_cov}, field, local);
    auto [end_bwd, bwd] =
        exp_map(mean, {-3.0 * sigma1 * v1, v_cov}, field, local);
    result.principal.emplace(PrincipalGeodesic{std::move(fwd), std::move(bwd)});
    return result;
}

}  // namespace gpode
