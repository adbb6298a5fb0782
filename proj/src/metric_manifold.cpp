#include "gpode/metric_manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gpode/random.hpp"

namespace gpode {

void MetricField::validate() const {
    if (components.empty()) {
        throw ContractViolation("metric field needs at least one component");
    }
    if (!(rho > 0.0) || !std::isfinite(rho)) {
        throw ContractViolation("rho must be positive and finite");
    }
    const int d = dim();
    for (const LocalMetric& c : components) {
        if (c.center.size() != d || c.tensor.rows() != d || c.tensor.cols() != d) {
            throw ContractViolation("metric component dimensions disagree");
        }
        if (!c.center.allFinite() || !c.tensor.allFinite()) {
            throw ContractViolation("metric component entries must be finite");
        }
    }
}

Eigen::VectorXd weights(const MetricField& field, const Eigen::VectorXd& x) {
    field.validate();
    if (!x.allFinite() || x.size() != field.dim()) {
        throw ContractViolation("weights: query point invalid");
    }
    const int r = static_cast<int>(field.components.size());
    Eigen::VectorXd log_w(r);
    for (int i = 0; i < r; ++i) {
        const Eigen::VectorXd diff = x - field.components[i].center;
        log_w[i] = -0.5 * field.rho * diff.dot(field.components[i].tensor * diff);
    }
    const Eigen::VectorXd shifted = (log_w.array() - log_w.maxCoeff()).exp();
    return shifted / shifted.sum();
}

Eigen::MatrixXd metric(const MetricField& field, const Eigen::VectorXd& x) {
    const Eigen::VectorXd w = weights(field, x);
    const int d = field.dim();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < w.size(); ++i) m += w[i] * field.components[i].tensor;
    return m;
}

Eigen::MatrixXd metric_grad(const MetricField& field, const Eigen::VectorXd& x) {
    const Eigen::VectorXd w = weights(field, x);
    const int d = field.dim();
    const int r = static_cast<int>(field.components.size());

    // dw_r/dx = w_r (s_bar - s_r) with s_r = rho M_r (x - mu_r).
    Eigen::MatrixXd scores(d, r);
    for (int i = 0; i < r; ++i) {
        scores.col(i) =
            field.rho * (field.components[i].tensor * (x - field.components[i].center));
    }
    const Eigen::VectorXd mean_score = scores * w;

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(d * d, d);
    for (int i = 0; i < r; ++i) {
        const Eigen::VectorXd dw = w[i] * (mean_score - scores.col(i));
        // row-major vec of M_i
        Eigen::VectorXd vec_m(d * d);
        for (int a = 0; a < d; ++a) {
            vec_m.segment(a * d, d) = field.components[i].tensor.row(a).transpose();
        }
        grad += vec_m * dw.transpose();
    }
    return grad;
}

Eigen::VectorXd geodesic_rhs(const MetricField& field, const Eigen::VectorXd& c,
                             const Eigen::VectorXd& c_prime) {
    const int d = field.dim();
    if (c_prime.size() != d) {
        throw ContractViolation("geodesic_rhs: velocity dimension mismatch");
    }
    const Eigen::MatrixXd m = metric(field, c);
    const Eigen::MatrixXd grad = metric_grad(field, c);

    Eigen::VectorXd kron(d * d);
    for (int i = 0; i < d; ++i) {
        kron.segment(i * d, d) = c_prime[i] * c_prime;
    }
    const Eigen::VectorXd rhs_unsolved = grad.transpose() * kron;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw RhsEvaluationError("metric tensor not invertible", std::nan(""));
    }
    const double dmax = ldlt.vectorD().maxCoeff();
    const double dmin = ldlt.vectorD().minCoeff();
    if (!(dmin > 0.0) || dmax / dmin > 1e12) {
        throw RhsEvaluationError("metric tensor numerically singular", std::nan(""));
    }
    return -0.5 * ldlt.solve(rhs_unsolved);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> rhs_jacobians(
    const MetricField& field, const Eigen::VectorXd& c,
    const Eigen::VectorXd& c_prime, double base_step) {
    const int d = field.dim();
    Eigen::MatrixXd jac_value(d, d), jac_velocity(d, d);
    const double hc = base_step * (1.0 + c.norm());
    const double hv = base_step * (1.0 + c_prime.norm());
    for (int i = 0; i < d; ++i) {
        Eigen::VectorXd up = c, dn = c;
        up[i] += hc;
        dn[i] -= hc;
        jac_value.col(i) =
            (geodesic_rhs(field, up, c_prime) - geodesic_rhs(field, dn, c_prime)) /
            (2.0 * hc);

        Eigen::VectorXd vup = c_prime, vdn = c_prime;
        vup[i] += hv;
        vdn[i] -= hv;
        jac_velocity.col(i) =
            (geodesic_rhs(field, c, vup) - geodesic_rhs(field, c, vdn)) / (2.0 * hv);
    }
    return {jac_value, jac_velocity};
}

JacobianBounds estimate_bounds(const MetricField& field,
                               const std::vector<CurvePoint>& curve_points,
                               double safety) {
    if (curve_points.empty()) {
        throw ContractViolation("estimate_bounds: empty curve sketch");
    }
    const int d = field.dim();
    Eigen::MatrixXd max_value = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd max_velocity = Eigen::MatrixXd::Zero(d, d);
    for (const CurvePoint& p : curve_points) {
        const auto [jc, jv] = rhs_jacobians(field, p.value, p.velocity);
        max_value = max_value.cwiseMax(jc.cwiseAbs());
        max_velocity = max_velocity.cwiseMax(jv.cwiseAbs());
    }
    // U_ij bounds |df_j/dc_i|: transpose from the row-major Jacobian layout.
    return {safety * max_value.transpose(), safety * max_velocity.transpose()};
}

namespace {

Eigen::MatrixXd regularized(const Eigen::MatrixXd& cov, double reg, bool diagonal) {
    const int d = static_cast<int>(cov.rows());
    Eigen::MatrixXd out = diagonal ? cov.diagonal().asDiagonal().toDenseMatrix() : cov;
    out += (reg * out.trace() / d + 1e-12) * Eigen::MatrixXd::Identity(d, d);
    return out;
}

double auto_rho(const std::vector<LocalMetric>& comps) {
    const int r = static_cast<int>(comps.size());
    if (r < 2) return 1.0;
    std::vector<double> sq_dists;
    for (int i = 0; i < r; ++i) {
        for (int j = i + 1; j < r; ++j) {
            sq_dists.push_back((comps[i].center - comps[j].center).squaredNorm());
        }
    }
    std::sort(sq_dists.begin(), sq_dists.end());
    const double median_sq = sq_dists[sq_dists.size() / 2];
    double mean_trace = 0.0;
    for (const LocalMetric& c : comps) mean_trace += c.tensor.trace();
    mean_trace /= r;
    const int d = static_cast<int>(comps[0].center.size());
    // exponent at the median inter-center distance ~ -1 for an average direction
    const double denom = (mean_trace / d) * median_sq;
    return denom > 1e-300 ? 2.0 / denom : 1.0;
}

}  // namespace

MetricField fit_local_metrics(const Eigen::MatrixXd& data, int n_components,
                              int iters, std::uint64_t seed,
                              const FitOptions& options) {
    const int p = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    if (n_components < 1) throw ContractViolation("need at least one component");
    if (p <= d * n_components) {
        throw ContractViolation("insufficient data: need more points than D*R");
    }

    GaussianSampler rng(seed);

    // k-means++ style seeding
    Eigen::MatrixXd means(n_components, d);
    means.row(0) = data.row(static_cast<int>(rng.below(p)));
    Eigen::VectorXd min_sq = (data.rowwise() - means.row(0)).rowwise().squaredNorm();
    for (int k = 1; k < n_components; ++k) {
        const double total = min_sq.sum();
        int pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total, acc = 0.0;
            for (int i = 0; i < p; ++i) {
                acc += min_sq[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.below(p));
        }
        means.row(k) = data.row(pick);
        min_sq = min_sq.cwiseMin(
            (data.rowwise() - means.row(k)).rowwise().squaredNorm());
    }

    const Eigen::RowVectorXd global_mean = data.colwise().mean();
    const Eigen::MatrixXd centered0 = data.rowwise() - global_mean;
    const Eigen::MatrixXd global_cov = centered0.transpose() * centered0 / p;

    std::vector<Eigen::MatrixXd> covs(
        n_components, regularized(global_cov, options.covariance_reg, options.diagonal));
    Eigen::VectorXd mix = Eigen::VectorXd::Constant(n_components, 1.0 / n_components);

    Eigen::MatrixXd resp(p, n_components);
    for (int it = 0; it < iters; ++it) {
        // E step: responsibilities from log densities (log-sum-exp per row)
        for (int k = 0; k < n_components; ++k) {
            Eigen::LLT<Eigen::MatrixXd> llt(covs[k]);
            const double log_det =
                2.0 * llt.matrixLLT().diagonal().array().log().sum();
            const Eigen::MatrixXd diff =
                (data.rowwise() - means.row(k)).transpose();
            const Eigen::MatrixXd solved = llt.solve(diff);
            for (int i = 0; i < p; ++i) {
                const double quad = diff.col(i).dot(solved.col(i));
                resp(i, k) = std::log(mix[k]) -
                             0.5 * (quad + log_det + d * std::log(2.0 * M_PI));
            }
        }
        for (int i = 0; i < p; ++i) {
            const double shift = resp.row(i).maxCoeff();
            resp.row(i) = (resp.row(i).array() - shift).exp();
            resp.row(i) /= resp.row(i).sum();
        }

        // M step
        for (int k = 0; k < n_components; ++k) {
            double weight = resp.col(k).sum();
            if (weight < 1e-8) {
                // re-seed dead component at the point farthest from all means
                Eigen::VectorXd far_sq =
                    (data.rowwise() - means.row(0)).rowwise().squaredNorm();
                for (int j = 1; j < n_components; ++j) {
                    far_sq = far_sq.cwiseMin(
                        (data.rowwise() - means.row(j)).rowwise().squaredNorm());
                }
                int farthest = 0;
                far_sq.maxCoeff(&farthest);
                means.row(k) = data.row(farthest);
                covs[k] = regularized(global_cov, options.covariance_reg,
                                      options.diagonal);
                mix[k] = 1.0 / n_components;
                mix /= mix.sum();
                continue;
            }
            means.row(k) = (resp.col(k).transpose() * data) / weight;
            const Eigen::MatrixXd diff = data.rowwise() - means.row(k);
            Eigen::MatrixXd cov =
                diff.transpose() * resp.col(k).asDiagonal() * diff / weight;
            covs[k] = regularized(cov, options.covariance_reg, options.diagonal);
            mix[k] = weight / p;
        }
        mix /= mix.sum();
    }

    MetricField field;
    for (int k = 0; k < n_components; ++k) {
        const int dd = d;
        const Eigen::MatrixXd inv =
            covs[k].llt().solve(Eigen::MatrixXd::Identity(dd, dd));
        field.components.push_back(
            {means.row(k).transpose(), 0.5 * (inv + inv.transpose())});
    }
    field.rho = options.rho_override > 0.0 ? options.rho_override
                                           : auto_rho(field.components);
    field.validate();
    return field;
}

}  // namespace gpode
