#include "gpode/gp_core.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "gpode/random.hpp"

namespace gpode {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
    // word-at-a-time FNV variant; the factor matrices digested here run to
    // megabytes over a solve
    const std::size_t words = bytes / 8;
    const auto* w = static_cast<const std::uint64_t*>(data);
    for (std::size_t i = 0; i < words; ++i) {
        h ^= w[i];
        h *= 0x100000001b3ULL;
    }
    const auto* p = static_cast<const unsigned char*>(data) + words * 8;
    for (std::size_t i = 0; i < bytes % 8; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void OutputCov::validate() const {
    if (cov.rows() == 0 || cov.rows() != cov.cols()) {
        throw ContractViolation("output covariance must be square and nonempty");
    }
    if (!cov.allFinite()) {
        throw ContractViolation("output covariance must be finite");
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw ContractViolation("output covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
        throw ContractViolation("output covariance must be positive semidefinite");
    }
}

void Functional::validate() const {
    if (order < 0 || order > 2) {
        throw ContractViolation("functional order must lie in {0,1,2}");
    }
    if (!std::isfinite(t)) {
        throw ContractViolation("functional location must be finite");
    }
}

Eigen::VectorXd AffineMean::at(double t, int order) const {
    switch (order) {
        case 0: return intercept + t * slope;
        case 1: return slope;
        case 2: return Eigen::VectorXd::Zero(intercept.size());
        default: throw ContractViolation("mean derivative order must lie in {0,1,2}");
    }
}

void ObservationSet::append(const Functional& f, const Eigen::VectorXd& value,
                            const Eigen::MatrixXd& noise) {
    f.validate();
    if (value.size() != dim_) {
        throw ContractViolation("observation value dimension mismatch");
    }
    if (noise.rows() != dim_ || noise.cols() != dim_) {
        throw ContractViolation("observation noise block must be D x D");
    }
    if ((noise.diagonal().array() < 0.0).any()) {
        throw ContractViolation("observation noise diagonal must be nonnegative");
    }
    const double noise_scale = std::max(1.0, noise.cwiseAbs().maxCoeff());
    if ((noise - noise.transpose()).cwiseAbs().maxCoeff() > 1e-10 * noise_scale) {
        throw ContractViolation("observation noise block must be symmetric");
    }
    functionals_.push_back(f);
    noise_.push_back(noise);
    Eigen::VectorXd stacked(values_.size() + dim_);
    stacked << values_, value;
    values_ = std::move(stacked);
}

ObservationSet ObservationSet::with_values(const Eigen::VectorXd& values) const {
    if (values.size() != values_.size()) {
        throw ContractViolation("replacement values must match stacked size");
    }
    ObservationSet out = *this;
    out.values_ = values;
    return out;
}

ObservationSet ObservationSet::prefix(int q) const {
    if (q < 0 || q > count()) {
        throw ContractViolation("prefix length out of range");
    }
    ObservationSet out(dim_);
    out.functionals_.assign(functionals_.begin(), functionals_.begin() + q);
    out.noise_.assign(noise_.begin(), noise_.begin() + q);
    out.values_ = values_.head(q * dim_);
    return out;
}

Eigen::MatrixXd gram_matrix(const std::vector<Functional>& functionals,
                            const LengthScale& ls, const OutputCov& out_cov,
                            const std::vector<Eigen::MatrixXd>& noise_blocks) {
    const int q = static_cast<int>(functionals.size());
    const int d = out_cov.dim();
    Eigen::MatrixXd gram(q * d, q * d);
    for (int p = 0; p < q; ++p) {
        for (int r = 0; r < q; ++r) {
            const double k = k_eval(functionals[p].t, functionals[r].t, ls,
                                    {functionals[p].order, functionals[r].order});
            gram.block(p * d, r * d, d, d) = k * out_cov.cov;
        }
    }
    for (int p = 0; p < static_cast<int>(noise_blocks.size()); ++p) {
        gram.block(p * d, p * d, d, d) += noise_blocks[p];
    }
    return gram;
}

Eigen::MatrixXd gram_dlambda2(const std::vector<Functional>& functionals,
                              const LengthScale& ls, const OutputCov& out_cov,
                              int l2_order) {
    const int q = static_cast<int>(functionals.size());
    const int d = out_cov.dim();
    Eigen::MatrixXd out(q * d, q * d);
    for (int p = 0; p < q; ++p) {
        for (int r = 0; r < q; ++r) {
            const DerivOrder order{functionals[p].order, functionals[r].order};
            const double k =
                l2_order == 1
                    ? k_dlambda2(functionals[p].t, functionals[r].t, ls, order)
                    : k_d2lambda2(functionals[p].t, functionals[r].t, ls, order);
            out.block(p * d, r * d, d, d) = k * out_cov.cov;
        }
    }
    return out;
}

struct CurveBelief::Gram {
    Eigen::MatrixXd raw;      // kernel blocks + noise, before jitter
    Eigen::MatrixXd matrix;   // jittered
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
    std::uint64_t digest = 0;
};

CurveBelief::CurveBelief(AffineMean mean_fn, LengthScale ls, OutputCov out_cov,
                         ObservationSet obs, std::shared_ptr<const Gram> gram)
    : mean_fn_(std::move(mean_fn)),
      ls_(ls),
      out_cov_(std::move(out_cov)),
      obs_(std::move(obs)),
      gram_(std::move(gram)) {
    resid_weights_ = gram_->llt.solve(obs_.values() -
                                      prior_mean_stack(obs_.functionals()));
}

CurveBelief CurveBelief::build(const AffineMean& mean_fn, const LengthScale& ls,
                               const OutputCov& out_cov, const ObservationSet& obs,
                               const JitterPolicy& jitter) {
    ls.validate();
    out_cov.validate();
    if (obs.empty()) {
        throw ContractViolation("belief requires at least one observation");
    }
    if (obs.dim() != out_cov.dim()) {
        throw ContractViolation("observation and output covariance dimensions differ");
    }
    const Eigen::MatrixXd gram =
        gram_matrix(obs.functionals(), ls, out_cov, obs.noise_blocks());
    return CurveBelief(mean_fn, ls, out_cov, obs,
                       factorize(gram, jitter, "Gram factorization failed"));
}

Eigen::VectorXd CurveBelief::prior_mean_stack(
    const std::vector<Functional>& fs) const {
    const int d = dim();
    Eigen::VectorXd out(static_cast<int>(fs.size()) * d);
    for (int i = 0; i < static_cast<int>(fs.size()); ++i) {
        out.segment(i * d, d) = mean_fn_.at(fs[i].t, fs[i].order);
    }
    return out;
}

Eigen::MatrixXd CurveBelief::cross_cov(
    const std::vector<Functional>& queries) const {
    const int d = dim();
    const auto& ofs = obs_.functionals();
    Eigen::MatrixXd cross(static_cast<int>(queries.size()) * d,
                          obs_.stacked_size());
    for (int m = 0; m < static_cast<int>(queries.size()); ++m) {
        for (int p = 0; p < obs_.count(); ++p) {
            const double k = k_eval(queries[m].t, ofs[p].t, ls_,
                                    {queries[m].order, ofs[p].order});
            cross.block(m * d, p * d, d, d) = k * out_cov_.cov;
        }
    }
    return cross;
}

Eigen::VectorXd CurveBelief::mean(const Functional& q) const {
    q.validate();
    const Eigen::MatrixXd cross = cross_cov({q});
    return mean_fn_.at(q.t, q.order) + cross * resid_weights_;
}

Eigen::MatrixXd CurveBelief::cov(const Functional& q1, const Functional& q2) const {
    q1.validate();
    q2.validate();
    const double k12 = k_eval(q1.t, q2.t, ls_, {q1.order, q2.order});
    const Eigen::MatrixXd c1 = cross_cov({q1});
    const Eigen::MatrixXd c2 = cross_cov({q2});
    Eigen::MatrixXd out = k12 * out_cov_.cov - c1 * gram_->llt.solve(c2.transpose());
    if (q1 == q2) {
        out = 0.5 * (out + out.transpose()).eval();
        const double k_self = k_eval(q1.t, q1.t, ls_, {q1.order, q1.order});
        for (int i = 0; i < out.rows(); ++i) {
            const double floor =
                -1e-10 * std::max(1.0, out_cov_.cov(i, i) * k_self);
            if (out(i, i) < floor) {
                throw IllConditionedModel(
                    "posterior variance below roundoff floor", out(i, i));
            }
            if (out(i, i) < 0.0) out(i, i) = 0.0;
        }
    }
    return out;
}

Eigen::MatrixXd CurveBelief::joint_cov(
    const std::vector<Functional>& queries) const {
    return joint_moments(queries).second;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> CurveBelief::joint_moments(
    const std::vector<Functional>& queries) const {
    const int d = dim();
    const int m = static_cast<int>(queries.size());
    Eigen::MatrixXd prior(m * d, m * d);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const double k = k_eval(queries[i].t, queries[j].t, ls_,
                                    {queries[i].order, queries[j].order});
            prior.block(i * d, j * d, d, d) = k * out_cov_.cov;
        }
    }
    const Eigen::MatrixXd cross = cross_cov(queries);
    Eigen::VectorXd mean = prior_mean_stack(queries) + cross * resid_weights_;
    Eigen::MatrixXd post = prior - cross * gram_->llt.solve(cross.transpose());
    post = 0.5 * (post + post.transpose()).eval();
    return {std::move(mean), std::move(post)};
}

CurveBelief CurveBelief::extended(const Functional& f, const Eigen::VectorXd& value,
                                  const Eigen::MatrixXd& noise,
                                  const JitterPolicy& jitter) const {
    const int d = dim();
    const int old_size = obs_.stacked_size();
    ObservationSet obs = obs_;
    obs.append(f, value, noise);

    Eigen::MatrixXd raw(old_size + d, old_size + d);
    raw.topLeftCorner(old_size, old_size) = gram_->raw;
    const auto& fs = obs_.functionals();
    for (int p = 0; p < obs_.count(); ++p) {
        const double k_col = k_eval(fs[p].t, f.t, ls_, {fs[p].order, f.order});
        const double k_row = k_eval(f.t, fs[p].t, ls_, {f.order, fs[p].order});
        raw.block(p * d, old_size, d, d) = k_col * out_cov_.cov;
        raw.block(old_size, p * d, d, d) = k_row * out_cov_.cov;
    }
    raw.block(old_size, old_size, d, d) =
        k_eval(f.t, f.t, ls_, {f.order, f.order}) * out_cov_.cov + noise;

    return CurveBelief(mean_fn_, ls_, out_cov_, std::move(obs),
                       factorize(raw, jitter, "Gram factorization failed"));
}

Eigen::MatrixXd CurveBelief::joint_sample(const std::vector<Functional>& queries,
                                          int count, std::uint64_t seed) const {
    if (count < 1) throw ContractViolation("sample count must be >= 1");
    const int d = dim();
    const int n = static_cast<int>(queries.size()) * d;

    const auto [mean_vec, cov] = joint_moments(queries);

    // The posterior covariance can be numerically rank deficient (exactly
    // observed functionals), with roundoff on the scale of the prior, so a
    // Cholesky with posterior-relative jitter is hopeless. Factorize by
    // eigendecomposition, judging roundoff negatives against the prior
    // variance scale and clamping them.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) {
        throw IllConditionedModel("joint sampling covariance eigendecomposition failed",
                                  0.0);
    }
    double prior_scale = 1e-12;
    const double v_max = out_cov_.cov.diagonal().maxCoeff();
    for (const Functional& q : queries) {
        prior_scale = std::max(
            prior_scale, v_max * k_eval(q.t, q.t, ls_, {q.order, q.order}));
    }
    if (eig.eigenvalues().minCoeff() < -1e-8 * prior_scale) {
        throw IllConditionedModel("joint sampling covariance is indefinite",
                                  eig.eigenvalues().minCoeff());
    }
    const Eigen::MatrixXd lower =
        eig.eigenvectors() *
        eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    Eigen::MatrixXd samples(count, n);
    GaussianSampler gauss(seed);
    Eigen::VectorXd z(n);
    for (int s = 0; s < count; ++s) {
        for (int i = 0; i < n; ++i) z[i] = gauss();
        samples.row(s) = (mean_vec + lower * z).transpose();
    }
    return samples;
}

double CurveBelief::log_marginal() const {
    const Eigen::VectorXd resid =
        obs_.values() - prior_mean_stack(obs_.functionals());
    const double quad = resid.dot(resid_weights_);
    const int n = obs_.stacked_size();
    return -0.5 * (quad + gram_log_det() + n * std::log(kTwoPi));
}

CurveBelief CurveBelief::with_values(const Eigen::VectorXd& values) const {
    return CurveBelief(mean_fn_, ls_, out_cov_, obs_.with_values(values), gram_);
}

std::uint64_t CurveBelief::gram_digest() const { return gram_->digest; }

double CurveBelief::jitter_used() const { return gram_->jitter; }

const Eigen::MatrixXd& CurveBelief::gram() const { return gram_->matrix; }

Eigen::MatrixXd CurveBelief::solve_gram(const Eigen::MatrixXd& rhs) const {
    return gram_->llt.solve(rhs);
}

double CurveBelief::gram_log_det() const {
    return 2.0 * gram_->llt.matrixLLT().diagonal().array().log().sum();
}

std::shared_ptr<const CurveBelief::Gram> CurveBelief::factorize(
    const Eigen::MatrixXd& m, const JitterPolicy& policy, const char* what) {
    const int n = static_cast<int>(m.rows());
    const double scale = std::max(m.diagonal().mean(), 1e-12);
    double jitter = policy.initial;
    while (true) {
        Eigen::MatrixXd jittered = m;
        jittered.diagonal().array() += jitter * scale;
        Eigen::LLT<Eigen::MatrixXd> llt(jittered);
        if (llt.info() == Eigen::Success) {
            auto gram = std::make_shared<CurveBelief::Gram>();
            gram->raw = m;
            gram->matrix = std::move(jittered);
            gram->llt = std::move(llt);
            gram->jitter = jitter * scale;
            const Eigen::MatrixXd& lmat = gram->llt.matrixLLT();
            std::uint64_t h = 0xcbf29ce484222325ULL;
            h = fnv1a(lmat.data(), sizeof(double) * n * n, h);
            h = fnv1a(&gram->jitter, sizeof(double), h);
            gram->digest = h;
            return gram;
        }
        if (jitter >= policy.max) break;
        jitter = std::min(jitter * policy.growth, policy.max);
    }
    const double dmax = m.diagonal().maxCoeff();
    const double dmin = std::max(m.diagonal().minCoeff(), 1e-300);
    throw IllConditionedModel(what, dmax / dmin);
}

double log_marginal(const ObservationSet& obs, const AffineMean& mean_fn,
                    const LengthScale& ls, const OutputCov& out_cov,
                    const JitterPolicy& jitter) {
    if (obs.empty()) {
        throw ContractViolation("marginal likelihood requires observations");
    }
    return CurveBelief::build(mean_fn, ls, out_cov, obs, jitter).log_marginal();
}

}  // namespace gpode
