#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "gpode/errors.hpp"
#include "gpode/se_kernel.hpp"

namespace gpode {

/// Covariance between the output dimensions of the curve (paperback "V" of a
/// separable kernel V (x) k).
struct OutputCov {
    Eigen::MatrixXd cov;

    int dim() const { return static_cast<int>(cov.rows()); }
    void validate() const;
};

/// A linear functional of the curve: its value (order 0), first derivative
/// (order 1) or second derivative (order 2) at parameter t.
struct Functional {
    double t = 0.0;
    int order = 0;

    void validate() const;
    bool operator==(const Functional&) const = default;
};

/// Affine prior mean t -> intercept + slope * t together with its derivatives.
struct AffineMean {
    Eigen::VectorXd intercept;
    Eigen::VectorXd slope;

    Eigen::VectorXd at(double t, int order) const;
};

/// Gaussian observations of functionals of the curve. Values are stacked
/// functional-major (all D entries of observation 0, then observation 1, ...)
/// and each observation carries its own D x D noise block, so the joint noise
/// matrix is block diagonal in this ordering.
class ObservationSet {
public:
    ObservationSet() = default;
    explicit ObservationSet(int dim) : dim_(dim) {}

    void append(const Functional& f, const Eigen::VectorXd& value,
                const Eigen::MatrixXd& noise);

    int dim() const { return dim_; }
    int count() const { return static_cast<int>(functionals_.size()); }
    int stacked_size() const { return count() * dim_; }
    bool empty() const { return functionals_.empty(); }

    const std::vector<Functional>& functionals() const { return functionals_; }
    const Eigen::VectorXd& values() const { return values_; }
    const std::vector<Eigen::MatrixXd>& noise_blocks() const { return noise_; }

    /// Same functionals and noise, different observed values.
    ObservationSet with_values(const Eigen::VectorXd& values) const;

    /// The first q observations (used to study information accrual).
    ObservationSet prefix(int q) const;

private:
    int dim_ = 0;
    std::vector<Functional> functionals_;
    Eigen::VectorXd values_;
    std::vector<Eigen::MatrixXd> noise_;
};

/// Escalating relative diagonal jitter for Cholesky factorizations.
struct JitterPolicy {
    double initial = 1e-10;
    double max = 1e-6;
    double growth = 100.0;
};

/// Kronecker Gram matrix V (x) K(functionals) plus block-diagonal noise,
/// ordered functional-major.
Eigen::MatrixXd gram_matrix(const std::vector<Functional>& functionals,
                            const LengthScale& ls, const OutputCov& out_cov,
                            const std::vector<Eigen::MatrixXd>& noise_blocks);

/// Same layout, entries differentiated once or twice w.r.t. lambda^2 (noise
/// does not depend on the length scale).
Eigen::MatrixXd gram_dlambda2(const std::vector<Functional>& functionals,
                              const LengthScale& ls, const OutputCov& out_cov,
                              int l2_order);

/// Joint Gaussian-process posterior over a curve and its first two
/// derivatives. Immutable after construction; queries are const and safe to
/// run concurrently. with_values shares the Gram factorization, which is what
/// makes iterative refinement leave the Gram digest untouched.
class CurveBelief {
public:
    static CurveBelief build(const AffineMean& mean_fn, const LengthScale& ls,
                             const OutputCov& out_cov, const ObservationSet& obs,
                             const JitterPolicy& jitter = {});

    Eigen::VectorXd mean(const Functional& q) const;
    Eigen::MatrixXd cov(const Functional& q1, const Functional& q2) const;

    /// Joint posterior covariance over all queries, stacked functional-major.
    Eigen::MatrixXd joint_cov(const std::vector<Functional>& queries) const;

    /// Posterior mean vector and covariance over the queries in one pass.
    std::pair<Eigen::VectorXd, Eigen::MatrixXd> joint_moments(
        const std::vector<Functional>& queries) const;

    /// Belief with one more observation appended. Equivalent to rebuilding
    /// from scratch (bit for bit) but reuses the existing kernel blocks.
    CurveBelief extended(const Functional& f, const Eigen::VectorXd& value,
                         const Eigen::MatrixXd& noise,
                         const JitterPolicy& jitter = {}) const;

    /// `count` joint draws over the queries; row s holds sample s stacked
    /// functional-major. Deterministic in the seed.
    Eigen::MatrixXd joint_sample(const std::vector<Functional>& queries,
                                 int count, std::uint64_t seed) const;

    /// log p(values | lambda, V) of this belief's own observations.
    double log_marginal() const;

    /// Replace observation values only; kernel blocks, noise and the
    /// factorization are shared with *this.
    CurveBelief with_values(const Eigen::VectorXd& values) const;

    std::uint64_t gram_digest() const;
    double jitter_used() const;
    const Eigen::MatrixXd& gram() const;
    Eigen::MatrixXd solve_gram(const Eigen::MatrixXd& rhs) const;
    double gram_log_det() const;

    const ObservationSet& observations() const { return obs_; }
    const AffineMean& mean_fn() const { return mean_fn_; }
    const LengthScale& length_scale() const { return ls_; }
    const OutputCov& output_cov() const { return out_cov_; }
    int dim() const { return out_cov_.dim(); }

private:
    struct Gram;

    static std::shared_ptr<const Gram> factorize(const Eigen::MatrixXd& m,
                                                 const JitterPolicy& policy,
                                                 const char* what);

    CurveBelief(AffineMean mean_fn, LengthScale ls, OutputCov out_cov,
                ObservationSet obs, std::shared_ptr<const Gram> gram);

    Eigen::VectorXd prior_mean_stack(const std::vector<Functional>& fs) const;
    Eigen::MatrixXd cross_cov(const std::vector<Functional>& queries) const;

    AffineMean mean_fn_;
    LengthScale ls_;
    OutputCov out_cov_;
    ObservationSet obs_;
    std::shared_ptr<const Gram> gram_;
    Eigen::VectorXd resid_weights_;
};

/// Marginal likelihood of an observation set under the prior, without keeping
/// the belief around.
double log_marginal(const ObservationSet& obs, const AffineMean& mean_fn,
                    const LengthScale& ls, const OutputCov& out_cov,
                    const JitterPolicy& jitter = {});

}  // namespace gpode
