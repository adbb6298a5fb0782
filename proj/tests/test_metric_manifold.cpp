#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gpode/metric_manifold.hpp"
#include "gpode/random.hpp"
#include "support/benchmark.hpp"

using namespace gpode;

namespace {

MetricField one_component_field(const Eigen::MatrixXd& tensor) {
    MetricField field;
    field.components.push_back(
        {Eigen::VectorXd::Zero(tensor.rows()), tensor});
    field.rho = 1.0;
    return field;
}

MetricField random_field(std::mt19937_64& eng, int r, int d) {
    std::normal_distribution<double> gauss;
    MetricField field;
    for (int i = 0; i < r; ++i) {
        Eigen::VectorXd center(d);
        for (int j = 0; j < d; ++j) center[j] = gauss(eng);
        Eigen::MatrixXd a(d, d);
        for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q) a(p, q) = gauss(eng);
        field.components.push_back(
            {center, (a * a.transpose() + Eigen::MatrixXd::Identity(d, d)).eval()});
    }
    field.rho = 0.8;
    return field;
}

// 1D field whose induced metric approximates m(x) = exp(2x) on [-1, 1]
MetricField exp_metric_field() {
    MetricField field;
    const int r = 161;
    for (int i = 0; i < r; ++i) {
        const double x = -1.0 + 2.0 * i / (r - 1);
        Eigen::VectorXd center(1);
        center << x;
        Eigen::MatrixXd tensor(1, 1);
        tensor << std::exp(2.0 * x);
        field.components.push_back({center, tensor});
    }
    field.rho = 2000.0;
    return field;
}

}  // namespace

TEST_CASE("weights: trivial and pinned cases") {
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(1, 1);
    CHECK(weights(one_component_field(eye), Eigen::VectorXd::Zero(1))(0) ==
          doctest::Approx(1.0));

    MetricField twin;
    twin.components.push_back({Eigen::VectorXd::Constant(1, 0.3), eye});
    twin.components.push_back({Eigen::VectorXd::Constant(1, 0.3), eye});
    twin.rho = 3.0;
    const Eigen::VectorXd w = weights(twin, Eigen::VectorXd::Constant(1, -0.4));
    CHECK(w(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w(1) == doctest::Approx(0.5).epsilon(1e-12));

    MetricField pair;
    pair.components.push_back({Eigen::VectorXd::Zero(1), eye});
    pair.components.push_back({Eigen::VectorXd::Constant(1, 1.0), eye});
    pair.rho = 2.0;
    const Eigen::VectorXd w2 = weights(pair, Eigen::VectorXd::Zero(1));
    CHECK(w2(0) == doctest::Approx(0.7310585786300049).epsilon(1e-9));
    CHECK(w2(1) == doctest::Approx(0.2689414213699951).epsilon(1e-9));

    // metric at the same configuration: convex combination of tensors
    pair.components[0].tensor << 2.0;
    pair.components[1].tensor << 5.0;
    const Eigen::VectorXd w3 = weights(pair, Eigen::VectorXd::Zero(1));
    const Eigen::MatrixXd m = metric(pair, Eigen::VectorXd::Zero(1));
    CHECK(m(0, 0) == doctest::Approx(w3(0) * 2.0 + w3(1) * 5.0).epsilon(1e-12));
}

TEST_CASE("weights sum to one and stay positive") {
    std::mt19937_64 eng(31);
    std::normal_distribution<double> gauss;
    for (int r : {1, 2, 5}) {
        for (int d : {1, 2, 3}) {
            const MetricField field = random_field(eng, r, d);
            for (int trial = 0; trial < 10; ++trial) {
                Eigen::VectorXd x(d);
                for (int j = 0; j < d; ++j) x[j] = gauss(eng);
                const Eigen::VectorXd w = weights(field, x);
                CHECK(std::abs(w.sum() - 1.0) < 1e-12);
                CHECK(w.minCoeff() > 0.0);
            }
        }
    }
}

TEST_CASE("metric stays symmetric with bounded smallest eigenvalue") {
    std::mt19937_64 eng(37);
    std::normal_distribution<double> gauss;
    const MetricField field = random_field(eng, 4, 3);
    double min_component_eig = std::numeric_limits<double>::infinity();
    for (const LocalMetric& c : field.components) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.tensor);
        min_component_eig = std::min(min_component_eig, eig.eigenvalues().minCoeff());
    }
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd x(3);
        for (int j = 0; j < 3; ++j) x[j] = gauss(eng);
        const Eigen::MatrixXd m = metric(field, x);
        CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
        CHECK(eig.eigenvalues().minCoeff() >= min_component_eig - 1e-10);
    }
}

TEST_CASE("metric gradient: zero for constant fields, matches finite differences") {
    Eigen::MatrixXd tensor(2, 2);
    tensor << 2.0, 0.3, 0.3, 1.0;
    CHECK(metric_grad(one_component_field(tensor), Eigen::VectorXd::Zero(2))
              .cwiseAbs()
              .maxCoeff() == 0.0);

    std::mt19937_64 eng(41);
    std::normal_distribution<double> gauss;
    for (int r : {1, 2, 5}) {
        for (int d : {1, 2, 3}) {
            const MetricField field = random_field(eng, r, d);
            for (int trial = 0; trial < 20; ++trial) {
                Eigen::VectorXd x(d);
                for (int j = 0; j < d; ++j) x[j] = 0.7 * gauss(eng);
                const Eigen::MatrixXd grad = metric_grad(field, x);
                const double h = 1e-6;
                for (int col = 0; col < d; ++col) {
                    Eigen::VectorXd up = x, dn = x;
                    up[col] += h;
                    dn[col] -= h;
                    const Eigen::MatrixXd diff =
                        (metric(field, up) - metric(field, dn)) / (2.0 * h);
                    for (int a = 0; a < d; ++a) {
                        for (int b = 0; b < d; ++b) {
                            const double want = diff(a, b);
                            const double got = grad(a * d + b, col);
                            CHECK(std::abs(got - want) <=
                                  1e-5 * std::max(1.0, std::abs(want)));
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("geodesic rhs: trivial zeros and velocity homogeneity") {
    Eigen::MatrixXd tensor(2, 2);
    tensor << 1.5, 0.2, 0.2, 0.9;
    const MetricField constant = one_component_field(tensor);
    Eigen::VectorXd c(2), v(2);
    c << 0.4, -0.2;
    v << 1.0, 2.0;
    CHECK(geodesic_rhs(constant, c, v).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 eng(43);
    const MetricField field = random_field(eng, 3, 2);
    CHECK(geodesic_rhs(field, c, Eigen::VectorXd::Zero(2)).cwiseAbs().maxCoeff() ==
          0.0);

    for (double alpha : {-2.0, 0.5, 3.0}) {
        const Eigen::VectorXd f1 = geodesic_rhs(field, c, v);
        const Eigen::VectorXd f2 = geodesic_rhs(field, c, (alpha * v).eval());
        CHECK((f2 - alpha * alpha * f1).cwiseAbs().maxCoeff() <
              1e-10 * std::max(1.0, f1.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("geodesic rhs matches a term-by-term finite-difference build") {
    std::mt19937_64 eng(47);
    std::normal_distribution<double> gauss;
    const MetricField field = random_field(eng, 3, 2);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd c(2), v(2);
        for (int j = 0; j < 2; ++j) {
            c[j] = 0.5 * gauss(eng);
            v[j] = gauss(eng);
        }
        // independent construction: dvec(M)/dc by finite differences of
        // metric(), kron product by hand, dense inverse
        const int d = 2;
        Eigen::MatrixXd grad_fd(d * d, d);
        const double h = 1e-6;
        for (int col = 0; col < d; ++col) {
            Eigen::VectorXd up = c, dn = c;
            up[col] += h;
            dn[col] -= h;
            const Eigen::MatrixXd diff =
                (metric(field, up) - metric(field, dn)) / (2.0 * h);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) grad_fd(a * d + b, col) = diff(a, b);
        }
        Eigen::VectorXd kron(d * d);
        for (int i = 0; i < d; ++i) kron.segment(i * d, d) = v[i] * v;
        const Eigen::VectorXd want =
            -0.5 * metric(field, c).inverse() * grad_fd.transpose() * kron;
        const Eigen::VectorXd got = geodesic_rhs(field, c, v);
        CHECK((got - want).cwiseAbs().maxCoeff() <
              1e-4 * std::max(1.0, want.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("1D exponential metric: rhs approximates -c'^2") {
    const MetricField field = exp_metric_field();
    Eigen::VectorXd c(1), v(1);
    for (double x : {-0.5, -0.2, 0.0, 0.3, 0.6}) {
        c << x;
        v << 1.3;
        const double got = geodesic_rhs(field, c, v)(0);
        CHECK(got == doctest::Approx(-1.3 * 1.3).epsilon(0.05));
    }
}

TEST_CASE("rhs jacobians: zeros, quadratic structure, Richardson agreement") {
    Eigen::MatrixXd tensor(2, 2);
    tensor << 1.0, 0.0, 0.0, 2.0;
    const MetricField constant = one_component_field(tensor);
    Eigen::VectorXd c(2), v(2);
    c << 0.1, 0.2;
    v << 0.5, -0.5;
    const auto [jc0, jv0] = rhs_jacobians(constant, c, v);
    CHECK(jc0.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(jv0.cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 eng(53);
    const MetricField field = random_field(eng, 3, 2);
    const auto [jc_zero_v, jv_zero_v] =
        rhs_jacobians(field, c, Eigen::VectorXd::Zero(2));
    CHECK(jv_zero_v.cwiseAbs().maxCoeff() < 1e-8);  // f quadratic in velocity

    const auto [jc1, jv1] = rhs_jacobians(field, c, v, 1e-5);
    const auto [jc2, jv2] = rhs_jacobians(field, c, v, 0.5e-5);
    CHECK((jc1 - jc2).cwiseAbs().maxCoeff() <
          1e-3 * std::max(1.0, jc1.cwiseAbs().maxCoeff()));
    CHECK((jv1 - jv2).cwiseAbs().maxCoeff() <
          1e-3 * std::max(1.0, jv1.cwiseAbs().maxCoeff()));
}

TEST_CASE("estimate_bounds: zeros, safety scaling, orientation") {
    Eigen::MatrixXd tensor = Eigen::MatrixXd::Identity(2, 2);
    const MetricField constant = one_component_field(tensor);
    std::vector<CurvePoint> pts = {
        {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)}};
    const JacobianBounds zero = estimate_bounds(constant, pts, 2.0);
    CHECK(zero.value.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(zero.velocity.cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 eng(59);
    const MetricField field = random_field(eng, 3, 2);
    std::normal_distribution<double> gauss;
    std::vector<CurvePoint> curve;
    for (int i = 0; i < 8; ++i) {
        Eigen::VectorXd c(2), v(2);
        for (int j = 0; j < 2; ++j) {
            c[j] = 0.5 * gauss(eng);
            v[j] = gauss(eng);
        }
        curve.push_back({c, v});
    }
    const JacobianBounds b1 = estimate_bounds(field, curve, 1.0);
    const JacobianBounds b2 = estimate_bounds(field, curve, 2.0);
    CHECK((b2.value - 2.0 * b1.value).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b2.velocity - 2.0 * b1.velocity).cwiseAbs().maxCoeff() < 1e-12);

    // bounds dominate the pointwise |jacobian| at the sketch points
    for (const CurvePoint& p : curve) {
        const auto [jc, jv] = rhs_jacobians(field, p.value, p.velocity);
        CHECK(((b1.value.transpose() - jc.cwiseAbs()).array() >= -1e-12).all());
        CHECK(((b1.velocity.transpose() - jv.cwiseAbs()).array() >= -1e-12).all());
    }
}

TEST_CASE("benchmark field: bounds dominate fresh on-curve jacobians") {
    const MetricField field = bench::field();
    const Eigen::MatrixXd data = bench::cluster_data();
    std::vector<CurvePoint> sketch;
    for (const auto& [ia, ib] : bench::point_pairs(10)) {
        const Eigen::VectorXd a = data.row(ia), b = data.row(ib);
        for (int k = 0; k <= 4; ++k) {
            const double t = k / 4.0;
            sketch.push_back({a + t * (b - a), b - a});
        }
    }
    const JacobianBounds bounds = estimate_bounds(field, sketch, 2.0);

    GaussianSampler rng(77);
    int dominated = 0, total = 0;
    for (int i = 0; i < 50; ++i) {
        const int pick = static_cast<int>(rng.below(sketch.size()));
        CurvePoint p = sketch[pick];
        p.value += 0.05 * Eigen::VectorXd::NullaryExpr(2, [&](int) { return rng(); });
        p.velocity += 0.05 * Eigen::VectorXd::NullaryExpr(2, [&](int) { return rng(); });
        const auto [jc, jv] = rhs_jacobians(field, p.value, p.velocity);
        total += 8;
        dominated +=
            ((bounds.value.transpose() - jc.cwiseAbs()).array() >= 0).count();
        dominated +=
            ((bounds.velocity.transpose() - jv.cwiseAbs()).array() >= 0).count();
    }
    CHECK(dominated >= static_cast<int>(0.95 * total));
}

TEST_CASE("fit_local_metrics: single component closed form") {
    GaussianSampler rng(61);
    const int p = 40, d = 2;
    Eigen::MatrixXd data(p, d);
    for (int i = 0; i < p; ++i) {
        data(i, 0) = 1.0 + 0.8 * rng();
        data(i, 1) = -2.0 + 1.5 * rng();
    }
    const MetricField field = fit_local_metrics(data, 1, 30, 5);
    REQUIRE(field.components.size() == 1);

    const Eigen::RowVectorXd mean = data.colwise().mean();
    CHECK((field.components[0].center - mean.transpose()).cwiseAbs().maxCoeff() <
          1e-8);
    const Eigen::MatrixXd centered = data.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / p;
    cov += (1e-6 * cov.trace() / d + 1e-12) * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd inv = cov.inverse();
    CHECK((field.components[0].tensor - inv).cwiseAbs().maxCoeff() <
          1e-8 * inv.cwiseAbs().maxCoeff());
}

TEST_CASE("fit_local_metrics: recovers well-separated blobs, deterministic") {
    GaussianSampler rng(67);
    const int per = 100;
    Eigen::MatrixXd data(2 * per, 2);
    for (int i = 0; i < per; ++i) {
        data(i, 0) = 0.0 + rng();
        data(i, 1) = 0.0 + rng();
        data(per + i, 0) = 10.0 + rng();
        data(per + i, 1) = 0.0 + rng();
    }
    const MetricField field = fit_local_metrics(data, 2, 40, 11);
    REQUIRE(field.components.size() == 2);
    double err0 = std::min(
        (field.components[0].center - Eigen::Vector2d(0, 0)).norm(),
        (field.components[0].center - Eigen::Vector2d(10, 0)).norm());
    double err1 = std::min(
        (field.components[1].center - Eigen::Vector2d(0, 0)).norm(),
        (field.components[1].center - Eigen::Vector2d(10, 0)).norm());
    CHECK(err0 < 0.2);
    CHECK(err1 < 0.2);
    CHECK((field.components[0].center - field.components[1].center).norm() > 5.0);

    const MetricField again = fit_local_metrics(data, 2, 40, 11);
    CHECK(again.rho == field.rho);
    for (int k = 0; k < 2; ++k) {
        CHECK((again.components[k].center - field.components[k].center)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
        CHECK((again.components[k].tensor - field.components[k].tensor)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
}

TEST_CASE("fit_local_metrics rejects insufficient data") {
    Eigen::MatrixXd tiny(3, 2);
    tiny.setZero();
    CHECK_THROWS_AS(fit_local_metrics(tiny, 2, 10, 1), ContractViolation);
}

TEST_CASE("singular metric reports an rhs evaluation error") {
    Eigen::MatrixXd rank1(2, 2);
    rank1 << 1.0, 1.0, 1.0, 1.0;  // PSD but singular
    MetricField field;
    field.components.push_back({Eigen::VectorXd::Zero(2), rank1});
    field.rho = 1.0;
    Eigen::VectorXd c(2), v(2);
    c << 0.1, 0.2;
    v << 1.0, 0.0;
    CHECK_THROWS_AS(geodesic_rhs(field, c, v), RhsEvaluationError);
}
