// Python bindings for the probabilistic geodesic toolkit.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpode/metric_io.hpp"
#include "gpode/reference_oracle.hpp"
#include "gpode/riemann_stats.hpp"

namespace py = pybind11;
using namespace gpode;

namespace {

SolverConfig make_solver_config(int n_points, const std::string& grid,
                                int refine_passes, const std::string& lambda,
                                double fixed_lambda_sq, double bound_safety,
                                std::uint64_t seed) {
    SolverConfig cfg;
    cfg.n_points = n_points;
    if (grid == "sigmoid") cfg.grid_kind = GridKind::Sigmoid;
    else if (grid == "linear") cfg.grid_kind = GridKind::Linear;
    else if (grid != "auto") throw ContractViolation("grid must be auto|sigmoid|linear");
    cfg.refine_passes = refine_passes;
    if (lambda == "golden") cfg.lambda_search = LambdaSearch::golden();
    else if (lambda == "newton") cfg.lambda_search = LambdaSearch::newton();
    else if (lambda == "fixed") cfg.lambda_search = LambdaSearch::fixed(fixed_lambda_sq);
    else throw ContractViolation("lambda must be golden|newton|fixed");
    cfg.bound_safety = bound_safety;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

StatsConfig make_stats_config(const SolverConfig& solver,
                              const std::optional<Eigen::MatrixXd>& sample_cov,
                              int n_samples) {
    StatsConfig cfg;
    cfg.solver = solver;
    if (sample_cov) cfg.sample_cov = *sample_cov;
    cfg.n_samples = n_samples;
    return cfg;
}

EndpointDist make_endpoint(const Eigen::VectorXd& mean,
                           const std::optional<Eigen::MatrixXd>& cov) {
    if (!cov) return EndpointDist::exact(mean);
    EndpointDist e{mean, *cov};
    e.validate();
    return e;
}

py::dict report_dict(const SolveReport& report) {
    py::dict out;
    out["grid"] = report.grid;
    out["lambda_sq"] = report.lambda_sq_final;
    out["v"] = report.v_used;
    out["error_covs"] = report.error_covs;
    out["refine_passes"] = report.refine_passes_done;
    out["evidence_trace"] = report.evidence_trace;
    out["wall_seconds"] = report.wall_seconds;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Probabilistic ODE solver and Riemannian statistics";

    py::register_exception<ContractViolation>(m, "ContractViolation",
                                              PyExc_ValueError);
    py::register_exception<IllConditionedModel>(m, "IllConditionedModel",
                                                PyExc_ArithmeticError);
    py::register_exception<RhsEvaluationError>(m, "RhsEvaluationError",
                                               PyExc_ArithmeticError);
    py::register_exception<DegenerateGeodesic>(m, "DegenerateGeodesic",
                                               PyExc_ArithmeticError);
    py::register_exception<OptimizationFailed>(m, "OptimizationFailed",
                                               PyExc_ArithmeticError);
    py::register_exception<OracleFailure>(m, "OracleFailure",
                                          PyExc_ArithmeticError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    // kernel
    m.def(
        "k_eval",
        [](double t1, double t2, double lambda_sq, int d1, int d2) {
            return k_eval(t1, t2, {lambda_sq}, {d1, d2});
        },
        py::arg("t1"), py::arg("t2"), py::arg("lambda_sq") = 1.0,
        py::arg("d1") = 0, py::arg("d2") = 0,
        "Squared-exponential kernel derivative of order (d1, d2)");
    m.def(
        "k_dlambda2",
        [](double t1, double t2, double lambda_sq, int d1, int d2) {
            return k_dlambda2(t1, t2, {lambda_sq}, {d1, d2});
        },
        py::arg("t1"), py::arg("t2"), py::arg("lambda_sq") = 1.0,
        py::arg("d1") = 0, py::arg("d2") = 0);
    m.def(
        "k_d2lambda2",
        [](double t1, double t2, double lambda_sq, int d1, int d2) {
            return k_d2lambda2(t1, t2, {lambda_sq}, {d1, d2});
        },
        py::arg("t1"), py::arg("t2"), py::arg("lambda_sq") = 1.0,
        py::arg("d1") = 2, py::arg("d2") = 2);

    // metric field
    py::class_<LocalMetric>(m, "LocalMetric")
        .def(py::init<>())
        .def_readwrite("center", &LocalMetric::center)
        .def_readwrite("tensor", &LocalMetric::tensor);

    py::class_<MetricField>(m, "MetricField")
        .def(py::init<>())
        .def_readwrite("components", &MetricField::components)
        .def_readwrite("rho", &MetricField::rho)
        .def_property_readonly("dim", &MetricField::dim)
        .def("weights",
             [](const MetricField& f, const Eigen::VectorXd& x) {
                 return weights(f, x);
             })
        .def("metric",
             [](const MetricField& f, const Eigen::VectorXd& x) {
                 return metric(f, x);
             })
        .def("metric_grad",
             [](const MetricField& f, const Eigen::VectorXd& x) {
                 return metric_grad(f, x);
             })
        .def("geodesic_rhs",
             [](const MetricField& f, const Eigen::VectorXd& c,
                const Eigen::VectorXd& v) { return geodesic_rhs(f, c, v); })
        .def("to_json", [](const MetricField& f) { return metric_to_json(f); })
        .def_static("from_json",
                    [](const std::string& text) { return metric_from_json(text); })
        .def("save",
             [](const MetricField& f, const std::string& path) {
                 save_metric_json(path, f);
             })
        .def_static("load",
                    [](const std::string& path) { return load_metric_json(path); });

    m.def(
        "fit_local_metrics",
        [](const Eigen::MatrixXd& data, int components, int iters,
           std::uint64_t seed, bool diagonal, double rho) {
            FitOptions options;
            options.diagonal = diagonal;
            options.rho_override = rho;
            return fit_local_metrics(data, components, iters, seed, options);
        },
        py::arg("data"), py::arg("components"), py::arg("iters") = 50,
        py::arg("seed") = 0, py::arg("diagonal") = false, py::arg("rho") = 0.0,
        "Fit local metric tensors to data by Gaussian-mixture EM");

    // posterior curve belief
    py::class_<CurveBelief>(m, "CurveBelief")
        .def(
            "mean",
            [](const CurveBelief& b, double t, int order) {
                return b.mean({t, order});
            },
            py::arg("t"), py::arg("order") = 0)
        .def(
            "cov",
            [](const CurveBelief& b, double t1, double t2, int order1, int order2) {
                return b.cov({t1, order1}, {t2, order2});
            },
            py::arg("t1"), py::arg("t2"), py::arg("order1") = 0,
            py::arg("order2") = 0)
        .def(
            "sample",
            [](const CurveBelief& b, const std::vector<double>& ts, int count,
               std::uint64_t seed) {
                const SampledCurves s = sample_curves(b, ts, count, seed);
                py::list values, derivs;
                for (const auto& v : s.values) values.append(v);
                for (const auto& d : s.derivs) derivs.append(d);
                return py::make_tuple(values, derivs);
            },
            py::arg("ts"), py::arg("count"), py::arg("seed") = 0,
            "Joint posterior draws; returns (values, derivs) lists of n_t x D arrays")
        .def_property_readonly("lambda_sq",
                               [](const CurveBelief& b) {
                                   return b.length_scale().sq;
                               })
        .def_property_readonly("gram_digest", &CurveBelief::gram_digest);

    const auto solve_wrapper = [](const std::string& kind, const MetricField& field,
                                  const Eigen::VectorXd& start,
                                  const Eigen::VectorXd& end_or_velocity,
                                  const std::optional<Eigen::MatrixXd>& start_cov,
                                  const std::optional<Eigen::MatrixXd>& end_cov,
                                  const std::optional<Eigen::MatrixXd>& sample_cov,
                                  int n_points, const std::string& grid,
                                  int refine_passes, const std::string& lambda,
                                  double fixed_lambda_sq, double bound_safety,
                                  std::uint64_t seed) {
        ProblemSpec spec;
        spec.kind = kind == "bvp" ? ProblemKind::Bvp : ProblemKind::Ivp;
        spec.start = make_endpoint(start, start_cov);
        spec.end = make_endpoint(end_or_velocity, end_cov);
        const SolverConfig cfg =
            make_solver_config(n_points, grid, refine_passes, lambda,
                               fixed_lambda_sq, bound_safety, seed);
        const Eigen::MatrixXd s =
            sample_cov ? *sample_cov
                       : Eigen::MatrixXd::Identity(spec.dim(), spec.dim());
        auto [belief, report] = solve(spec, field_rhs(field),
                                      field_bounds(field, cfg.bound_safety), cfg, s);
        return py::make_tuple(std::move(belief), report_dict(report));
    };
    m.def("solve_bvp",
          [solve_wrapper](const MetricField& field, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b,
                          const std::optional<Eigen::MatrixXd>& start_cov,
                          const std::optional<Eigen::MatrixXd>& end_cov,
                          const std::optional<Eigen::MatrixXd>& sample_cov,
                          int n_points, const std::string& grid, int refine_passes,
                          const std::string& lambda, double fixed_lambda_sq,
                          double bound_safety, std::uint64_t seed) {
              return solve_wrapper("bvp", field, a, b, start_cov, end_cov,
                                   sample_cov, n_points, grid, refine_passes,
                                   lambda, fixed_lambda_sq, bound_safety, seed);
          },
          py::arg("field"), py::arg("start"), py::arg("end"),
          py::arg("start_cov") = std::nullopt, py::arg("end_cov") = std::nullopt,
          py::arg("sample_cov") = std::nullopt, py::arg("n_points") = 20,
          py::arg("grid") = "auto", py::arg("refine_passes") = 2,
          py::arg("lambda_search") = "golden", py::arg("fixed_lambda_sq") = 1.0,
          py::arg("bound_safety") = 2.0, py::arg("seed") = 0,
          "Probabilistic geodesic boundary value solve; returns (belief, report)");
    m.def("solve_ivp",
          [solve_wrapper](const MetricField& field, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& v,
                          const std::optional<Eigen::MatrixXd>& start_cov,
                          const std::optional<Eigen::MatrixXd>& velocity_cov,
                          const std::optional<Eigen::MatrixXd>& sample_cov,
                          int n_points, const std::string& grid, int refine_passes,
                          const std::string& lambda, double fixed_lambda_sq,
                          double bound_safety, std::uint64_t seed) {
              return solve_wrapper("ivp", field, a, v, start_cov, velocity_cov,
                                   sample_cov, n_points, grid, refine_passes,
                                   lambda, fixed_lambda_sq, bound_safety, seed);
          },
          py::arg("field"), py::arg("start"), py::arg("velocity"),
          py::arg("start_cov") = std::nullopt,
          py::arg("velocity_cov") = std::nullopt,
          py::arg("sample_cov") = std::nullopt, py::arg("n_points") = 20,
          py::arg("grid") = "auto", py::arg("refine_passes") = 2,
          py::arg("lambda_search") = "golden", py::arg("fixed_lambda_sq") = 1.0,
          py::arg("bound_safety") = 2.0, py::arg("seed") = 0,
          "Probabilistic geodesic initial value solve; returns (belief, report)");

    // statistics
    py::class_<TangentStatistic>(m, "TangentStatistic")
        .def_readonly("mean", &TangentStatistic::mean)
        .def_readonly("cov", &TangentStatistic::cov)
        .def_readonly("n_samples", &TangentStatistic::n_samples);

    m.def(
        "exp_map",
        [](const MetricField& field, const Eigen::VectorXd& a,
           const Eigen::VectorXd& v, const std::optional<Eigen::MatrixXd>& a_cov,
           const std::optional<Eigen::MatrixXd>& v_cov,
           const std::optional<Eigen::MatrixXd>& sample_cov, int n_points,
           const std::string& lambda, double fixed_lambda_sq, std::uint64_t seed) {
            const StatsConfig cfg = make_stats_config(
                make_solver_config(n_points, "auto", 2, lambda, fixed_lambda_sq,
                                   2.0, seed),
                sample_cov, 100);
            auto [endpoint, belief] = exp_map(make_endpoint(a, a_cov),
                                              make_endpoint(v, v_cov), field, cfg);
            return py::make_tuple(endpoint.mean, endpoint.cov, std::move(belief));
        },
        py::arg("field"), py::arg("start"), py::arg("velocity"),
        py::arg("start_cov") = std::nullopt, py::arg("velocity_cov") = std::nullopt,
        py::arg("sample_cov") = std::nullopt, py::arg("n_points") = 20,
        py::arg("lambda_search") = "golden", py::arg("fixed_lambda_sq") = 1.0,
        py::arg("seed") = 0,
        "Exponential map; returns (endpoint_mean, endpoint_cov, belief)");

    m.def(
        "log_map",
        [](const MetricField& field, const Eigen::VectorXd& a,
           const Eigen::VectorXd& b, const std::optional<Eigen::MatrixXd>& a_cov,
           const std::optional<Eigen::MatrixXd>& b_cov,
           const std::optional<Eigen::MatrixXd>& sample_cov, int n_samples,
           int n_points, const std::string& lambda, double fixed_lambda_sq,
           std::uint64_t seed) {
            const StatsConfig cfg = make_stats_config(
                make_solver_config(n_points, "auto", 2, lambda, fixed_lambda_sq,
                                   2.0, seed),
                sample_cov, n_samples);
            return log_map(make_endpoint(a, a_cov), make_endpoint(b, b_cov), field,
                           cfg, n_samples, seed);
        },
        py::arg("field"), py::arg("start"), py::arg("end"),
        py::arg("start_cov") = std::nullopt, py::arg("end_cov") = std::nullopt,
        py::arg("sample_cov") = std::nullopt, py::arg("n_samples") = 100,
        py::arg("n_points") = 20, py::arg("lambda_search") = "golden",
        py::arg("fixed_lambda_sq") = 1.0, py::arg("seed") = 0,
        "Sampled logarithm map statistic");

    m.def(
        "karcher_mean",
        [](const MetricField& field, const Eigen::MatrixXd& data, double alpha,
           int iters, int n_samples, int n_points, const std::string& lambda,
           double fixed_lambda_sq, std::uint64_t seed) {
            const StatsConfig cfg = make_stats_config(
                make_solver_config(n_points, "auto", 2, lambda, fixed_lambda_sq,
                                   2.0, seed),
                std::nullopt, n_samples);
            const MeanTrace trace = karcher_mean(data, field, alpha, iters, cfg, seed);
            py::list iterates;
            for (const EndpointDist& it : trace.iterates) {
                iterates.append(py::make_tuple(it.mean, it.cov));
            }
            py::dict out;
            out["iterates"] = iterates;
            out["converged"] = trace.converged;
            out["step_size"] = trace.step_size;
            return out;
        },
        py::arg("field"), py::arg("data"), py::arg("alpha") = 0.5,
        py::arg("iters") = 5, py::arg("n_samples") = 100, py::arg("n_points") = 20,
        py::arg("lambda_search") = "golden", py::arg("fixed_lambda_sq") = 1.0,
        py::arg("seed") = 0, "Karcher mean by tangent-space gradient descent");

    m.def(
        "pga",
        [](const MetricField& field, const Eigen::MatrixXd& data,
           const Eigen::VectorXd& mean, const std::optional<Eigen::MatrixXd>& mean_cov,
           int n_samples, int n_points, const std::string& lambda,
           double fixed_lambda_sq, std::uint64_t seed) {
            const StatsConfig cfg = make_stats_config(
                make_solver_config(n_points, "auto", 2, lambda, fixed_lambda_sq,
                                   2.0, seed),
                std::nullopt, n_samples);
            const PgaResult result =
                pga(data, make_endpoint(mean, mean_cov), field, cfg, seed);
            py::dict out;
            out["directions"] = result.directions;
            out["eigenvalues"] = result.eigenvalues;
            out["direction_covs"] = result.direction_covs;
            out["degenerate_directions"] = result.degenerate_directions;
            return out;
        },
        py::arg("field"), py::arg("data"), py::arg("mean"),
        py::arg("mean_cov") = std::nullopt, py::arg("n_samples") = 100,
        py::arg("n_points") = 20, py::arg("lambda_search") = "golden",
        py::arg("fixed_lambda_sq") = 1.0, py::arg("seed") = 0,
        "Principal geodesic analysis in the tangent space at a given mean");

    // classical oracle
    m.def(
        "rk4_ivp",
        [](const MetricField& field, const Eigen::VectorXd& a,
           const Eigen::VectorXd& v, int steps) {
            const OracleSolution sol = rk4_ivp(field_rhs(field), a, v, steps);
            py::dict out;
            out["times"] = sol.times;
            out["values"] = sol.values;
            out["derivs"] = sol.derivs;
            out["length"] = oracle_length(sol, field);
            return out;
        },
        py::arg("field"), py::arg("start"), py::arg("velocity"),
        py::arg("steps") = 1000, "Classical RK4 geodesic integration");
    m.def(
        "shooting_bvp",
        [](const MetricField& field, const Eigen::VectorXd& a,
           const Eigen::VectorXd& b, int steps, double tol, int max_iters) {
            const OracleSolution sol =
                shooting_bvp(field_rhs(field), a, b, steps, tol, max_iters);
            py::dict out;
            out["times"] = sol.times;
            out["values"] = sol.values;
            out["derivs"] = sol.derivs;
            out["length"] = oracle_length(sol, field);
            out["shooting_iters"] = sol.shooting_iters;
            return out;
        },
        py::arg("field"), py::arg("start"), py::arg("end"), py::arg("steps") = 1000,
        py::arg("tol") = 1e-9, py::arg("max_iters") = 50,
        "Classical shooting solution of the geodesic BVP");
}
