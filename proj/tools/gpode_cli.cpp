// gpode command line tool: metric fitting, probabilistic geodesic solves,
// Riemannian means and PGA, and comparison against the classical oracle.
// Exit codes: 0 success, 1 numerical failure, 2 usage error.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "gpode/metric_io.hpp"
#include "gpode/random.hpp"
#include "gpode/reference_oracle.hpp"
#include "gpode/riemann_stats.hpp"

using json = nlohmann::json;
using namespace gpode;

namespace {

enum ExitCode { kOk = 0, kNumericalFailure = 1, kUsageError = 2 };

int log_level() {
    const char* env = std::getenv("GPODE_LOG");
    if (!env) return 1;
    const std::string v = env;
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << msg << "\n";
}

void debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[debug] " << msg << "\n";
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        try {
            std::size_t used = 0;
            const double value = std::stod(token, &used);
            while (used < token.size() && std::isspace(token[used])) ++used;
            if (used != token.size()) throw std::invalid_argument(token);
            out.push_back(value);
        } catch (const std::exception&) {
            throw ParseError("cannot parse number '" + token + "'");
        }
    }
    if (out.empty()) throw ParseError("empty number list");
    return out;
}

Eigen::VectorXd parse_vector(const std::string& text, const char* what) {
    const std::vector<double> nums = parse_number_list(text);
    Eigen::VectorXd v(nums.size());
    for (std::size_t i = 0; i < nums.size(); ++i) v[i] = nums[i];
    if (!v.allFinite()) throw ParseError(std::string(what) + ": non-finite entry");
    return v;
}

/// A covariance flag accepts either a single scalar s (meaning s * I) or all
/// D*D entries row-major.
Eigen::MatrixXd parse_cov(const std::string& text, int d, const char* what) {
    const std::vector<double> nums = parse_number_list(text);
    if (nums.size() == 1) {
        return nums[0] * Eigen::MatrixXd::Identity(d, d);
    }
    if (static_cast<int>(nums.size()) != d * d) {
        throw ParseError(std::string(what) + ": expected 1 or " +
                         std::to_string(d * d) + " entries");
    }
    Eigen::MatrixXd cov(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) cov(i, j) = nums[i * d + j];
    return cov;
}

json vector_to_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write output file: " + path);
    out << doc.dump(2) << "\n";
}

/// Shared solver/statistics flags, mirroring the library config field names.
struct CommonOpts {
    int n_points = 20;
    std::string grid = "auto";
    int refine_passes = 2;
    std::string lambda = "golden";
    double bound_safety = 2.0;
    int n_samples = 100;
    std::uint64_t seed = 0;
    std::string data_path;

    void attach(CLI::App* cmd, bool with_data = true) {
        cmd->add_option("--n-points", n_points, "Representer points per solve");
        cmd->add_option("--grid", grid, "Grid kind: auto|sigmoid|linear")
            ->check(CLI::IsMember({"auto", "sigmoid", "linear"}));
        cmd->add_option("--refine-passes", refine_passes, "Refinement passes");
        cmd->add_option("--lambda", lambda,
                        "Length-scale search: golden|newton|fixed:<value>");
        cmd->add_option("--bound-safety", bound_safety,
                        "Safety factor on Jacobian bounds");
        cmd->add_option("--n-samples", n_samples, "Posterior samples per estimate");
        cmd->add_option("--seed", seed, "Random seed");
        if (with_data) {
            cmd->add_option("--data", data_path,
                            "Dataset CSV (drives the output covariance scale)");
        }
    }

    SolverConfig solver_config() const {
        SolverConfig cfg;
        cfg.n_points = n_points;
        if (grid == "sigmoid") cfg.grid_kind = GridKind::Sigmoid;
        if (grid == "linear") cfg.grid_kind = GridKind::Linear;
        cfg.refine_passes = refine_passes;
        cfg.bound_safety = bound_safety;
        cfg.seed = seed;
        if (lambda == "golden") {
            cfg.lambda_search = LambdaSearch::golden();
        } else if (lambda == "newton") {
            cfg.lambda_search = LambdaSearch::newton();
        } else if (lambda.rfind("fixed:", 0) == 0) {
            try {
                cfg.lambda_search = LambdaSearch::fixed(std::stod(lambda.substr(6)));
            } catch (const std::exception&) {
                throw ParseError("cannot parse --lambda value: " + lambda);
            }
        } else {
            throw ParseError("unknown --lambda mode: " + lambda);
        }
        cfg.validate();
        return cfg;
    }

    json echo() const {
        json j;
        j["n_points"] = n_points;
        j["grid"] = grid;
        j["refine_passes"] = refine_passes;
        j["lambda"] = lambda;
        j["bound_safety"] = bound_safety;
        j["n_samples"] = n_samples;
        j["seed"] = seed;
        if (!data_path.empty()) j["data"] = data_path;
        return j;
    }
};

json report_to_json(const SolveReport& report) {
    json j;
    j["grid"] = report.grid;
    j["lambda_sq"] = report.lambda_sq_final;
    j["v"] = matrix_to_json(report.v_used);
    j["refine_passes"] = report.refine_passes_done;
    json trace = json::array();
    for (const auto& [l2, ev] : report.evidence_trace) {
        trace.push_back(json::array({l2, ev}));
    }
    j["evidence_trace"] = std::move(trace);
    json error_covs = json::array();
    for (const Eigen::MatrixXd& lambda : report.error_covs) {
        error_covs.push_back(matrix_to_json(lambda));
    }
    j["error_covs"] = std::move(error_covs);
    return j;
}

/// 101-point curve summary: posterior mean and pointwise 2 sigma bands.
json curve_summary(const CurveBelief& belief) {
    json grid_t = json::array(), mean = json::array(), band = json::array();
    for (int i = 0; i <= 100; ++i) {
        const double t = i / 100.0;
        grid_t.push_back(t);
        mean.push_back(vector_to_json(belief.mean({t, 0})));
        const Eigen::MatrixXd cov = belief.cov({t, 0}, {t, 0});
        band.push_back(
            vector_to_json(2.0 * cov.diagonal().cwiseMax(0.0).cwiseSqrt()));
    }
    json j;
    j["grid_t"] = std::move(grid_t);
    j["mean"] = std::move(mean);
    j["two_sigma"] = std::move(band);
    return j;
}

Eigen::MatrixXd sample_cov_of(const Eigen::MatrixXd& data) {
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - mean;
    const double denom = std::max<double>(1, data.rows() - 1);
    return centered.transpose() * centered / denom;
}

// ---------------------------------------------------------------- fit-metric

struct FitMetricArgs {
    std::string data_path, out_path;
    int components = 3;
    int iters = 50;
    std::uint64_t seed = 0;
    double rho = 0.0;
    bool diagonal = false;
};

int run_fit_metric(const FitMetricArgs& args) {
    const Eigen::MatrixXd data = load_csv(args.data_path);
    FitOptions options;
    options.diagonal = args.diagonal;
    options.rho_override = args.rho;
    const MetricField field =
        fit_local_metrics(data, args.components, args.iters, args.seed, options);
    save_metric_json(args.out_path, field);

    info("fit " + std::to_string(field.components.size()) + " local metrics (D=" +
         std::to_string(field.dim()) + ", rho=" + std::to_string(field.rho) +
         ") -> " + args.out_path);
    for (std::size_t r = 0; r < field.components.size(); ++r) {
        std::stringstream ss;
        ss << "  component " << r << " center ["
           << field.components[r].center.transpose() << "]";
        debug(ss.str());
    }
    return kOk;
}

// ---------------------------------------------------------------------- solve

struct SolveArgs {
    std::string kind = "bvp";
    std::string metric_path, out_path;
    std::string start, end, velocity;
    std::string start_cov, end_cov;
    int emit_samples = 0;
    CommonOpts common;
};

int run_solve(const SolveArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const MetricField field = load_metric_json(args.metric_path);
    const int d = field.dim();

    const Eigen::VectorXd start = parse_vector(args.start, "--start");
    if (start.size() != d) throw ParseError("--start dimension mismatch with metric");
    EndpointDist start_dist = EndpointDist::exact(start);
    if (!args.start_cov.empty()) {
        start_dist.cov = parse_cov(args.start_cov, d, "--start-cov");
    }

    ProblemSpec spec;
    spec.start = start_dist;
    if (args.kind == "bvp") {
        if (args.end.empty()) throw ParseError("bvp requires --end");
        spec.kind = ProblemKind::Bvp;
        spec.end = EndpointDist::exact(parse_vector(args.end, "--end"));
    } else {
        if (args.velocity.empty()) throw ParseError("ivp requires --velocity");
        spec.kind = ProblemKind::Ivp;
        spec.end = EndpointDist::exact(parse_vector(args.velocity, "--velocity"));
    }
    if (spec.end.mean.size() != d) throw ParseError("endpoint dimension mismatch");
    if (!args.end_cov.empty()) {
        spec.end.cov = parse_cov(args.end_cov, d, "--end-cov");
    }

    const Eigen::MatrixXd sample_cov =
        args.common.data_path.empty()
            ? Eigen::MatrixXd::Identity(d, d)
            : sample_cov_of(load_csv(args.common.data_path));

    const SolverConfig cfg = args.common.solver_config();
    auto [belief, report] =
        solve(spec, field_rhs(field), field_bounds(field, cfg.bound_safety), cfg,
              sample_cov);

    // lengths from joint posterior samples on the uniform grid
    std::vector<double> ts;
    for (int i = 0; i <= 100; ++i) ts.push_back(i / 100.0);
    const SampledCurves samples =
        sample_curves(belief, ts, args.common.n_samples, cfg.seed);
    const std::vector<double> lengths = curve_length(samples, field);
    double len_mean = 0.0, len_std = 0.0;
    for (double l : lengths) len_mean += l;
    len_mean /= lengths.size();
    for (double l : lengths) len_std += (l - len_mean) * (l - len_mean);
    len_std = std::sqrt(len_std / std::max<std::size_t>(1, lengths.size() - 1));

    json doc = curve_summary(belief);
    doc["schema_version"] = 1;
    doc["command"] = "solve";
    json config = args.common.echo();
    config["kind"] = args.kind;
    config["metric"] = args.metric_path;
    config["start"] = vector_to_json(spec.start.mean);
    config["start_cov"] = matrix_to_json(spec.start.cov);
    config[args.kind == "bvp" ? "end" : "velocity"] = vector_to_json(spec.end.mean);
    config["end_cov"] = matrix_to_json(spec.end.cov);
    doc["config"] = std::move(config);
    doc["lengths"] = {{"mean", len_mean}, {"std", len_std}};
    doc["report"] = report_to_json(report);
    if (args.emit_samples > 0) {
        const int count = std::min<int>(args.emit_samples, samples.values.size());
        json sample_json = json::array();
        for (int s = 0; s < count; ++s) {
            sample_json.push_back(matrix_to_json(samples.values[s]));
        }
        doc["samples"] = std::move(sample_json);
    }
    doc["timing_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(args.out_path, doc);

    info("solved " + args.kind + " (lambda_sq=" +
         std::to_string(report.lambda_sq_final) + ", length=" +
         std::to_string(len_mean) + " +- " + std::to_string(2.0 * len_std) +
         ") -> " + args.out_path);
    return kOk;
}

// ----------------------------------------------------------------- mean / pga

struct MeanArgs {
    std::string data_path, metric_path, out_path;
    double alpha = 0.5;
    int iters = 5;
    CommonOpts common;
};

StatsConfig stats_config(const CommonOpts& common, const Eigen::MatrixXd& data) {
    StatsConfig cfg;
    cfg.solver = common.solver_config();
    cfg.sample_cov = sample_cov_of(data);
    cfg.n_samples = common.n_samples;
    return cfg;
}

json endpoint_to_json(const EndpointDist& e) {
    return json{{"mean", vector_to_json(e.mean)}, {"cov", matrix_to_json(e.cov)}};
}

int run_mean(const MeanArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const MetricField field = load_metric_json(args.metric_path);
    const Eigen::MatrixXd data = load_csv(args.data_path);
    if (data.cols() != field.dim()) {
        throw ParseError("data dimension does not match metric");
    }
    const StatsConfig cfg = stats_config(args.common, data);
    const MeanTrace trace =
        karcher_mean(data, field, args.alpha, args.iters, cfg, args.common.seed);

    json doc;
    doc["schema_version"] = 1;
    doc["command"] = "mean";
    json config = args.common.echo();
    config["alpha"] = args.alpha;
    config["iters"] = args.iters;
    config["metric"] = args.metric_path;
    doc["config"] = std::move(config);
    json iterates = json::array();
    for (const EndpointDist& it : trace.iterates) {
        iterates.push_back(endpoint_to_json(it));
    }
    doc["iterates"] = std::move(iterates);
    doc["converged"] = trace.converged;
    doc["step_size"] = trace.step_size;
    doc["timing_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(args.out_path, doc);

    std::stringstream ss;
    ss << "mean after " << trace.iterates.size() - 1 << " iterations: ["
       << trace.iterates.back().mean.transpose() << "]"
       << (trace.converged ? " (converged)" : "");
    info(ss.str());
    return kOk;
}

int run_pga(const MeanArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const MetricField field = load_metric_json(args.metric_path);
    const Eigen::MatrixXd data = load_csv(args.data_path);
    if (data.cols() != field.dim()) {
        throw ParseError("data dimension does not match metric");
    }
    const StatsConfig cfg = stats_config(args.common, data);
    const MeanTrace trace =
        karcher_mean(data, field, args.alpha, args.iters, cfg, args.common.seed);
    const PgaResult result = pga(data, trace.iterates.back(), field, cfg,
                                 derive_seed(args.common.seed, 0x706761ULL));

    json doc;
    doc["schema_version"] = 1;
    doc["command"] = "pga";
    json config = args.common.echo();
    config["alpha"] = args.alpha;
    config["iters"] = args.iters;
    config["metric"] = args.metric_path;
    doc["config"] = std::move(config);
    doc["mean"] = endpoint_to_json(result.mean);
    doc["directions"] = matrix_to_json(result.directions);
    doc["eigenvalues"] = vector_to_json(result.eigenvalues);
    json dir_covs = json::array();
    for (const Eigen::MatrixXd& cov : result.direction_covs) {
        dir_covs.push_back(matrix_to_json(cov));
    }
    doc["direction_covs"] = std::move(dir_covs);
    doc["degenerate_directions"] = result.degenerate_directions;
    if (result.principal) {
        doc["principal_curve"] = {
            {"forward", curve_summary(result.principal->forward)},
            {"backward", curve_summary(result.principal->backward)}};
    }
    doc["timing_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(args.out_path, doc);

    std::stringstream ss;
    ss << "pga leading direction [" << result.directions.col(0).transpose()
       << "] explains "
       << 100.0 * result.eigenvalues(0) / std::max(result.eigenvalues.sum(), 1e-300)
       << "% of tangent variance";
    info(ss.str());
    return kOk;
}

// -------------------------------------------------------------------- compare

struct CompareArgs {
    std::string metric_path, pairs_path, out_path;
    int oracle_steps = 1000;
    CommonOpts common;
};

int run_compare(const CompareArgs& args) {
    const MetricField field = load_metric_json(args.metric_path);
    const int d = field.dim();
    const Eigen::MatrixXd pairs = load_csv(args.pairs_path);
    if (pairs.cols() != 2 * d) {
        throw ParseError("pairs CSV must have 2*D columns (a then b)");
    }

    const Eigen::MatrixXd sample_cov =
        args.common.data_path.empty()
            ? Eigen::MatrixXd::Identity(d, d)
            : sample_cov_of(load_csv(args.common.data_path));
    const SolverConfig base_cfg = args.common.solver_config();
    const OdeRhs rhs = field_rhs(field);

    json rows = json::array();
    int covered = 0, oracle_failures = 0, usable = 0;
    double prob_time = 0.0, oracle_time = 0.0;
    for (int i = 0; i < pairs.rows(); ++i) {
        const Eigen::VectorXd a = pairs.row(i).head(d);
        const Eigen::VectorXd b = pairs.row(i).tail(d);

        SolverConfig cfg = base_cfg;
        cfg.seed = derive_seed(base_cfg.seed, i);
        const ProblemSpec spec{ProblemKind::Bvp, EndpointDist::exact(a),
                               EndpointDist::exact(b)};

        const auto tp0 = std::chrono::steady_clock::now();
        auto [belief, report] =
            solve(spec, rhs, field_bounds(field, cfg.bound_safety), cfg, sample_cov);
        std::vector<double> ts;
        for (int k = 0; k <= 100; ++k) ts.push_back(k / 100.0);
        const std::vector<double> lengths = curve_length(
            sample_curves(belief, ts, args.common.n_samples, cfg.seed), field);
        double mean = 0.0, sd = 0.0;
        for (double l : lengths) mean += l;
        mean /= lengths.size();
        for (double l : lengths) sd += (l - mean) * (l - mean);
        sd = std::sqrt(sd / std::max<std::size_t>(1, lengths.size() - 1));
        const double t_prob =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tp0)
                .count();
        prob_time += t_prob;

        json row;
        row["pair"] = i;
        row["prob_length_mean"] = mean;
        row["prob_length_std"] = sd;
        row["prob_seconds"] = t_prob;
        row["lambda_sq"] = report.lambda_sq_final;

        const auto to0 = std::chrono::steady_clock::now();
        try {
            const OracleSolution sol = shooting_bvp(rhs, a, b, args.oracle_steps);
            const double t_oracle =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - to0)
                    .count();
            oracle_time += t_oracle;
            const double len = oracle_length(sol, field);
            row["oracle_length"] = len;
            row["oracle_seconds"] = t_oracle;
            row["oracle_iters"] = sol.shooting_iters;
            const bool inside = std::abs(len - mean) <= 2.0 * sd;
            row["covered"] = inside;
            ++usable;
            if (inside) ++covered;
        } catch (const OracleFailure& e) {
            ++oracle_failures;
            row["oracle_error"] = e.what();
        }
        rows.push_back(std::move(row));
        debug("pair " + std::to_string(i) + " done");
    }
    if (usable == 0) throw OracleFailure("oracle failed on every pair");

    json doc;
    doc["schema_version"] = 1;
    doc["command"] = "compare";
    json config = args.common.echo();
    config["metric"] = args.metric_path;
    config["pairs"] = args.pairs_path;
    config["oracle_steps"] = args.oracle_steps;
    doc["config"] = std::move(config);
    doc["pairs"] = std::move(rows);
    doc["summary"] = {
        {"pairs", static_cast<int>(pairs.rows())},
        {"oracle_failures", oracle_failures},
        {"coverage", static_cast<double>(covered) / usable},
        {"prob_seconds_total", prob_time},
        {"oracle_seconds_total", oracle_time},
        {"runtime_ratio", prob_time / std::max(oracle_time, 1e-12)},
    };
    write_json(args.out_path, doc);

    std::printf("%6s %14s %14s %14s %9s\n", "pair", "prob mean", "prob 2sd",
                "oracle", "covered");
    for (const json& row : doc["pairs"]) {
        if (row.contains("oracle_length")) {
            std::printf("%6d %14.6f %14.6f %14.6f %9s\n", row["pair"].get<int>(),
                        row["prob_length_mean"].get<double>(),
                        2.0 * row["prob_length_std"].get<double>(),
                        row["oracle_length"].get<double>(),
                        row["covered"].get<bool>() ? "yes" : "no");
        } else {
            std::printf("%6d %14.6f %14.6f %14s %9s\n", row["pair"].get<int>(),
                        row["prob_length_mean"].get<double>(),
                        2.0 * row["prob_length_std"].get<double>(), "-", "skip");
        }
    }
    std::printf("coverage %.1f%%  runtime ratio %.3f\n",
                100.0 * doc["summary"]["coverage"].get<double>(),
                doc["summary"]["runtime_ratio"].get<double>());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic geodesic solver and Riemannian statistics"};
    app.set_version_flag("--version", "gpode 0.1.0");
    app.require_subcommand(1);

    FitMetricArgs fit_args;
    CLI::App* fit = app.add_subcommand("fit-metric",
                                       "Fit local metrics to data by GMM EM");
    fit->add_option("--data", fit_args.data_path, "Input CSV")->required();
    fit->add_option("--components", fit_args.components, "Number of local metrics");
    fit->add_option("--iters", fit_args.iters, "EM iterations");
    fit->add_option("--seed", fit_args.seed, "Random seed");
    fit->add_option("--rho", fit_args.rho, "Weight decay (0 = automatic)");
    fit->add_flag("--diagonal", fit_args.diagonal, "Restrict to diagonal metrics");
    fit->add_option("--out", fit_args.out_path, "Output metric JSON")->required();

    SolveArgs solve_args;
    CLI::App* solve_cmd =
        app.add_subcommand("solve", "Solve a geodesic BVP or IVP probabilistically");
    solve_cmd->add_option("--kind", solve_args.kind, "bvp|ivp")
        ->check(CLI::IsMember({"bvp", "ivp"}));
    solve_cmd->add_option("--metric", solve_args.metric_path, "Metric JSON")
        ->required();
    solve_cmd->add_option("--start", solve_args.start, "Start point c(0)")
        ->required();
    solve_cmd->add_option("--end", solve_args.end, "End point c(1) (bvp)");
    solve_cmd->add_option("--velocity", solve_args.velocity,
                          "Initial velocity c'(0) (ivp)");
    solve_cmd->add_option("--start-cov", solve_args.start_cov,
                          "Start covariance: scalar or D*D row-major");
    solve_cmd
        ->add_option("--end-cov", solve_args.end_cov,
                     "End/velocity covariance: scalar or D*D row-major")
        ->option_text("TEXT");
    solve_cmd->add_option("--uncertain-end", solve_args.end_cov,
                          "Alias for --end-cov");
    solve_cmd->add_option("--emit-samples", solve_args.emit_samples,
                          "Include this many sampled curves in the output");
    solve_cmd->add_option("--out", solve_args.out_path, "Output JSON")->required();
    solve_args.common.attach(solve_cmd);

    MeanArgs mean_args;
    CLI::App* mean_cmd =
        app.add_subcommand("mean", "Karcher mean with uncertainty tracking");
    mean_cmd->add_option("--data", mean_args.data_path, "Input CSV")->required();
    mean_cmd->add_option("--metric", mean_args.metric_path, "Metric JSON")
        ->required();
    mean_cmd->add_option("--alpha", mean_args.alpha, "Gradient step size");
    mean_cmd->add_option("--iters", mean_args.iters, "Gradient iterations");
    mean_cmd->add_option("--out", mean_args.out_path, "Output JSON")->required();
    mean_args.common.attach(mean_cmd, /*with_data=*/false);

    MeanArgs pga_args;
    CLI::App* pga_cmd =
        app.add_subcommand("pga", "Principal geodesic analysis at the Karcher mean");
    pga_cmd->add_option("--data", pga_args.data_path, "Input CSV")->required();
    pga_cmd->add_option("--metric", pga_args.metric_path, "Metric JSON")->required();
    pga_cmd->add_option("--alpha", pga_args.alpha, "Mean gradient step size");
    pga_cmd->add_option("--iters", pga_args.iters, "Mean gradient iterations");
    pga_cmd->add_option("--out", pga_args.out_path, "Output JSON")->required();
    pga_args.common.attach(pga_cmd, /*with_data=*/false);

    CompareArgs compare_args;
    CLI::App* compare_cmd = app.add_subcommand(
        "compare", "Probabilistic lengths vs the RK4 shooting oracle");
    compare_cmd->add_option("--metric", compare_args.metric_path, "Metric JSON")
        ->required();
    compare_cmd->add_option("--pairs", compare_args.pairs_path,
                            "CSV of point pairs (a;b concatenated per row)")
        ->required();
    compare_cmd->add_option("--oracle-steps", compare_args.oracle_steps,
                            "RK4 steps for the oracle");
    compare_cmd->add_option("--out", compare_args.out_path, "Output JSON")
        ->required();
    compare_args.common.attach(compare_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (fit->parsed()) return run_fit_metric(fit_args);
        if (solve_cmd->parsed()) return run_solve(solve_args);
        if (mean_cmd->parsed()) return run_mean(mean_args);
        if (pga_cmd->parsed()) return run_pga(pga_args);
        if (compare_cmd->parsed()) return run_compare(compare_args);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        std::cout << json{{"error", e.what()}}.dump() << "\n";
        return kNumericalFailure;
    }
    return kUsageError;
}
