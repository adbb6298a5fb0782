// Integration tests driving the installed CLI binary end to end. The binary
// path arrives via the GPODE_CLI environment variable set by CTest.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "gpode/metric_io.hpp"
#include "gpode/random.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

std::string cli_path() {
    const char* env = std::getenv("GPODE_CLI");
    REQUIRE_MESSAGE(env != nullptr, "GPODE_CLI must point at the binary");
    return env;
}

RunResult run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>/dev/null";
    std::array<char, 4096> buffer{};
    std::string output;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::fgets(buffer.data(), buffer.size(), pipe)) output += buffer.data();
    const int status = pclose(pipe);
    return {WEXITSTATUS(status), output};
}

fs::path sandbox() {
    const fs::path dir = fs::temp_directory_path() / "gpode_cli_test";
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path make_cluster_csv() {
    const fs::path path = sandbox() / "clusters.csv";
    gpode::GaussianSampler rng(7);
    std::stringstream ss;
    ss << "x,y\n";
    const double centers[3][2] = {{0.0, 0.0}, {2.2, 0.4}, {1.0, 1.8}};
    for (const auto& center : centers) {
        for (int i = 0; i < 20; ++i) {
            ss << center[0] + 0.45 * rng() << "," << center[1] + 0.45 * rng()
               << "\n";
        }
    }
    write_file(path, ss.str());
    return path;
}

fs::path make_identity_metric() {
    const fs::path path = sandbox() / "identity.json";
    gpode::MetricField field;
    field.components.push_back(
        {Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)});
    field.rho = 1.0;
    gpode::save_metric_json(path.string(), field);
    return path;
}

json strip_timing(json doc) {
    doc.erase("timing_seconds");
    if (doc.contains("pairs")) {
        for (json& row : doc["pairs"]) {
            row.erase("prob_seconds");
            row.erase("oracle_seconds");
        }
        doc["summary"].erase("prob_seconds_total");
        doc["summary"].erase("oracle_seconds_total");
        doc["summary"].erase("runtime_ratio");
    }
    return doc;
}

}  // namespace

TEST_CASE("fit-metric: schema, summary, byte-identical reruns") {
    const fs::path data = make_cluster_csv();
    const fs::path out1 = sandbox() / "metric1.json";
    const fs::path out2 = sandbox() / "metric2.json";
    const std::string flags = " --components 3 --iters 30 --seed 7 ";

    CHECK(run("fit-metric --data " + data.string() + flags + "--out " +
              out1.string())
              .exit_code == 0);
    CHECK(run("fit-metric --data " + data.string() + flags + "--out " +
              out2.string())
              .exit_code == 0);
    CHECK(slurp(out1) == slurp(out2));

    const json doc = json::parse(slurp(out1));
    CHECK(doc["schema_version"] == 1);
    CHECK(doc["rho"].is_number());
    REQUIRE(doc["components"].size() == 3);
    for (const json& comp : doc["components"]) {
        CHECK(comp["center"].size() == 2);
        CHECK(comp["tensor"].size() == 2);
        CHECK(comp["tensor"][0].size() == 2);
    }
    // and the file loads through the library validator
    CHECK_NOTHROW(gpode::load_metric_json(out1.string()));
}

TEST_CASE("fit-metric: single component equals the global inverse covariance") {
    const fs::path data = make_cluster_csv();
    const fs::path out = sandbox() / "metric_r1.json";
    CHECK(run("fit-metric --data " + data.string() +
              " --components 1 --iters 5 --seed 1 --out " + out.string())
              .exit_code == 0);
    const gpode::MetricField field = gpode::load_metric_json(out.string());
    const Eigen::MatrixXd data_m = gpode::load_csv(data.string());
    const Eigen::RowVectorXd mean = data_m.colwise().mean();
    const Eigen::MatrixXd centered = data_m.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / data_m.rows();
    cov += (1e-6 * cov.trace() / 2 + 1e-12) * Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd want = cov.inverse();
    CHECK((field.components[0].tensor - want).cwiseAbs().maxCoeff() <
          1e-8 * want.cwiseAbs().maxCoeff());
}

TEST_CASE("solve: identity metric straight line with tight bands") {
    const fs::path metric = make_identity_metric();
    const fs::path out = sandbox() / "solve_line.json";
    const RunResult res =
        run("solve --kind bvp --metric " + metric.string() +
            " --start 0,0 --end 1,1 --lambda fixed:1.0 --seed 1 --out " +
            out.string());
    CHECK(res.exit_code == 0);

    const json doc = json::parse(slurp(out));
    CHECK(doc["schema_version"] == 1);
    REQUIRE(doc["grid_t"].size() == 101);
    REQUIRE(doc["mean"].size() == 101);
    REQUIRE(doc["two_sigma"].size() == 101);
    for (int i = 0; i <= 100; ++i) {
        const double t = doc["grid_t"][i].get<double>();
        CHECK(std::abs(doc["mean"][i][0].get<double>() - t) < 1e-6);
        CHECK(std::abs(doc["mean"][i][1].get<double>() - t) < 1e-6);
        CHECK(doc["two_sigma"][i][0].get<double>() < 1e-3);
        CHECK(doc["two_sigma"][i][1].get<double>() < 1e-3);
    }
    CHECK(doc["lengths"]["mean"].get<double>() ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-4));
    CHECK(doc["report"]["lambda_sq"].get<double>() == 1.0);
}

TEST_CASE("solve: seeded runs are bit-reproducible modulo timing") {
    const fs::path data = make_cluster_csv();
    const fs::path metric = sandbox() / "metric_rep.json";
    run("fit-metric --data " + data.string() +
        " --components 3 --iters 30 --seed 7 --out " + metric.string());

    const fs::path out1 = sandbox() / "rep1.json";
    const fs::path out2 = sandbox() / "rep2.json";
    const std::string common = "solve --kind bvp --metric " + metric.string() +
                               " --start 0,0 --end 2,0.5 --data " + data.string() +
                               " --lambda golden --n-points 10 --seed 5 --out ";
    CHECK(run(common + out1.string()).exit_code == 0);
    CHECK(run(common + out2.string()).exit_code == 0);
    CHECK(strip_timing(json::parse(slurp(out1))) ==
          strip_timing(json::parse(slurp(out2))));
}

TEST_CASE("solve: ivp and uncertain endpoints are accepted") {
    const fs::path metric = make_identity_metric();
    const fs::path out = sandbox() / "solve_ivp.json";
    CHECK(run("solve --kind ivp --metric " + metric.string() +
              " --start 0,0 --velocity 1,0.5 --lambda fixed:1.0 --out " +
              out.string())
              .exit_code == 0);
    const json doc = json::parse(slurp(out));
    CHECK(std::abs(doc["mean"][100][0].get<double>() - 1.0) < 1e-5);
    CHECK(std::abs(doc["mean"][100][1].get<double>() - 0.5) < 1e-5);

    const fs::path out2 = sandbox() / "solve_unc.json";
    const RunResult res =
        run("solve --kind bvp --metric " + metric.string() +
            " --start 0,0 --end 1,1 --uncertain-end 0.01 --lambda fixed:1.0 "
            "--out " +
            out2.string());
    CHECK(res.exit_code == 0);
    const json doc2 = json::parse(slurp(out2));
    // uncertainty at the end point shows up in the band
    CHECK(doc2["two_sigma"][100][0].get<double>() > 0.05);
    CHECK(doc2["config"]["end_cov"][0][0].get<double>() ==
          doctest::Approx(0.01));
}

TEST_CASE("usage errors exit with code 2") {
    const fs::path metric = make_identity_metric();
    // bvp without --end
    CHECK(run("solve --kind bvp --metric " + metric.string() +
              " --start 0,0 --out /tmp/x.json")
              .exit_code == 2);
    // malformed CSV
    const fs::path bad = sandbox() / "bad.csv";
    write_file(bad, "a,b\n1.0,2.0\n3.0,oops\n");
    CHECK(run("fit-metric --data " + bad.string() + " --components 1 --out " +
              (sandbox() / "nope.json").string())
              .exit_code == 2);
    // insufficient data for the requested component count
    const fs::path tiny = sandbox() / "tiny.csv";
    write_file(tiny, "0.0,0.0\n1.0,1.0\n2.0,2.0\n");
    CHECK(run("fit-metric --data " + tiny.string() + " --components 2 --out " +
              (sandbox() / "nope2.json").string())
              .exit_code == 2);
    // empty pairs file
    const fs::path empty = sandbox() / "empty.csv";
    write_file(empty, "");
    CHECK(run("compare --metric " + metric.string() + " --pairs " +
              empty.string() + " --out " + (sandbox() / "nope3.json").string())
              .exit_code == 2);
    // unknown subcommand
    CHECK(run("frobnicate").exit_code == 2);
}

TEST_CASE("compare: identity metric gives full coverage and exact lengths") {
    const fs::path metric = make_identity_metric();
    const fs::path pairs = sandbox() / "pairs.csv";
    write_file(pairs, "0,0,1,0\n0,0,0.5,0.5\n1,1,0,0.5\n");
    const fs::path out = sandbox() / "cmp.json";
    const RunResult res =
        run("compare --metric " + metric.string() + " --pairs " + pairs.string() +
            " --lambda fixed:1.0 --n-samples 2000 --seed 3 --out " + out.string());
    CHECK(res.exit_code == 0);

    const json doc = json::parse(slurp(out));
    CHECK(doc["summary"]["coverage"].get<double>() == 1.0);
    REQUIRE(doc["pairs"].size() == 3);
    const double expected[3] = {1.0, std::sqrt(0.5), std::hypot(1.0, 0.5)};
    for (int i = 0; i < 3; ++i) {
        CHECK(doc["pairs"][i]["prob_length_mean"].get<double>() ==
              doctest::Approx(expected[i]).epsilon(1e-6));
        CHECK(doc["pairs"][i]["oracle_length"].get<double>() ==
              doctest::Approx(expected[i]).epsilon(1e-6));
    }
    // the stdout table mentions coverage
    CHECK(res.output.find("coverage") != std::string::npos);
}

TEST_CASE("mean and pga emit their documents") {
    const fs::path data = make_cluster_csv();
    const fs::path metric = make_identity_metric();
    const fs::path mean_out = sandbox() / "mean.json";
    const RunResult mean_res =
        run("mean --data " + data.string() + " --metric " + metric.string() +
            " --alpha 1.0 --iters 2 --n-samples 32 --n-points 8 "
            "--lambda fixed:1.0 --seed 2 --out " +
            mean_out.string());
    CHECK(mean_res.exit_code == 0);
    const json mean_doc = json::parse(slurp(mean_out));
    CHECK(mean_doc["command"] == "mean");
    CHECK(mean_doc["iterates"].size() >= 2);
    CHECK(mean_doc["converged"].is_boolean());

    // euclidean mean equals the arithmetic mean
    const Eigen::MatrixXd data_m = gpode::load_csv(data.string());
    const Eigen::RowVectorXd want = data_m.colwise().mean();
    const json last = mean_doc["iterates"].back()["mean"];
    CHECK(std::abs(last[0].get<double>() - want(0)) < 1e-3);
    CHECK(std::abs(last[1].get<double>() - want(1)) < 1e-3);

    const fs::path pga_out = sandbox() / "pga.json";
    const RunResult pga_res =
        run("pga --data " + data.string() + " --metric " + metric.string() +
            " --alpha 1.0 --iters 1 --n-samples 32 --n-points 8 "
            "--lambda fixed:1.0 --seed 2 --out " +
            pga_out.string());
    CHECK(pga_res.exit_code == 0);
    const json pga_doc = json::parse(slurp(pga_out));
    CHECK(pga_doc["directions"].size() == 2);
    CHECK(pga_doc["eigenvalues"].size() == 2);
    CHECK(pga_doc["principal_curve"]["forward"]["mean"].size() == 101);
    CHECK(pga_doc["principal_curve"]["backward"]["mean"].size() == 101);
}

TEST_CASE("recorded fixtures: solve and mean reproduce bit-for-bit") {
    const char* fixtures = std::getenv("GPODE_FIXTURES");
    REQUIRE_MESSAGE(fixtures != nullptr, "GPODE_FIXTURES must point at tests/fixtures");
    const fs::path dir = fixtures;
    const fs::path data = dir / "benchmark_data.csv";
    const fs::path metric = dir / "benchmark_metric.json";

    // the committed metric is itself a fit-metric fixture
    const fs::path metric_out = sandbox() / "fixture_metric.json";
    CHECK(run("fit-metric --data " + data.string() +
              " --components 3 --iters 40 --seed 7 --out " + metric_out.string())
              .exit_code == 0);
    CHECK(json::parse(slurp(metric_out)) == json::parse(slurp(metric)));

    const fs::path solve_out = sandbox() / "fixture_solve.json";
    CHECK(run("solve --kind bvp --metric " + metric.string() +
              " --start 0,0 --end 2,0.5 --data " + data.string() +
              " --n-points 10 --lambda golden --seed 5 --out " +
              solve_out.string())
              .exit_code == 0);
    // input paths echoed in the config differ per checkout; drop them
    const auto normalize = [](json doc) {
        doc.erase("timing_seconds");
        doc["config"].erase("data");
        doc["config"].erase("metric");
        return doc;
    };
    CHECK(normalize(json::parse(slurp(solve_out))) ==
          json::parse(slurp(dir / "solve_bvp.json")));

    const fs::path mean_out = sandbox() / "fixture_mean.json";
    CHECK(run("mean --data " + data.string() + " --metric " + metric.string() +
              " --alpha 0.5 --iters 5 --n-points 10 --n-samples 32 "
              "--lambda fixed:1.0 --seed 5 --out " +
              mean_out.string())
              .exit_code == 0);
    CHECK(normalize(json::parse(slurp(mean_out))) ==
          json::parse(slurp(dir / "mean.json")));
}
