#include "gpode/metric_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace gpode {
namespace {

using nlohmann::json;

Eigen::MatrixXd tensor_from_json(const json& rows, int d, int index) {
    if (!rows.is_array() || static_cast<int>(rows.size()) != d) {
        throw ParseError("component " + std::to_string(index) +
                         ": tensor must be a DxD array of arrays");
    }
    Eigen::MatrixXd tensor(d, d);
    for (int i = 0; i < d; ++i) {
        const json& row = rows[i];
        if (!row.is_array() || static_cast<int>(row.size()) != d) {
            throw ParseError("component " + std::to_string(index) + ": tensor row " +
                             std::to_string(i) + " has wrong length");
        }
        for (int j = 0; j < d; ++j) tensor(i, j) = row[j].get<double>();
    }
    return tensor;
}

void check_psd(const Eigen::MatrixXd& tensor, int index) {
    const double scale = std::max(1.0, tensor.cwiseAbs().maxCoeff());
    if ((tensor - tensor.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw ParseError("component " + std::to_string(index) +
                         ": tensor is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tensor);
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
        throw ParseError("component " + std::to_string(index) +
                         ": tensor is not positive semidefinite");
    }
}

bool parse_double(const std::string& token, double& out) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    if (begin == end) return false;
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc() && result.ptr == end;
}

}  // namespace

MetricField metric_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("metric JSON: ") + e.what());
    }
    if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != 1) {
        throw ParseError("metric JSON: missing or unsupported schema_version");
    }
    if (!doc.contains("rho") || !doc.contains("components")) {
        throw ParseError("metric JSON: rho and components are required");
    }

    MetricField field;
    field.rho = doc["rho"].get<double>();
    const json& comps = doc["components"];
    if (!comps.is_array() || comps.empty()) {
        throw ParseError("metric JSON: components must be a nonempty array");
    }
    int d = -1;
    for (int index = 0; index < static_cast<int>(comps.size()); ++index) {
        const json& comp = comps[index];
        if (!comp.contains("center") || !comp.contains("tensor")) {
            throw ParseError("component " + std::to_string(index) +
                             ": center and tensor are required");
        }
        const json& center_json = comp["center"];
        if (!center_json.is_array() || center_json.empty()) {
            throw ParseError("component " + std::to_string(index) +
                             ": center must be a nonempty array");
        }
        if (d < 0) d = static_cast<int>(center_json.size());
        if (static_cast<int>(center_json.size()) != d) {
            throw ParseError("component " + std::to_string(index) +
                             ": center dimension mismatch");
        }
        Eigen::VectorXd center(d);
        for (int i = 0; i < d; ++i) center[i] = center_json[i].get<double>();
        Eigen::MatrixXd tensor = tensor_from_json(comp["tensor"], d, index);
        check_psd(tensor, index);
        field.components.push_back({std::move(center), std::move(tensor)});
    }
    try {
        field.validate();
    } catch (const ContractViolation& e) {
        throw ParseError(std::string("metric JSON: ") + e.what());
    }
    return field;
}

std::string metric_to_json(const MetricField& field) {
    field.validate();
    json doc;
    doc["schema_version"] = 1;
    doc["rho"] = field.rho;
    doc["components"] = json::array();
    for (const LocalMetric& comp : field.components) {
        json entry;
        entry["center"] = std::vector<double>(
            comp.center.data(), comp.center.data() + comp.center.size());
        json tensor = json::array();
        for (int i = 0; i < comp.tensor.rows(); ++i) {
            json row = json::array();
            for (int j = 0; j < comp.tensor.cols(); ++j) row.push_back(comp.tensor(i, j));
            tensor.push_back(std::move(row));
        }
        entry["tensor"] = std::move(tensor);
        doc["components"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

MetricField load_metric_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open metric file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return metric_from_json(buffer.str());
}

void save_metric_json(const std::string& path, const MetricField& field) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write metric file: " + path);
    out << metric_to_json(field);
}

Eigen::MatrixXd load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file: " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    int cols = -1;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string token;
        int col_no = 0;
        bool bad = false;
        int bad_col = 0;
        while (std::getline(ss, token, ',')) {
            ++col_no;
            double value = 0.0;
            if (!parse_double(token, value)) {
                bad = true;
                bad_col = col_no;
                break;
            }
            row.push_back(value);
        }
        if (bad) {
            if (first_data_line) {
                first_data_line = false;  // header row, skip
                continue;
            }
            throw ParseError("CSV parse error at row " + std::to_string(line_no) +
                             ", column " + std::to_string(bad_col));
        }
        first_data_line = false;
        if (cols < 0) cols = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != cols) {
            throw ParseError("CSV row " + std::to_string(line_no) +
                             " has inconsistent column count");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("CSV file has no data rows: " + path);

    Eigen::MatrixXd data(static_cast<int>(rows.size()), cols);
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        for (int j = 0; j < cols; ++j) data(i, j) = rows[i][j];
    }
    return data;
}

}  // namespace gpode
