#pragma once

#include <Eigen/Dense>
#include <string>

#include "gpode/metric_manifold.hpp"

namespace gpode {

/// Thrown on malformed input files; message carries position information.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Metric-field JSON schema (schema_version 1):
/// {"schema_version":1, "rho": <float>,
///  "components":[{"center":[...], "tensor":[[...]]}]}
/// Tensors are stored row-major and validated PSD on load.
MetricField metric_from_json(const std::string& text);
std::string metric_to_json(const MetricField& field);

MetricField load_metric_json(const std::string& path);
void save_metric_json(const std::string& path, const MetricField& field);

/// Comma-separated numeric matrix; a single leading header row is detected by
/// a non-numeric first row and skipped.
Eigen::MatrixXd load_csv(const std::string& path);

}  // namespace gpode
