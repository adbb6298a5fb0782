#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace gpode {

/// A point on (or near) the solution curve: c(t) and c'(t).
struct CurvePoint {
    Eigen::VectorXd value;
    Eigen::VectorXd velocity;
};

/// Elementwise upper bounds on |df_j/dc_i| (value) and |df_j/dc'_i|
/// (velocity), stored input-dim x output-dim.
struct JacobianBounds {
    Eigen::MatrixXd value;
    Eigen::MatrixXd velocity;
};

/// Second-order ODE right-hand side c'' = f(c, c').
using OdeRhs =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Produces Jacobian bounds from a sketch of the expected solution curve.
using BoundsProvider =
    std::function<JacobianBounds(const std::vector<CurvePoint>&)>;

}  // namespace gpode
