#pragma once

#include <Eigen/Dense>

#include <string>

namespace fedmuon {

// Column-major dense storage; serialization converts to row-major explicitly.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline bool same_shape(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

inline std::string shape_string(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace fedmuon
