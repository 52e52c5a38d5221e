#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cso {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid distribution, operator or hyperparameter values.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Dimension mismatch between a query point and the function it feeds.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError(what);
}

}  // namespace cso
