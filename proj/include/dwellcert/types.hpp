#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace dwellcert {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Inconsistent matrix/vector dimensions.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Violated argument ordering or range precondition (e.g. s > tau).
struct OrderingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Grid does not satisfy a structural requirement (missing node, not increasing).
struct GridError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A system failed an internal-positivity precondition.
struct PositivityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A matrix required to be invertible is numerically singular.
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Simulated state left the finite range.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, double last_finite_time)
      : std::runtime_error(what), last_finite_time(last_finite_time) {}
  double last_finite_time;
};

/// A trajectory or argument violates the active dwell-time specification.
struct DwellSpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Objects passed together do not belong together (wrong system for a certificate, ...).
struct StructuralError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A synthesized design failed its closed-loop re-verification.
struct RejectedDesignError : std::runtime_error {
  RejectedDesignError(const std::string& what, double worst_margin)
      : std::runtime_error(what), worst_margin(worst_margin) {}
  double worst_margin;
};

}  // namespace dwellcert
