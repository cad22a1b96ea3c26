#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "dwellcert/types.hpp"

namespace dwellcert {

/// Piecewise-linear matrix-valued function of the timer tau.
///
/// Node values are interpolated linearly on each segment and extended as a
/// constant beyond the last node. A constant matrix is stored as a degenerate
/// two-node grid so every caller handles the timer-dependent case uniformly.
template <typename Scalar>
class MatrixGridFn {
 public:
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  MatrixGridFn() = default;

  MatrixGridFn(std::vector<Scalar> grid, std::vector<MatrixType> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (grid_.size() < 2) throw GridError("grid needs at least 2 nodes");
    if (grid_.size() != values_.size())
      throw GridError("grid/value count mismatch");
    if (grid_.front() != Scalar(0)) throw GridError("grid must start at 0");
    for (std::size_t i = 1; i < grid_.size(); ++i)
      if (!(grid_[i] > grid_[i - 1]))
        throw GridError("grid must be strictly increasing");
    const Index r = values_.front().rows();
    const Index c = values_.front().cols();
    for (const auto& v : values_)
      if (v.rows() != r || v.cols() != c)
        throw DimensionError("node matrices must share dimensions");
  }

  /// Constant function on [0, horizon].
  static MatrixGridFn constant(const MatrixType& value, Scalar horizon = Scalar(1)) {
    return MatrixGridFn({Scalar(0), horizon}, {value, value});
  }

  Index rows() const { return values_.front().rows(); }
  Index cols() const { return values_.front().cols(); }
  Index nodes() const { return static_cast<Index>(grid_.size()); }
  Index segments() const { return nodes() - 1; }
  Scalar horizon() const { return grid_.back(); }
  const std::vector<Scalar>& grid() const { return grid_; }
  const std::vector<MatrixType>& values() const { return values_; }
  const MatrixType& value(Index node) const { return values_[static_cast<std::size_t>(node)]; }
  Scalar node_at(Index node) const { return grid_[static_cast<std::size_t>(node)]; }

  /// Index of the segment containing tau; the last segment for tau >= horizon.
  Index segment_index(Scalar tau) const {
    if (tau < Scalar(0)) throw OrderingError("tau must be nonnegative");
    if (tau >= grid_.back()) return segments() - 1;
    Index lo = 0, hi = segments() - 1;
    while (lo < hi) {
      const Index mid = (lo + hi + 1) / 2;
      if (grid_[static_cast<std::size_t>(mid)] <= tau)
        lo = mid;
      else
        hi = mid - 1;
    }
    return lo;
  }

  /// Linear interpolation; exact node hits return the stored matrix bitwise,
  /// tau beyond the last node returns the last node value.
  MatrixType eval(Scalar tau) const {
    if (tau < Scalar(0)) throw OrderingError("tau must be nonnegative");
    if (tau >= grid_.back()) return values_.back();
    const Index s = segment_index(tau);
    const auto si = static_cast<std::size_t>(s);
    if (tau == grid_[si]) return values_[si];
    const Scalar w = (tau - grid_[si]) / (grid_[si + 1] - grid_[si]);
    return (Scalar(1) - w) * values_[si] + w * values_[si + 1];
  }

  /// Constant slope of segment seg; zero matrix conceptually beyond the grid.
  MatrixType segment_slope(Index seg) const {
    const auto s = static_cast<std::size_t>(seg);
    return (values_[s + 1] - values_[s]) / (grid_[s + 1] - grid_[s]);
  }

  /// One-sided derivatives. They differ exactly at interior nodes where the
  /// PWL function has a kink; beyond the horizon both are zero.
  MatrixType right_derivative(Scalar tau) const {
    if (tau >= grid_.back()) return MatrixType::Zero(rows(), cols());
    return segment_slope(segment_index(tau));
  }
  MatrixType left_derivative(Scalar tau) const {
    if (tau <= Scalar(0)) return segment_slope(0);
    if (tau > grid_.back()) return MatrixType::Zero(rows(), cols());
    const Index s = segment_index(tau);
    const auto si = static_cast<std::size_t>(s);
    if (tau == grid_[si] && s > 0) return segment_slope(s - 1);
    if (tau == grid_.back()) return segment_slope(segments() - 1);
    return segment_slope(s);
  }

  bool is_constant(Scalar tol = Scalar(0)) const {
    for (std::size_t i = 1; i < values_.size(); ++i)
      if (((values_[i] - values_[0]).array().abs() > tol).any()) return false;
    return true;
  }

 private:
  std::vector<Scalar> grid_;
  std::vector<MatrixType> values_;
};

using GridFn = MatrixGridFn<double>;

/// Uniform node vector 0, T/segments, ..., T. Computed as (i*T)/segments so
/// nested refinements (4x segments) reproduce coarse nodes bit-exactly.
inline std::vector<double> uniform_grid(double horizon, Index segments) {
  if (segments < 1) throw GridError("need at least one segment");
  if (!(horizon > 0)) throw GridError("horizon must be positive");
  std::vector<double> g(static_cast<std::size_t>(segments) + 1);
  for (Index i = 0; i <= segments; ++i)
    g[static_cast<std::size_t>(i)] = (static_cast<double>(i) * horizon) / static_cast<double>(segments);
  return g;
}

/// Uniform grid on [0, horizon] that contains `anchor` as an exact node
/// (inserted if the uniform construction misses it).
inline std::vector<double> uniform_grid_with(double horizon, Index segments, double anchor) {
  std::vector<double> g = uniform_grid(horizon, segments);
  for (double v : g)
    if (v == anchor) return g;
  if (anchor <= 0.0 || anchor >= horizon) throw GridError("anchor outside (0, horizon)");
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g[i] > anchor) {
      g.insert(g.begin() + static_cast<std::ptrdiff_t>(i), anchor);
      return g;
    }
  }
  return g;
}

/// Sample a PWL function of the timer onto a grid.
template <typename Scalar, typename Fn>
MatrixGridFn<Scalar> sample_grid_fn(const std::vector<Scalar>& grid, Fn&& fn) {
  std::vector<typename MatrixGridFn<Scalar>::MatrixType> vals;
  vals.reserve(grid.size());
  for (Scalar tau : grid) vals.push_back(fn(tau));
  return MatrixGridFn<Scalar>(grid, std::move(vals));
}

}  // namespace dwellcert
