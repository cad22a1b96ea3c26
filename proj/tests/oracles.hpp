#pragma once

// Test-only oracles, kept independent of the library's computation paths.

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include "dwellcert/lp.hpp"

namespace oracles {

using dwellcert::Index;
using dwellcert::Matrix;
using dwellcert::Vector;

// Matrix exponential by scaling-and-squaring on the Taylor series; this is the
// independent reference for the RK4 transition-matrix integrator.
inline Matrix expm_series(const Matrix& A) {
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const Matrix T = A * scale;
  Matrix result = Matrix::Identity(A.rows(), A.cols());
  Matrix term = result;
  for (int k = 1; k < 60; ++k) {
    term = (term * T / k).eval();
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-20 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) result = (result * result).eval();
  return result;
}

struct VertexSolution {
  dwellcert::LpStatus status;
  Vector x;
  double objective = 0.0;
};

// Brute-force LP oracle for small problems: enumerate all n-subsets of the
// constraint set (rows plus finite bounds treated as rows), solve each square
// system, and keep the best feasible vertex. Sound for problems whose feasible
// set is a bounded polytope (use finite bounds on every variable).
inline VertexSolution brute_force_lp(const dwellcert::LpProblem& p) {
  const int n = p.num_vars();
  struct Row {
    Vector a;
    double b;
  };
  std::vector<Row> rows;
  for (const auto& r : p.rows()) {
    Vector a = Vector::Zero(n);
    for (const auto& [idx, c] : r.terms) a[idx] += c;
    rows.push_back({a, r.rhs});
  }
  for (int i = 0; i < n; ++i) {
    if (p.upper(i) < dwellcert::kInf) {
      Vector a = Vector::Zero(n);
      a[i] = 1.0;
      rows.push_back({a, p.upper(i)});
    }
    if (p.lower(i) > -dwellcert::kInf) {
      Vector a = Vector::Zero(n);
      a[i] = -1.0;
      rows.push_back({a, -p.lower(i)});
    }
  }
  const int m = static_cast<int>(rows.size());
  auto feasible = [&](const Vector& x) {
    for (const auto& r : rows)
      if (r.a.dot(x) > r.b + 1e-7) return false;
    return true;
  };

  VertexSolution best;
  best.status = dwellcert::LpStatus::Infeasible;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(n));
  auto recurse = [&](auto&& self, int start, int depth) -> void {
    if (depth == n) {
      Matrix A(n, n);
      Vector b(n);
      for (int i = 0; i < n; ++i) {
        A.row(i) = rows[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])].a;
        b[i] = rows[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])].b;
      }
      Eigen::FullPivLU<Matrix> lu(A);
      if (!lu.isInvertible()) return;
      const Vector x = lu.solve(b);
      if (!feasible(x)) return;
      const double obj = p.objective().dot(x);
      if (obj < best.objective) {
        best.status = dwellcert::LpStatus::Optimal;
        best.objective = obj;
        best.x = x;
      }
      return;
    }
    for (int i = start; i < m; ++i) {
      pick[static_cast<std::size_t>(depth)] = i;
      self(self, i + 1, depth + 1);
    }
  };
  recurse(recurse, 0, 0);
  return best;
}

}  // namespace oracles
