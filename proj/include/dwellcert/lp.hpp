#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dwellcert/types.hpp"

namespace dwellcert {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Minimize c'x subject to a_i'x <= b_i and lo <= x <= hi.
/// Rows are stored sparsely; the certificate LPs are large but very sparse.
class LpProblem {
 public:
  struct Row {
    std::vector<std::pair<int, double>> terms;
    double rhs = 0.0;
  };

  explicit LpProblem(int num_vars = 0) { resize(num_vars); }

  void resize(int num_vars) {
    num_vars_ = num_vars;
    objective_ = Vector::Zero(num_vars);
    lower_.assign(static_cast<std::size_t>(num_vars), -kInf);
    upper_.assign(static_cast<std::size_t>(num_vars), kInf);
    names_.assign(static_cast<std::size_t>(num_vars), std::string());
  }

  int num_vars() const { return num_vars_; }
  int num_rows() const { return static_cast<int>(rows_.size()); }

  void set_objective(int var, double coeff) { objective_[var] = coeff; }
  const Vector& objective() const { return objective_; }

  void set_bounds(int var, double lo, double hi) {
    if (lo > hi) throw OrderingError("variable lower bound exceeds upper bound");
    lower_[static_cast<std::size_t>(var)] = lo;
    upper_[static_cast<std::size_t>(var)] = hi;
  }
  double lower(int var) const { return lower_[static_cast<std::size_t>(var)]; }
  double upper(int var) const { return upper_[static_cast<std::size_t>(var)]; }

  void set_name(int var, std::string name) {
    names_[static_cast<std::size_t>(var)] = std::move(name);
  }
  const std::string& name(int var) const { return names_[static_cast<std::size_t>(var)]; }

  /// Adds the constraint sum(terms) <= rhs. Term indices must be in range.
  int add_row(std::vector<std::pair<int, double>> terms, double rhs) {
    for (const auto& [idx, coeff] : terms) {
      (void)coeff;
      if (idx < 0 || idx >= num_vars_) throw StructuralError("row term index out of range");
    }
    rows_.push_back({std::move(terms), rhs});
    return static_cast<int>(rows_.size()) - 1;
  }

  const std::vector<Row>& rows() const { return rows_; }

 private:
  int num_vars_ = 0;
  Vector objective_;
  std::vector<Row> rows_;
  std::vector<double> lower_, upper_;
  std::vector<std::string> names_;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective_value = 0.0;
  double max_constraint_violation = 0.0;
  long iterations = 0;
};

struct LpOptions {
  double tol = 1e-8;          // feasibility tolerance on the returned point
  long max_iterations = 0;    // 0: default (scaled with size), overridable by
                              // the DWELLCERT_LP_MAX_ITERS environment variable
};

/// Dense revised simplex behind a narrow interface (swappable backend).
/// Bland's rule kicks in as an anti-cycling fallback after a stall.
LpSolution solve(const LpProblem& p, const LpOptions& options = {});
inline LpSolution solve(const LpProblem& p, double tol) {
  LpOptions o;
  o.tol = tol;
  return solve(p, o);
}

/// max_i (a_i'x - b_i) over rows, and bound violations; <= 0 means feasible.
/// Used to re-verify certificates independently of the solver.
double feasibility_margin(const LpProblem& p, const Vector& x);

/// Textual dump (objective, rows, bounds) for debugging with external tools.
std::string dump_lp(const LpProblem& p);

}  // namespace dwellcert
