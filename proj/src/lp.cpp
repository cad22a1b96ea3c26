#include "dwellcert/lp.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <sstream>

namespace dwellcert {

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

double feasibility_margin(const LpProblem& p, const Vector& x) {
  if (x.size() != p.num_vars()) throw DimensionError("x size != num_vars");
  double worst = -kInf;
  for (const auto& row : p.rows()) {
    double lhs = 0.0;
    for (const auto& [idx, coeff] : row.terms) lhs += coeff * x[idx];
    worst = std::max(worst, lhs - row.rhs);
  }
  for (int i = 0; i < p.num_vars(); ++i) {
    if (p.lower(i) > -kInf) worst = std::max(worst, p.lower(i) - x[i]);
    if (p.upper(i) < kInf) worst = std::max(worst, x[i] - p.upper(i));
  }
  return worst == -kInf ? 0.0 : worst;
}

std::string dump_lp(const LpProblem& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto var = [&](int i) {
    return p.name(i).empty() ? "x" + std::to_string(i) : p.name(i);
  };
  os << "minimize\n ";
  for (int i = 0; i < p.num_vars(); ++i)
    if (p.objective()[i] != 0.0)
      os << " " << std::showpos << p.objective()[i] << std::noshowpos << " " << var(i);
  os << "\nsubject to\n";
  int r = 0;
  for (const auto& row : p.rows()) {
    os << " r" << r++ << ":";
    for (const auto& [idx, coeff] : row.terms)
      os << " " << std::showpos << coeff << std::noshowpos << " " << var(idx);
    os << " <= " << row.rhs << "\n";
  }
  os << "bounds\n";
  for (int i = 0; i < p.num_vars(); ++i)
    os << " " << p.lower(i) << " <= " << var(i) << " <= " << p.upper(i) << "\n";
  return os.str();
}

namespace {

struct SparseCol {
  std::vector<std::pair<int, double>> entries;  // (equality row, value)
  double cost = 0.0;
};

struct Eta {
  int row;
  Vector d;  // pivot column in the basis frame at pivot time
};

enum class EngineStatus { Optimal, Infeasible, Unbounded, IterationLimit };

// Revised simplex for min cost'z s.t. G z = h, z >= 0, with a dense LU of the
// basis plus product-form eta updates. Phase 1 starts from an all-artificial
// basis; Bland's rule takes over after a long degenerate stall.
class StandardFormSimplex {
 public:
  StandardFormSimplex(int m, std::vector<SparseCol> cols, Vector h, long max_iter)
      : m_(m), cols_(std::move(cols)), h_(std::move(h)), max_iter_(max_iter) {
    // scale equality rows so the artificial start is feasible (h >= 0)
    row_sign_.assign(static_cast<std::size_t>(m_), 1.0);
    for (int i = 0; i < m_; ++i) {
      if (h_[i] < 0) {
        row_sign_[static_cast<std::size_t>(i)] = -1.0;
        h_[i] = -h_[i];
      }
    }
    for (auto& col : cols_)
      for (auto& [row, val] : col.entries) val *= row_sign_[static_cast<std::size_t>(row)];
  }

  EngineStatus run() {
    const int ncols = static_cast<int>(cols_.size());
    basis_.resize(m_);
    in_basis_.assign(static_cast<std::size_t>(ncols), false);
    for (int i = 0; i < m_; ++i) basis_[i] = ncols + i;  // artificials
    xB_ = h_;
    refactorize();

    phase1_ = true;
    const EngineStatus s1 = iterate();
    if (s1 != EngineStatus::Optimal) return s1;
    const double artificial_sum = artificial_value_sum();
    if (artificial_sum > 1e-7 * (1.0 + h_.lpNorm<1>())) return EngineStatus::Infeasible;

    phase1_ = false;
    bland_ = false;
    degen_streak_ = 0;
    return iterate();
  }

  /// Multipliers of the equality rows in the original (unscaled) row frame.
  Vector multipliers() const {
    Vector pi = btran(phase_costs());
    for (int i = 0; i < m_; ++i) pi[i] *= row_sign_[static_cast<std::size_t>(i)];
    return pi;
  }

  double objective() const {
    double v = 0.0;
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < static_cast<int>(cols_.size()))
        v += cols_[static_cast<std::size_t>(basis_[i])].cost * xB_[i];
    return v;
  }

  long iterations() const { return iter_; }

 private:
  double cost_of(int col) const {
    if (col >= static_cast<int>(cols_.size())) return phase1_ ? 1.0 : 0.0;
    return phase1_ ? 0.0 : cols_[static_cast<std::size_t>(col)].cost;
  }

  Vector phase_costs() const {
    Vector cB(m_);
    for (int i = 0; i < m_; ++i) cB[i] = cost_of(basis_[i]);
    return cB;
  }

  double artificial_value_sum() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= static_cast<int>(cols_.size())) s += std::abs(xB_[i]);
    return s;
  }

  void refactorize() {
    Matrix B = Matrix::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
      const int col = basis_[i];
      if (col >= static_cast<int>(cols_.size())) {
        B(col - static_cast<int>(cols_.size()), i) = 1.0;
      } else {
        for (const auto& [row, val] : cols_[static_cast<std::size_t>(col)].entries)
          B(row, i) = val;
      }
    }
    lu_.compute(B);
    etas_.clear();
    xB_ = lu_.solve(h_);  // refresh basic values to control drift
  }

  Vector ftran(const Vector& v) const {
    Vector x = lu_.solve(v);
    for (const auto& eta : etas_) {
      const double xr = x[eta.row] / eta.d[eta.row];
      x -= xr * eta.d;
      x[eta.row] = xr;
    }
    return x;
  }

  Vector btran(const Vector& c) const {
    Vector y = c;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const double num = y.dot(it->d) - y[it->row] * it->d[it->row];
      y[it->row] = (y[it->row] - num) / it->d[it->row];
    }
    return lu_.transpose().solve(y);
  }

  Vector column_dense(int col) const {
    Vector a = Vector::Zero(m_);
    if (col >= static_cast<int>(cols_.size())) {
      a[col - static_cast<int>(cols_.size())] = 1.0;
    } else {
      for (const auto& [row, val] : cols_[static_cast<std::size_t>(col)].entries)
        a[row] = val;
    }
    return a;
  }

  EngineStatus iterate() {
    const int ncols = static_cast<int>(cols_.size());
    while (true) {
      if (iter_ >= max_iter_) return EngineStatus::IterationLimit;
      ++iter_;

      const Vector pi = btran(phase_costs());

      // pricing over structural columns (artificials never re-enter)
      int entering = -1;
      double best = 0.0;
      for (int j = 0; j < ncols; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)]) continue;
        const auto& col = cols_[static_cast<std::size_t>(j)];
        double dot = 0.0;
        for (const auto& [row, val] : col.entries) dot += pi[row] * val;
        const double cj = phase1_ ? 0.0 : col.cost;
        const double rj = cj - dot;
        const double tol = 1e-9 * (1.0 + std::abs(cj));
        if (rj < -tol) {
          if (bland_) {
            entering = j;
            break;
          }
          if (rj < best) {
            best = rj;
            entering = j;
          }
        }
      }
      if (entering < 0) return EngineStatus::Optimal;

      const Vector d = ftran(column_dense(entering));

      // in phase 2, prefer pivoting a leftover zero-level artificial out
      int leave = -1;
      if (!phase1_) {
        for (int i = 0; i < m_; ++i) {
          if (basis_[i] >= ncols && std::abs(d[i]) > 1e-7 &&
              std::abs(xB_[i]) <= 1e-9) {
            leave = i;
            break;
          }
        }
      }
      double t = 0.0;
      if (leave < 0) {
        double best_ratio = kInf;
        double best_pivot = 0.0;
        for (int i = 0; i < m_; ++i) {
          if (d[i] > 1e-9) {
            const double ratio = std::max(xB_[i], 0.0) / d[i];
            const bool better =
                bland_ ? (ratio < best_ratio - 1e-12 ||
                          (ratio < best_ratio + 1e-12 && leave >= 0 &&
                           basis_[i] < basis_[leave]))
                       : (ratio < best_ratio - 1e-12 ||
                          (ratio < best_ratio + 1e-12 && d[i] > best_pivot));
            if (leave < 0 || better) {
              if (ratio < best_ratio) best_ratio = ratio;
              best_pivot = d[i];
              leave = i;
            }
          }
        }
        if (leave < 0) return EngineStatus::Unbounded;
        t = std::max(xB_[leave], 0.0) / d[leave];
      }

      if (t <= 1e-12) {
        if (++degen_streak_ > 800) bland_ = true;
      } else {
        degen_streak_ = 0;
      }

      xB_ -= t * d;
      xB_[leave] = t;
      if (basis_[leave] < ncols) in_basis_[static_cast<std::size_t>(basis_[leave])] = false;
      basis_[leave] = entering;
      in_basis_[static_cast<std::size_t>(entering)] = true;
      etas_.push_back({leave, d});
      if (etas_.size() >= 300) refactorize();
    }
  }

  int m_;
  std::vector<SparseCol> cols_;
  Vector h_;
  long max_iter_;
  std::vector<double> row_sign_;
  std::vector<int> basis_;
  std::vector<bool> in_basis_;
  Vector xB_;
  Eigen::PartialPivLU<Matrix> lu_;
  std::vector<Eta> etas_;
  bool phase1_ = true;
  bool bland_ = false;
  int degen_streak_ = 0;
  long iter_ = 0;
};

long resolve_max_iterations(const LpOptions& options, int m, int ncols) {
  if (const char* env = std::getenv("DWELLCERT_LP_MAX_ITERS")) {
    const long v = std::atol(env);
    if (v > 0) return v;
  }
  if (options.max_iterations > 0) return options.max_iterations;
  return std::max(50000L, 40L * (m + ncols));
}

// Rows of the primal including folded-in finite variable bounds.
struct ExtendedRows {
  std::vector<LpProblem::Row> rows;
};

ExtendedRows extend_with_bounds(const LpProblem& p) {
  ExtendedRows ext;
  ext.rows = p.rows();
  for (int i = 0; i < p.num_vars(); ++i) {
    if (p.upper(i) < kInf) ext.rows.push_back({{{i, 1.0}}, p.upper(i)});
    if (p.lower(i) > -kInf) ext.rows.push_back({{{i, -1.0}}, -p.lower(i)});
  }
  return ext;
}

// Solves min c'x, Rx <= b (x free) through the dual standard form
// min b'z, R'z = -c, z >= 0: the basis dimension is the primal variable
// count, which is far below the row count for the certificate LPs.
LpSolution solve_via_dual(const LpProblem& p, const ExtendedRows& ext,
                          const LpOptions& options) {
  const int m = p.num_vars();
  const int ncols = static_cast<int>(ext.rows.size());
  std::vector<SparseCol> cols(static_cast<std::size_t>(ncols));
  for (int j = 0; j < ncols; ++j) {
    cols[static_cast<std::size_t>(j)].entries = ext.rows[static_cast<std::size_t>(j)].terms;
    cols[static_cast<std::size_t>(j)].cost = ext.rows[static_cast<std::size_t>(j)].rhs;
  }
  Vector h = -p.objective();

  StandardFormSimplex engine(m, std::move(cols), std::move(h),
                             resolve_max_iterations(options, m, ncols));
  const EngineStatus st = engine.run();

  LpSolution sol;
  sol.iterations = engine.iterations();
  switch (st) {
    case EngineStatus::Optimal: {
      sol.status = LpStatus::Optimal;
      sol.x = engine.multipliers();
      sol.objective_value = p.objective().dot(sol.x);
      sol.max_constraint_violation = std::max(0.0, feasibility_margin(p, sol.x));
      return sol;
    }
    case EngineStatus::Unbounded:
      sol.status = LpStatus::Infeasible;  // dual unbounded == primal infeasible
      return sol;
    case EngineStatus::Infeasible:
      sol.status = LpStatus::Unbounded;  // provisional; caller disambiguates
      return sol;
    case EngineStatus::IterationLimit:
      sol.status = LpStatus::IterationLimit;
      return sol;
  }
  sol.status = LpStatus::IterationLimit;
  return sol;
}

}  // namespace

LpSolution solve(const LpProblem& p, const LpOptions& options) {
  if (p.num_vars() == 0) {
    LpSolution sol;
    sol.status = LpStatus::Optimal;
    sol.x = Vector::Zero(0);
    return sol;
  }
  const ExtendedRows ext = extend_with_bounds(p);
  LpSolution sol = solve_via_dual(p, ext, options);
  if (sol.status != LpStatus::Unbounded) return sol;

  // dual infeasible: the primal is unbounded or infeasible; settle it with a
  // single-slack feasibility problem min t s.t. Rx - t <= b, t >= 0
  LpProblem feas(p.num_vars() + 1);
  const int t_var = p.num_vars();
  feas.set_bounds(t_var, 0.0, kInf);
  feas.set_objective(t_var, 1.0);
  for (const auto& row : ext.rows) {
    auto terms = row.terms;
    terms.emplace_back(t_var, -1.0);
    feas.add_row(std::move(terms), row.rhs);
  }
  const ExtendedRows fext = extend_with_bounds(feas);
  const LpSolution fsol = solve_via_dual(feas, fext, options);
  if (fsol.status == LpStatus::Optimal && fsol.objective_value <= options.tol) {
    sol.status = LpStatus::Unbounded;
  } else if (fsol.status == LpStatus::IterationLimit) {
    sol.status = LpStatus::IterationLimit;
  } else {
    sol.status = LpStatus::Infeasible;
  }
  return sol;
}

}  // namespace dwellcert
