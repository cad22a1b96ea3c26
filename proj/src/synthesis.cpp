#include "dwellcert/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dwellcert/positivity.hpp"

namespace dwellcert {

namespace {

RowVector col_sums(const Matrix& M, Index cols) {
  if (M.rows() == 0) return RowVector::Zero(cols);
  return M.colwise().sum();
}

double abs_max(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

struct RowBuilder {
  std::map<int, double> terms;
  void add(int var, double coeff) {
    if (coeff != 0.0) terms[var] += coeff;
  }
  std::vector<std::pair<int, double>> take() {
    std::vector<std::pair<int, double>> out(terms.begin(), terms.end());
    terms.clear();
    return out;
  }
};

void require_weights(const Matrix& M, Index n, const char* what) {
  if (M.rows() != n || M.cols() != n) throw DimensionError(std::string(what) + " must be n x n");
  if (!is_nonnegative(M, 0.0)) throw StructuralError(std::string(what) + " must be nonnegative");
  if (abs_max(M) == 0.0) throw StructuralError(std::string(what) + " must be nonzero");
}

GridFn diag_grid_fn(const std::vector<double>& grid, const std::vector<Vector>& diags) {
  std::vector<Matrix> vals;
  vals.reserve(diags.size());
  for (const auto& d : diags) vals.push_back(Matrix(d.asDiagonal()));
  return GridFn(grid, std::move(vals));
}

// Shared assembly for the impulsive synthesis LPs (range and minimum kinds).
struct SynthAssembly {
  const ImpulsiveSystemd& plant;
  DwellTimeSpec spec;
  Matrix M_c, M_d;
  SynthOptions opts;
  std::vector<double> grid;
  Matrix A, Ec;  // constant plant matrices

  Index n = 0, qc = 0, qd = 0, pc = 0, pd = 0;
  int nX = 0, nU = 0, nUd = 0, alpha_var = 0, gamma_var = 0;
  double eta_flow = 0, eta_input = 0, eta_jump = 0, eta_disc = 0;

  SynthAssembly(const ImpulsiveSystemd& p, const DwellTimeSpec& sp, const Matrix& Mc,
                const Matrix& Md, Index grid_n, const SynthOptions& o)
      : plant(p), spec(sp), M_c(Mc), M_d(Md), opts(o) {
    plant.validate();
    if (!plant.A.is_constant() || !plant.E_c.is_constant())
      throw StructuralError("synthesis expects constant plant matrices");
    n = plant.n();
    qc = plant.q_c();
    qd = plant.q_d();
    pc = plant.p_c();
    pd = plant.p_d();
    require_weights(M_c, n, "M_c");
    require_weights(M_d, n, "M_d");
    A = plant.A.eval(0.0);
    Ec = plant.E_c.eval(0.0);
    grid = spec.is_range() ? uniform_grid_with(spec.t_max(), grid_n, spec.t_min())
                           : uniform_grid(spec.t_bar(), grid_n);

    const Index nodes = static_cast<Index>(grid.size());
    nX = static_cast<int>(n * nodes);
    nU = static_cast<int>(n * qc * nodes);
    nUd = static_cast<int>(n * qd);
    alpha_var = nX + nU + nUd;
    gamma_var = alpha_var + 1;

    eta_flow = opts.eta_scale * (1.0 + abs_max(A) + abs_max(plant.C_c) + abs_max(M_c));
    eta_input = opts.eta_scale * (1.0 + abs_max(Ec) + abs_max(plant.F_c));
    eta_jump = opts.eta_scale * (1.0 + abs_max(plant.J) + abs_max(plant.C_d) + abs_max(M_d));
    eta_disc = opts.eta_scale * (1.0 + abs_max(plant.E_d) + abs_max(plant.F_d));
  }

  Index nodes() const { return static_cast<Index>(grid.size()); }
  int xv(Index k, Index i) const { return static_cast<int>(k * n + i); }
  int uc(Index k, Index i, Index l) const {
    return nX + static_cast<int>(k * (n * qc) + i * qc + l);
  }
  int ud(Index i, Index l) const { return nX + nU + static_cast<int>(i * qd + l); }

  // gamma_cap < 0 requests the gain-minimization phase; otherwise gamma is
  // pinned and a common floor variable under the X diagonals is maximized so
  // the recovered gains are well-conditioned (no node sits at the tiny bound)
  LpProblem assemble(double gamma_cap = -1.0) const {
    const bool recenter = gamma_cap >= 0.0;
    LpProblem lp(gamma_var + 1 + (recenter ? 1 : 0));
    const Index N = nodes() - 1;
    for (Index k = 0; k <= N; ++k)
      for (Index i = 0; i < n; ++i) lp.set_bounds(xv(k, i), opts.eps_pos, kInf);
    lp.set_bounds(alpha_var, 0.0, opts.alpha_max);
    if (recenter) {
      const int floor_var = gamma_var + 1;
      lp.set_bounds(gamma_var, 0.0, gamma_cap);
      lp.set_bounds(floor_var, 0.0, 1e3);
      lp.set_objective(floor_var, -1.0);
      for (Index k = 0; k <= N; ++k)
        for (Index i = 0; i < n; ++i)
          lp.add_row({{floor_var, 1.0}, {xv(k, i), -1.0}}, 0.0);
    } else {
      lp.set_bounds(gamma_var, 0.0, kInf);
      lp.set_objective(gamma_var, 1.0);
    }

    const RowVector onesMc = col_sums(M_c, n);
    const RowVector onesMd = col_sums(M_d, n);
    RowBuilder rb;

    // positivity block: X(tau)A - U_c(tau)C_c + alpha I >= 0 (alpha on the
    // diagonal only), X(0)J - U_d C_d >= 0, X(tau)E_c - U_c(tau)F_c >= 0,
    // X(0)E_d - U_d F_d >= 0. Exact at nodes by per-segment affinity.
    for (Index k = 0; k <= N; ++k) {
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          rb.add(xv(k, i), -A(i, j));
          for (Index l = 0; l < qc; ++l) rb.add(uc(k, i, l), plant.C_c(l, j));
          if (i == j) rb.add(alpha_var, -1.0);
          lp.add_row(rb.take(), 0.0);
        }
        for (Index j = 0; j < pc; ++j) {
          rb.add(xv(k, i), -Ec(i, j));
          for (Index l = 0; l < qc; ++l) rb.add(uc(k, i, l), plant.F_c(l, j));
          lp.add_row(rb.take(), 0.0);
        }
      }
    }
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        rb.add(xv(0, i), -plant.J(i, j));
        for (Index l = 0; l < qd; ++l) rb.add(ud(i, l), plant.C_d(l, j));
        lp.add_row(rb.take(), 0.0);
      }
      for (Index j = 0; j < pd; ++j) {
        rb.add(xv(0, i), -plant.E_d(i, j));
        for (Index l = 0; l < qd; ++l) rb.add(ud(i, l), plant.F_d(l, j));
        lp.add_row(rb.take(), 0.0);
      }
    }

    // performance block: flow rows per segment at both endpoints
    for (Index s = 0; s < N; ++s) {
      const double h = grid[static_cast<std::size_t>(s) + 1] - grid[static_cast<std::size_t>(s)];
      for (double w : {0.0, 1.0}) {
        for (Index j = 0; j < n; ++j) {
          rb.add(xv(s + 1, j), 1.0 / h);
          rb.add(xv(s, j), -1.0 / h);
          for (Index i = 0; i < n; ++i) {
            rb.add(xv(s, i), (1.0 - w) * A(i, j));
            rb.add(xv(s + 1, i), w * A(i, j));
            for (Index l = 0; l < qc; ++l) {
              rb.add(uc(s, i, l), -(1.0 - w) * plant.C_c(l, j));
              rb.add(uc(s + 1, i, l), -w * plant.C_c(l, j));
            }
          }
          lp.add_row(rb.take(), -onesMc[j] - eta_flow);
        }
      }
    }

    if (spec.is_minimum()) {
      // stationary row at t_bar
      for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
          rb.add(xv(N, i), A(i, j));
          for (Index l = 0; l < qc; ++l) rb.add(uc(N, i, l), -plant.C_c(l, j));
        }
        lp.add_row(rb.take(), -onesMc[j] - opts.eps - eta_flow);
      }
    }

    // input rows at every node
    for (Index k = 0; k <= N; ++k) {
      for (Index j = 0; j < pc; ++j) {
        for (Index i = 0; i < n; ++i) {
          rb.add(xv(k, i), Ec(i, j));
          for (Index l = 0; l < qc; ++l) rb.add(uc(k, i, l), -plant.F_c(l, j));
        }
        rb.add(gamma_var, -1.0);
        lp.add_row(rb.take(), -eta_input);
      }
    }
    // discrete input row
    for (Index j = 0; j < pd; ++j) {
      for (Index i = 0; i < n; ++i) {
        rb.add(xv(0, i), plant.E_d(i, j));
        for (Index l = 0; l < qd; ++l) rb.add(ud(i, l), -plant.F_d(l, j));
      }
      rb.add(gamma_var, -1.0);
      lp.add_row(rb.take(), -eta_disc);
    }

    // jump rows at every admissible theta node (range) or at t_bar (minimum)
    for (Index k = 0; k <= N; ++k) {
      const double theta = grid[static_cast<std::size_t>(k)];
      if (spec.is_range() && theta < spec.t_min()) continue;
      if (spec.is_minimum() && k != N) continue;
      for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
          rb.add(xv(0, i), plant.J(i, j));
          for (Index l = 0; l < qd; ++l) rb.add(ud(i, l), -plant.C_d(l, j));
        }
        rb.add(xv(k, j), -1.0);
        lp.add_row(rb.take(), -onesMd[j] - opts.eps - eta_jump);
      }
    }
    return lp;
  }

  ObserverDesign extract(const LpSolution& sol) const {
    const Index N = nodes() - 1;
    ObserverDesign d;
    d.spec = spec;
    d.alpha = sol.x[alpha_var];
    d.gamma = sol.x[gamma_var];
    d.eps = opts.eps;
    d.M_c = M_c;
    d.M_d = M_d;

    std::vector<Vector> xdiags;
    std::vector<Matrix> uvals, lvals;
    for (Index k = 0; k <= N; ++k) {
      Vector xd(n);
      for (Index i = 0; i < n; ++i) xd[i] = sol.x[xv(k, i)];
      Matrix U(n, qc), L(n, qc);
      for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < qc; ++l) {
          U(i, l) = sol.x[uc(k, i, l)];
          L(i, l) = U(i, l) / xd[i];  // diagonal X: n scalar divisions
        }
      xdiags.push_back(std::move(xd));
      uvals.push_back(std::move(U));
      lvals.push_back(std::move(L));
    }
    d.X = diag_grid_fn(grid, xdiags);
    d.U_c = GridFn(grid, std::move(uvals));
    d.L_c = GridFn(grid, std::move(lvals));
    d.U_d = Matrix(n, qd);
    d.L_d = Matrix(n, qd);
    for (Index i = 0; i < n; ++i)
      for (Index l = 0; l < qd; ++l) {
        d.U_d(i, l) = sol.x[ud(i, l)];
        d.L_d(i, l) = d.U_d(i, l) / xdiags.front()[i];
      }
    return d;
  }
};

std::optional<ObserverDesign> run_synth(const ImpulsiveSystemd& plant,
                                        const DwellTimeSpec& spec, const Matrix& M_c,
                                        const Matrix& M_d, Index grid_n,
                                        const SynthOptions& opts) {
  if (grid_n < 1) throw GridError("grid_n must be >= 1");
  SynthAssembly a(plant, spec, M_c, M_d, grid_n, opts);
  const LpSolution sol = solve(a.assemble());
  if (sol.status == LpStatus::Infeasible) return std::nullopt;
  if (sol.status != LpStatus::Optimal)
    throw std::runtime_error("synthesis LP did not reach optimality: " + to_string(sol.status));

  // recentering pass at the optimal gain
  const double gamma_opt = sol.x[a.gamma_var];
  const LpSolution centered = solve(a.assemble(gamma_opt + 1e-9 * (1.0 + gamma_opt)));
  return a.extract(centered.status == LpStatus::Optimal ? centered : sol);
}

}  // namespace

ImpulsiveSystemd build_error_system(const ImpulsiveSystemd& plant, const GridFn& L_c,
                                    const Matrix& L_d, const Matrix& M_c,
                                    const Matrix& M_d) {
  plant.validate();
  const Index n = plant.n();
  if (L_c.rows() != n || L_c.cols() != plant.q_c())
    throw DimensionError("L_c must be n x q_c");
  if (L_d.rows() != n || L_d.cols() != plant.q_d())
    throw DimensionError("L_d must be n x q_d");

  const auto& grid = L_c.grid();
  std::vector<Matrix> avals, evals;
  avals.reserve(grid.size());
  evals.reserve(grid.size());
  for (double tau : grid) {
    const Matrix L = L_c.eval(tau);
    avals.push_back(plant.A.eval(tau) - L * plant.C_c);
    evals.push_back(plant.E_c.eval(tau) - L * plant.F_c);
  }
  ImpulsiveSystemd err;
  err.A = GridFn(grid, std::move(avals));
  err.E_c = GridFn(grid, std::move(evals));
  err.J = plant.J - L_d * plant.C_d;
  err.E_d = plant.E_d - L_d * plant.F_d;
  err.C_c = M_c;
  err.F_c = Matrix::Zero(M_c.rows(), plant.p_c());
  err.C_d = M_d;
  err.F_d = Matrix::Zero(M_d.rows(), plant.p_d());
  err.validate();
  return err;
}

ImpulsiveSystemd build_error_system(const ImpulsiveSystemd& plant,
                                    const ObserverDesign& design) {
  return build_error_system(plant, design.L_c, design.L_d, design.M_c, design.M_d);
}

std::optional<ObserverDesign> synth_range(const ImpulsiveSystemd& plant,
                                          const DwellTimeSpec& spec, const Matrix& M_c,
                                          const Matrix& M_d, Index grid_n,
                                          const SynthOptions& opts) {
  if (!spec.is_range()) throw StructuralError("synth_range needs a range spec");
  return run_synth(plant, spec, M_c, M_d, grid_n, opts);
}

std::optional<ObserverDesign> synth_min(const ImpulsiveSystemd& plant,
                                        const DwellTimeSpec& spec, const Matrix& M_c,
                                        const Matrix& M_d, Index grid_n,
                                        const SynthOptions& opts) {
  if (!spec.is_minimum()) throw StructuralError("synth_min needs a minimum spec");
  return run_synth(plant, spec, M_c, M_d, grid_n, opts);
}

std::optional<SwitchedObserverDesign> synth_switched(const SwitchedSystemd& sw,
                                                     const DwellTimeSpec& spec,
                                                     const Matrix& M, Index grid_n,
                                                     const SynthOptions& opts) {
  sw.validate();
  if (!spec.is_minimum()) throw StructuralError("synth_switched needs a minimum spec");
  if (grid_n < 1) throw GridError("grid_n must be >= 1");
  const Index nm = sw.num_modes(), n = sw.n(), q = sw.q(), p = sw.p();
  require_weights(M, n, "M");
  const std::vector<double> grid = uniform_grid(spec.t_bar(), grid_n);
  const Index nodes = static_cast<Index>(grid.size());
  const Index N = nodes - 1;

  const int per_mode = static_cast<int>(n * nodes + n * q * nodes);
  const int alpha_var = static_cast<int>(nm) * per_mode;
  const int gamma_var = alpha_var + 1;
  auto xv = [&](Index m, Index k, Index i) {
    return static_cast<int>(m) * per_mode + static_cast<int>(k * n + i);
  };
  auto uv = [&](Index m, Index k, Index i, Index l) {
    return static_cast<int>(m) * per_mode + static_cast<int>(n * nodes) +
           static_cast<int>(k * (n * q) + i * q + l);
  };

  auto assemble = [&](double gamma_cap) {
  const bool recenter = gamma_cap >= 0.0;
  LpProblem lp(gamma_var + 1 + (recenter ? 1 : 0));
  for (Index m = 0; m < nm; ++m)
    for (Index k = 0; k <= N; ++k)
      for (Index i = 0; i < n; ++i) lp.set_bounds(xv(m, k, i), opts.eps_pos, kInf);
  lp.set_bounds(alpha_var, 0.0, opts.alpha_max);
  if (recenter) {
    const int floor_var = gamma_var + 1;
    lp.set_bounds(gamma_var, 0.0, gamma_cap);
    lp.set_bounds(floor_var, 0.0, 1e3);
    lp.set_objective(floor_var, -1.0);
    for (Index m = 0; m < nm; ++m)
      for (Index k = 0; k <= N; ++k)
        for (Index i = 0; i < n; ++i)
          lp.add_row({{floor_var, 1.0}, {xv(m, k, i), -1.0}}, 0.0);
  } else {
    lp.set_bounds(gamma_var, 0.0, kInf);
    lp.set_objective(gamma_var, 1.0);
  }

  const RowVector onesM = col_sums(M, n);
  RowBuilder rb;
  double data_max = abs_max(M);
  for (const auto& mode : sw.modes)
    data_max = std::max({data_max, abs_max(mode.A), abs_max(mode.E), abs_max(mode.C),
                         abs_max(mode.F)});
  const double eta = opts.eta_scale * (1.0 + data_max);

  for (Index m = 0; m < nm; ++m) {
    const auto& mode = sw.modes[static_cast<std::size_t>(m)];
    // positivity rows at nodes
    for (Index k = 0; k <= N; ++k) {
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          rb.add(xv(m, k, i), -mode.A(i, j));
          for (Index l = 0; l < q; ++l) rb.add(uv(m, k, i, l), mode.C(l, j));
          if (i == j) rb.add(alpha_var, -1.0);
          lp.add_row(rb.take(), 0.0);
        }
        for (Index j = 0; j < p; ++j) {
          rb.add(xv(m, k, i), -mode.E(i, j));
          for (Index l = 0; l < q; ++l) rb.add(uv(m, k, i, l), mode.F(l, j));
          lp.add_row(rb.take(), 0.0);
        }
      }
    }
    // stationary row at t_bar
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) {
        rb.add(xv(m, N, i), mode.A(i, j));
        for (Index l = 0; l < q; ++l) rb.add(uv(m, N, i, l), -mode.C(l, j));
      }
      lp.add_row(rb.take(), -onesM[j] - opts.eps - eta);
    }
    // flow rows per segment
    for (Index s = 0; s < N; ++s) {
      const double h = grid[static_cast<std::size_t>(s) + 1] - grid[static_cast<std::size_t>(s)];
      for (double w : {0.0, 1.0}) {
        for (Index j = 0; j < n; ++j) {
          rb.add(xv(m, s + 1, j), 1.0 / h);
          rb.add(xv(m, s, j), -1.0 / h);
          for (Index i = 0; i < n; ++i) {
            rb.add(xv(m, s, i), (1.0 - w) * mode.A(i, j));
            rb.add(xv(m, s + 1, i), w * mode.A(i, j));
            for (Index l = 0; l < q; ++l) {
              rb.add(uv(m, s, i, l), -(1.0 - w) * mode.C(l, j));
              rb.add(uv(m, s + 1, i, l), -w * mode.C(l, j));
            }
          }
          lp.add_row(rb.take(), -onesM[j] - eta);
        }
      }
    }
    // input rows at nodes
    for (Index k = 0; k <= N; ++k) {
      for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
          rb.add(xv(m, k, i), mode.E(i, j));
          for (Index l = 0; l < q; ++l) rb.add(uv(m, k, i, l), -mode.F(l, j));
        }
        rb.add(gamma_var, -1.0);
        lp.add_row(rb.take(), -eta);
      }
    }
  }
  // cross-mode coupling rows for all ordered pairs (diagonal entries)
  for (Index mi = 0; mi < nm; ++mi) {
    for (Index mj = 0; mj < nm; ++mj) {
      if (mi == mj) continue;
      for (Index d = 0; d < n; ++d) {
        rb.add(xv(mj, N, d), 1.0);
        rb.add(xv(mi, 0, d), -1.0);
        lp.add_row(rb.take(), -opts.eps - eta);
      }
    }
  }
  return lp;
  };

  LpSolution sol = solve(assemble(-1.0));
  if (sol.status == LpStatus::Infeasible) return std::nullopt;
  if (sol.status != LpStatus::Optimal)
    throw std::runtime_error("switched synthesis LP did not reach optimality: " +
                             to_string(sol.status));
  const double gamma_opt = sol.x[gamma_var];
  const LpSolution centered = solve(assemble(gamma_opt + 1e-9 * (1.0 + gamma_opt)));
  if (centered.status == LpStatus::Optimal) sol = centered;

  SwitchedObserverDesign d;
  d.spec = spec;
  d.alpha = sol.x[alpha_var];
  d.gamma = sol.x[gamma_var];
  d.eps = opts.eps;
  d.M = M;
  for (Index m = 0; m < nm; ++m) {
    std::vector<Vector> xd;
    std::vector<Matrix> uvals, lvals;
    for (Index k = 0; k <= N; ++k) {
      Vector x(n);
      for (Index i = 0; i < n; ++i) x[i] = sol.x[xv(m, k, i)];
      Matrix U(n, q), L(n, q);
      for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < q; ++l) {
          U(i, l) = sol.x[uv(m, k, i, l)];
          L(i, l) = U(i, l) / x[i];
        }
      xd.push_back(std::move(x));
      uvals.push_back(std::move(U));
      lvals.push_back(std::move(L));
    }
    d.X.push_back(diag_grid_fn(grid, xd));
    d.U.push_back(GridFn(grid, std::move(uvals)));
    d.L.push_back(GridFn(grid, std::move(lvals)));
  }
  return d;
}

LiftedSwitched<double> build_switched_error_system(const SwitchedSystemd& sw,
                                                   const SwitchedObserverDesign& design) {
  sw.validate();
  const Index nm = sw.num_modes(), n = sw.n(), p = sw.p();
  if (static_cast<Index>(design.L.size()) != nm)
    throw StructuralError("design mode count does not match the system");
  const auto& grid = design.L.front().grid();

  std::vector<Matrix> avals, evals;
  for (double tau : grid) {
    Matrix A = Matrix::Zero(n * nm, n * nm);
    Matrix E = Matrix::Zero(n * nm, p);
    for (Index m = 0; m < nm; ++m) {
      const auto& mode = sw.modes[static_cast<std::size_t>(m)];
      const Matrix L = design.L[static_cast<std::size_t>(m)].eval(tau);
      A.block(m * n, m * n, n, n) = mode.A - L * mode.C;
      E.block(m * n, 0, n, p) = mode.E - L * mode.F;
    }
    avals.push_back(std::move(A));
    evals.push_back(std::move(E));
  }

  Matrix Cc = Matrix::Zero(n * nm, n * nm);
  for (Index m = 0; m < nm; ++m) Cc.block(m * n, m * n, n, n) = design.M;

  LiftedSwitched<double> out = lift_switched(sw);
  out.sys.A = GridFn(grid, std::move(avals));
  out.sys.E_c = GridFn(grid, std::move(evals));
  out.sys.C_c = Cc;
  out.sys.F_c = Matrix::Zero(n * nm, p);
  out.sys.validate();
  return out;
}

namespace {

MarginReport dense_positivity_report(const ImpulsiveSystemd& err, int dense_factor,
                                     double tol) {
  // resample the closed loop on a refined grid so the PWL gain is probed
  // between its own nodes as well
  const auto& g = err.A.grid();
  std::vector<double> refined;
  for (std::size_t s = 0; s + 1 < g.size(); ++s)
    for (int d = 0; d < dense_factor; ++d)
      refined.push_back(g[s] + (g[s + 1] - g[s]) * d / dense_factor);
  refined.push_back(g.back());

  MarginReport rep;
  rep.tol = tol;
  double worstA = 0.0, worstE = 0.0;
  for (double tau : refined) {
    worstA = std::min(worstA, metzler_margin(err.A.eval(tau)));
    worstE = std::min(worstE, nonnegative_margin(err.E_c.eval(tau)));
  }
  rep.worst["flow_metzler"] = -worstA;
  rep.worst["flow_input_nonneg"] = -worstE;
  rep.worst["jump_nonneg"] = -nonnegative_margin(err.J);
  rep.worst["jump_input_nonneg"] = -nonnegative_margin(err.E_d);
  rep.pass = rep.worst_overall() <= tol;
  return rep;
}

// Analysis of a switched closed loop with the gains fixed: fresh per-mode
// lyap functions and a fresh gamma under the same row structure as the
// synthesis conditions.
struct SwitchedAnalysis {
  double gamma = 0.0;
  std::vector<GridFn> mode_lyap;
};

std::optional<SwitchedAnalysis> analyze_switched(const SwitchedSystemd& sw,
                                                 const SwitchedObserverDesign& design,
                                                 const SynthOptions& opts = {}) {
  const Index nm = sw.num_modes(), n = sw.n(), p = sw.p();
  const auto& grid = design.L.front().grid();
  const Index nodes = static_cast<Index>(grid.size());
  const Index N = nodes - 1;
  const double tbar = design.spec.t_bar();

  const int per_mode = static_cast<int>(n * nodes);
  const int gamma_var = static_cast<int>(nm) * per_mode;
  auto zv = [&](Index m, Index k, Index i) {
    return static_cast<int>(m) * per_mode + static_cast<int>(k * n + i);
  };
  LpProblem lp(gamma_var + 1);
  for (Index m = 0; m < nm; ++m)
    for (Index i = 0; i < n; ++i) lp.set_bounds(zv(m, N, i), opts.eps_pos, kInf);
  lp.set_bounds(gamma_var, 0.0, kInf);
  lp.set_objective(gamma_var, 1.0);

  const RowVector onesM = col_sums(design.M, n);
  RowBuilder rb;
  double data_max = abs_max(design.M);
  for (const auto& mode : sw.modes)
    data_max = std::max({data_max, abs_max(mode.A), abs_max(mode.C)});
  const double eta = opts.eta_scale * (1.0 + data_max);

  for (Index m = 0; m < nm; ++m) {
    const auto& mode = sw.modes[static_cast<std::size_t>(m)];
    const auto& L = design.L[static_cast<std::size_t>(m)];
    auto Aerr = [&](double tau) -> Matrix { return mode.A - L.eval(tau) * mode.C; };
    auto Eerr = [&](double tau) -> Matrix { return mode.E - L.eval(tau) * mode.F; };

    // flow rows: endpoints plus midpoint (the closed-loop flow varies with tau)
    for (Index s = 0; s < N; ++s) {
      const double h = grid[static_cast<std::size_t>(s) + 1] - grid[static_cast<std::size_t>(s)];
      for (double w : {0.0, 0.5, 1.0}) {
        const Matrix At = Aerr(grid[static_cast<std::size_t>(s)] + w * h);
        for (Index j = 0; j < n; ++j) {
          rb.add(zv(m, s + 1, j), 1.0 / h);
          rb.add(zv(m, s, j), -1.0 / h);
          for (Index i = 0; i < n; ++i) {
            rb.add(zv(m, s, i), (1.0 - w) * At(i, j));
            rb.add(zv(m, s + 1, i), w * At(i, j));
          }
          lp.add_row(rb.take(), -onesM[j] - eta);
        }
      }
    }
    // stationary row
    const Matrix AT = Aerr(tbar);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) rb.add(zv(m, N, i), AT(i, j));
      lp.add_row(rb.take(), -onesM[j] - opts.eps - eta);
    }
    // input rows at nodes and midpoints
    std::vector<double> taus(grid.begin(), grid.end());
    for (Index s = 0; s < N; ++s)
      taus.push_back(0.5 * (grid[static_cast<std::size_t>(s)] +
                            grid[static_cast<std::size_t>(s) + 1]));
    for (double tau : taus) {
      const Matrix Et = Eerr(tau);
      const Index s = design.L.front().segment_index(tau);
      const double t0 = grid[static_cast<std::size_t>(s)];
      const double w = (tau - t0) / (grid[static_cast<std::size_t>(s) + 1] - t0);
      for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
          rb.add(zv(m, s, i), (1.0 - w) * Et(i, j));
          rb.add(zv(m, s + 1, i), w * Et(i, j));
        }
        rb.add(gamma_var, -1.0);
        lp.add_row(rb.take(), -eta);
      }
    }
  }
  // cross rows, same orientation as the synthesis conditions
  for (Index mi = 0; mi < nm; ++mi)
    for (Index mj = 0; mj < nm; ++mj) {
      if (mi == mj) continue;
      for (Index d = 0; d < n; ++d) {
        rb.add(zv(mj, N, d), 1.0);
        rb.add(zv(mi, 0, d), -1.0);
        lp.add_row(rb.take(), -opts.eps - eta);
      }
    }

  const LpSolution sol = solve(lp);
  if (sol.status != LpStatus::Optimal) return std::nullopt;
  SwitchedAnalysis out;
  out.gamma = sol.x[gamma_var];
  for (Index m = 0; m < nm; ++m) {
    std::vector<Matrix> vals;
    for (Index k = 0; k <= N; ++k) {
      Matrix v(n, 1);
      for (Index i = 0; i < n; ++i) v(i, 0) = sol.x[zv(m, k, i)];
      vals.push_back(std::move(v));
    }
    out.mode_lyap.push_back(GridFn(std::vector<double>(grid.begin(), grid.end()),
                                   std::move(vals)));
  }
  return out;
}

}  // namespace

PostVerifyResult post_verify(const ImpulsiveSystemd& plant, const ObserverDesign& design,
                             int dense_factor, double tol) {
  if (dense_factor < 1) throw StructuralError("dense_factor must be >= 1");
  const ImpulsiveSystemd err = build_error_system(plant, design);

  PostVerifyResult res;
  res.gamma_synthesis = design.gamma;
  res.positivity = dense_positivity_report(err, dense_factor, 1e-9);
  if (!res.positivity.pass)
    throw RejectedDesignError("design failed closed-loop positivity re-check",
                              res.positivity.worst_overall());

  CertifyOptions copts;
  copts.eps = design.eps;
  copts.explicit_grid = design.L_c.grid();
  const auto cert = design.spec.is_range()
                        ? certify_range_gain(err, design.spec, 0, copts)
                        : certify_min_gain(err, design.spec, 0, copts);
  if (cert) {
    res.analysis = cert;
    res.gamma_analysis = cert->gamma;
  }
  res.pass = res.positivity.pass && cert.has_value() &&
             res.gamma_analysis <= res.gamma_synthesis + tol;
  if (!res.positivity.pass)
    throw RejectedDesignError("design failed closed-loop positivity re-check",
                              res.positivity.worst_overall());
  if (!res.pass)
    throw RejectedDesignError("closed-loop analysis gain exceeds the synthesis gain",
                              res.gamma_analysis - res.gamma_synthesis);
  return res;
}

PostVerifyResult post_verify(const SwitchedSystemd& sw, const SwitchedObserverDesign& design,
                             int dense_factor, double tol) {
  if (dense_factor < 1) throw StructuralError("dense_factor must be >= 1");
  PostVerifyResult res;
  res.gamma_synthesis = design.gamma;

  // per-mode dense positivity of the closed loops
  MarginReport pos;
  pos.tol = 1e-9;
  double worstA = 0.0, worstE = 0.0;
  const auto& grid = design.L.front().grid();
  for (Index m = 0; m < sw.num_modes(); ++m) {
    const auto& mode = sw.modes[static_cast<std::size_t>(m)];
    const auto& L = design.L[static_cast<std::size_t>(m)];
    for (std::size_t s = 0; s + 1 < grid.size(); ++s) {
      for (int d = 0; d <= dense_factor; ++d) {
        const double tau = grid[s] + (grid[s + 1] - grid[s]) * d / dense_factor;
        const Matrix Lm = L.eval(tau);
        worstA = std::min(worstA, metzler_margin(mode.A - Lm * mode.C));
        worstE = std::min(worstE, nonnegative_margin(mode.E - Lm * mode.F));
      }
    }
  }
  pos.worst["flow_metzler"] = -worstA;
  pos.worst["flow_input_nonneg"] = -worstE;
  pos.pass = pos.worst_overall() <= pos.tol;
  res.positivity = pos;

  SynthOptions aopts;
  aopts.eps = design.eps;
  const auto analysis = analyze_switched(sw, design, aopts);
  if (analysis) {
    res.gamma_analysis = analysis->gamma;
    res.mode_lyap = analysis->mode_lyap;
  }
  res.pass = pos.pass && analysis.has_value() &&
             res.gamma_analysis <= res.gamma_synthesis + tol;
  if (!pos.pass)
    throw RejectedDesignError("switched design failed positivity re-check",
                              pos.worst_overall());
  if (!res.pass)
    throw RejectedDesignError("switched closed-loop analysis gain exceeds the synthesis gain",
                              res.gamma_analysis - res.gamma_synthesis);
  return res;
}

GridFn rational_gain_table(const ObserverDesign& design, int dense_factor) {
  if (dense_factor < 1) throw StructuralError("dense_factor must be >= 1");
  const auto& g = design.X.grid();
  std::vector<double> refined;
  for (std::size_t s = 0; s + 1 < g.size(); ++s)
    for (int d = 0; d < dense_factor; ++d)
      refined.push_back(g[s] + (g[s + 1] - g[s]) * d / dense_factor);
  refined.push_back(g.back());

  std::vector<Matrix> vals;
  for (double tau : refined) {
    const Matrix X = design.X.eval(tau);
    const Matrix U = design.U_c.eval(tau);
    Matrix L(U.rows(), U.cols());
    for (Index i = 0; i < U.rows(); ++i) L.row(i) = U.row(i) / X(i, i);
    vals.push_back(std::move(L));
  }
  return GridFn(refined, std::move(vals));
}

}  // namespace dwellcert
