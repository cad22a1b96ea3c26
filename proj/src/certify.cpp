#include "dwellcert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dwellcert/positivity.hpp"
#include "dwellcert/simulate.hpp"

namespace dwellcert {

std::string to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::RangeStability: return "range_stability";
    case CertificateKind::RangeGain: return "range_gain";
    case CertificateKind::MinStability: return "min_stability";
    case CertificateKind::MinGain: return "min_gain";
  }
  return "unknown";
}

bool is_gain_kind(CertificateKind k) {
  return k == CertificateKind::RangeGain || k == CertificateKind::MinGain;
}

namespace {

RowVector col_sums(const Matrix& M, Index cols) {
  if (M.rows() == 0) return RowVector::Zero(cols);
  return M.colwise().sum();
}

double abs_max(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

double grid_fn_abs_max(const GridFn& f) {
  double m = 0.0;
  for (const auto& v : f.values()) m = std::max(m, abs_max(v));
  return m;
}

// Sparse-row accumulator: merges duplicate variable hits before insertion.
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

struct CertAssembly {
  const ImpulsiveSystemd& sys;
  DwellTimeSpec spec;
  CertificateKind kind;
  CertifyOptions opts;
  std::vector<double> grid;

  Index n = 0;
  bool gain = false;
  Index anchor = 0;  // node carrying the positivity floor: 0 (range) or last (min)

  // strict-margin constants, independent of tau and of the grid so that
  // refining the grid never tightens a row
  double eta_flow = 0.0, eta_input = 0.0, eta_jump = 0.0, eta_disc = 0.0;

  RowVector onesCc, onesFc, onesCd, onesFd;

  CertAssembly(const ImpulsiveSystemd& s, const DwellTimeSpec& sp, CertificateKind k,
               Index grid_n, const CertifyOptions& o)
      : sys(s), spec(sp), kind(k), opts(o) {
    n = sys.n();
    gain = is_gain_kind(kind);
    const bool range = spec.is_range();
    if (range != (kind == CertificateKind::RangeStability || kind == CertificateKind::RangeGain))
      throw StructuralError("dwell spec kind does not match certificate kind");
    if (!opts.explicit_grid.empty()) {
      grid = opts.explicit_grid;
      if (grid.back() != spec.horizon()) throw GridError("explicit grid must end at the dwell horizon");
      if (range) {
        bool has_tmin = false;
        for (double v : grid) has_tmin = has_tmin || v == spec.t_min();
        if (!has_tmin) throw GridError("grid must contain t_min as a node");
      }
    } else {
      grid = range ? uniform_grid_with(spec.t_max(), grid_n, spec.t_min())
                   : uniform_grid(spec.t_bar(), grid_n);
    }
    anchor = range ? 0 : static_cast<Index>(grid.size()) - 1;

    onesCc = gain ? col_sums(sys.C_c, n) : RowVector::Zero(n);
    onesFc = gain ? col_sums(sys.F_c, sys.p_c()) : RowVector::Zero(sys.p_c());
    onesCd = gain ? col_sums(sys.C_d, n) : RowVector::Zero(n);
    onesFd = gain ? col_sums(sys.F_d, sys.p_d()) : RowVector::Zero(sys.p_d());

    eta_flow = opts.eta_scale * (1.0 + grid_fn_abs_max(sys.A) + abs_max(sys.C_c));
    eta_input = opts.eta_scale * (1.0 + grid_fn_abs_max(sys.E_c) + abs_max(sys.F_c));
    eta_jump = opts.eta_scale * (1.0 + abs_max(sys.J) + abs_max(sys.C_d));
    eta_disc = opts.eta_scale * (1.0 + abs_max(sys.E_d) + abs_max(sys.F_d));
  }

  Index nodes() const { return static_cast<Index>(grid.size()); }
  int zvar(Index node, Index i) const { return static_cast<int>(node * n + i); }

  bool flow_needs_midpoint() const { return !sys.A.is_constant(); }
  bool input_needs_midpoint() const { return !sys.E_c.is_constant(); }

  // flow row at tau inside segment s (weight w in [0,1]) for state column j
  void flow_row(RowBuilder& rb, Index s, double w, Index j) const {
    const double h = grid[s + 1] - grid[s];
    const double tau = grid[s] + w * h;
    const Matrix At = sys.A.eval(tau);
    rb.add(zvar(s + 1, j), 1.0 / h);
    rb.add(zvar(s, j), -1.0 / h);
    for (Index i = 0; i < n; ++i) {
      rb.add(zvar(s, i), (1.0 - w) * At(i, j));
      rb.add(zvar(s + 1, i), w * At(i, j));
    }
  }
};

struct AssembledLp {
  LpProblem lp;
  int gamma_var = -1;
  int margin_var = -1;
};

AssembledLp assemble(const CertAssembly& a) {
  AssembledLp out;
  const Index N = a.nodes() - 1;  // segments
  const int nz = static_cast<int>(a.nodes() * a.n);
  int nv = nz;
  if (a.gain) out.gamma_var = nv++;
  if (!a.gain) out.margin_var = nv++;
  LpProblem& lp = out.lp;
  lp.resize(nv);

  for (Index i = 0; i < a.n; ++i) lp.set_bounds(a.zvar(a.anchor, i), a.opts.eps_pos, kInf);
  if (a.gain) {
    lp.set_bounds(out.gamma_var, 0.0, kInf);
    lp.set_objective(out.gamma_var, 1.0);
  } else {
    // well-centered certificates: maximize a common slack under a fixed
    // normalization of the anchored node
    lp.set_bounds(out.margin_var, 0.0, 1e3);
    lp.set_objective(out.margin_var, -1.0);
    RowBuilder rb;
    for (Index i = 0; i < a.n; ++i) rb.add(a.zvar(a.anchor, i), 1.0);
    lp.add_row(rb.take(), static_cast<double>(a.n));
  }
  auto slack = [&](RowBuilder& rb) {
    if (out.margin_var >= 0) rb.add(out.margin_var, 1.0);
  };

  RowBuilder rb;
  // flow rows: per segment at both endpoints, plus the midpoint when A varies
  std::vector<double> weights = {0.0, 1.0};
  if (a.flow_needs_midpoint()) weights.push_back(0.5);
  for (Index s = 0; s < N; ++s) {
    for (double w : weights) {
      for (Index j = 0; j < a.n; ++j) {
        a.flow_row(rb, s, w, j);
        slack(rb);
        lp.add_row(rb.take(), -a.onesCc[j] - a.eta_flow);
      }
    }
  }

  const bool minimum = a.spec.is_minimum();
  if (minimum) {
    // stationary row at t_bar covers the frozen tail tau >= t_bar
    const Matrix AT = a.sys.A.eval(a.spec.t_bar());
    for (Index j = 0; j < a.n; ++j) {
      for (Index i = 0; i < a.n; ++i) rb.add(a.zvar(N, i), AT(i, j));
      slack(rb);
      lp.add_row(rb.take(), -a.onesCc[j] - a.opts.eps - a.eta_flow);
    }
  }

  if (a.gain) {
    // input rows at nodes (midpoints when E_c varies)
    for (Index k = 0; k <= N; ++k) {
      const Matrix Ek = a.sys.E_c.eval(a.grid[static_cast<std::size_t>(k)]);
      for (Index j = 0; j < a.sys.p_c(); ++j) {
        for (Index i = 0; i < a.n; ++i) rb.add(a.zvar(k, i), Ek(i, j));
        rb.add(out.gamma_var, -1.0);
        lp.add_row(rb.take(), -a.onesFc[j] - a.eta_input);
      }
    }
    if (a.input_needs_midpoint()) {
      for (Index s = 0; s < N; ++s) {
        const double tau = 0.5 * (a.grid[static_cast<std::size_t>(s)] +
                                  a.grid[static_cast<std::size_t>(s) + 1]);
        const Matrix Em = a.sys.E_c.eval(tau);
        for (Index j = 0; j < a.sys.p_c(); ++j) {
          for (Index i = 0; i < a.n; ++i) {
            rb.add(a.zvar(s, i), 0.5 * Em(i, j));
            rb.add(a.zvar(s + 1, i), 0.5 * Em(i, j));
          }
          rb.add(out.gamma_var, -1.0);
          lp.add_row(rb.take(), -a.onesFc[j] - a.eta_input);
        }
      }
    }
    // discrete input row
    for (Index j = 0; j < a.sys.p_d(); ++j) {
      for (Index i = 0; i < a.n; ++i) rb.add(a.zvar(0, i), a.sys.E_d(i, j));
      rb.add(out.gamma_var, -1.0);
      lp.add_row(rb.take(), -a.onesFd[j] - a.eta_disc);
    }
  }

  // jump rows: every theta node in [t_min, t_max] (range) or t_bar (minimum)
  for (Index k = 0; k <= N; ++k) {
    const double theta = a.grid[static_cast<std::size_t>(k)];
    if (a.spec.is_range() && theta < a.spec.t_min()) continue;
    if (minimum && k != N) continue;
    for (Index j = 0; j < a.n; ++j) {
      for (Index i = 0; i < a.n; ++i) rb.add(a.zvar(0, i), a.sys.J(i, j));
      rb.add(a.zvar(k, j), -1.0);
      slack(rb);
      lp.add_row(rb.take(), -a.onesCd[j] - a.opts.eps - a.eta_jump);
    }
  }

  return out;
}

// Worst margin per condition group of a candidate lyap function, evaluated on
// a dense_factor-refined version of its own grid. This is the independent
// re-check path: it shares no code with the LP assembly result.
MarginReport evaluate_margins(const ImpulsiveSystemd& sys, const Certificate& cert,
                              int dense_factor, double tol) {
  if (cert.lyap.rows() != sys.n() || cert.lyap.cols() != 1)
    throw StructuralError("certificate state dimension does not match the system");
  const bool gain = is_gain_kind(cert.kind);
  const Index n = sys.n();
  const RowVector onesCc = gain ? col_sums(sys.C_c, n) : RowVector::Zero(n);
  const RowVector onesFc = gain ? col_sums(sys.F_c, sys.p_c()) : RowVector::Zero(sys.p_c());
  const RowVector onesCd = gain ? col_sums(sys.C_d, n) : RowVector::Zero(n);
  const RowVector onesFd = gain ? col_sums(sys.F_d, sys.p_d()) : RowVector::Zero(sys.p_d());

  const auto& g = cert.lyap.grid();
  MarginReport rep;
  rep.tol = tol;
  auto note = [&rep](const std::string& key, double v) {
    auto it = rep.worst.find(key);
    if (it == rep.worst.end())
      rep.worst[key] = v;
    else
      it->second = std::max(it->second, v);
  };

  auto flow_value = [&](double tau, const Vector& slope) {
    const Vector z = cert.lyap.eval(tau);
    RowVector row = slope.transpose() + z.transpose() * sys.A.eval(tau);
    if (gain) row += onesCc;
    return row.maxCoeff();
  };

  for (Index s = 0; s < cert.lyap.segments(); ++s) {
    const Vector slope = cert.lyap.segment_slope(s).col(0);
    const double t0 = g[static_cast<std::size_t>(s)], t1 = g[static_cast<std::size_t>(s) + 1];
    for (int d = 0; d <= dense_factor; ++d) {
      const double tau = t0 + (t1 - t0) * d / dense_factor;
      note("flow", flow_value(tau, slope));
      if (gain) {
        const Vector z = cert.lyap.eval(tau);
        RowVector irow = z.transpose() * sys.E_c.eval(tau) + onesFc;
        irow.array() -= cert.gamma;
        if (irow.size() > 0) note("input", irow.maxCoeff());
      }
    }
  }

  const Vector z0 = cert.lyap.eval(0.0);
  if (cert.spec.is_range()) {
    // jump rows over a refined theta sampling of [t_min, t_max]
    const int steps = std::max(1, dense_factor) * static_cast<int>(cert.lyap.segments());
    for (int d = 0; d <= steps; ++d) {
      const double theta =
          cert.spec.t_min() + (cert.spec.t_max() - cert.spec.t_min()) * d / steps;
      RowVector row = z0.transpose() * sys.J - cert.lyap.eval(theta).transpose();
      row += onesCd;
      row.array() += cert.eps;
      note("jump", row.maxCoeff());
    }
  } else {
    const double tbar = cert.spec.t_bar();
    RowVector row = z0.transpose() * sys.J - cert.lyap.eval(tbar).transpose();
    row += onesCd;
    row.array() += cert.eps;
    note("jump", row.maxCoeff());
    RowVector st = cert.lyap.eval(tbar).transpose() * sys.A.eval(tbar) + onesCc;
    st.array() += cert.eps;
    note("stationary", st.maxCoeff());
  }
  if (gain && sys.p_d() > 0) {
    RowVector drow = z0.transpose() * sys.E_d + onesFd;
    drow.array() -= cert.gamma;
    note("discrete_input", drow.maxCoeff());
  }
  const double anchor_tau = cert.spec.is_range() ? 0.0 : cert.spec.t_bar();
  note("anchor_positivity", -cert.lyap.eval(anchor_tau).minCoeff());

  rep.pass = true;
  for (const auto& [key, v] : rep.worst)
    if (v > tol) rep.pass = false;
  return rep;
}

std::optional<Certificate> run_certify(const ImpulsiveSystemd& sys,
                                       const DwellTimeSpec& spec, CertificateKind kind,
                                       Index grid_n, const CertifyOptions& opts) {
  sys.validate();
  const PositivityReport pos = check_internal_positivity(sys);
  if (!pos.positive()) throw PositivityError("system is not internally positive");
  if (grid_n < 1 && opts.explicit_grid.empty()) throw GridError("grid_n must be >= 1");

  CertAssembly a(sys, spec, kind, grid_n, opts);
  AssembledLp al = assemble(a);
  const LpSolution sol = solve(al.lp);
  if (sol.status == LpStatus::Infeasible) return std::nullopt;
  if (sol.status != LpStatus::Optimal)
    throw std::runtime_error("certificate LP did not reach optimality: " +
                             to_string(sol.status));

  Certificate cert;
  cert.kind = kind;
  cert.spec = spec;
  cert.eps = opts.eps;
  cert.gamma = a.gain ? sol.x[al.gamma_var] : 0.0;
  std::vector<Matrix> vals;
  vals.reserve(static_cast<std::size_t>(a.nodes()));
  for (Index k = 0; k < a.nodes(); ++k) {
    Matrix v(a.n, 1);
    for (Index i = 0; i < a.n; ++i) v(i, 0) = sol.x[a.zvar(k, i)];
    vals.push_back(std::move(v));
  }
  cert.lyap = GridFn(a.grid, std::move(vals));
  cert.margins = evaluate_margins(sys, cert, 1, 0.0).worst;
  return cert;
}

}  // namespace

std::optional<Certificate> certify_range_stability(const ImpulsiveSystemd& sys,
                                                   const DwellTimeSpec& spec, Index grid_n,
                                                   const CertifyOptions& opts) {
  return run_certify(sys, spec, CertificateKind::RangeStability, grid_n, opts);
}
std::optional<Certificate> certify_range_gain(const ImpulsiveSystemd& sys,
                                              const DwellTimeSpec& spec, Index grid_n,
                                              const CertifyOptions& opts) {
  return run_certify(sys, spec, CertificateKind::RangeGain, grid_n, opts);
}
std::optional<Certificate> certify_min_stability(const ImpulsiveSystemd& sys,
                                                 const DwellTimeSpec& spec, Index grid_n,
                                                 const CertifyOptions& opts) {
  return run_certify(sys, spec, CertificateKind::MinStability, grid_n, opts);
}
std::optional<Certificate> certify_min_gain(const ImpulsiveSystemd& sys,
                                            const DwellTimeSpec& spec, Index grid_n,
                                            const CertifyOptions& opts) {
  return run_certify(sys, spec, CertificateKind::MinGain, grid_n, opts);
}

MarginReport verify_certificate(const ImpulsiveSystemd& sys, const Certificate& cert,
                                int dense_factor, double tol) {
  if (dense_factor < 1) throw StructuralError("dense_factor must be >= 1");
  return evaluate_margins(sys, cert, dense_factor, tol);
}

double StorageResiduals::max_flow() const {
  double m = -kInf;
  for (double v : flow) m = std::max(m, v);
  return flow.empty() ? 0.0 : m;
}
double StorageResiduals::max_jump() const {
  double m = -kInf;
  for (double v : jump) m = std::max(m, v);
  return jump.empty() ? 0.0 : m;
}
double StorageResiduals::worst() const { return std::max(max_flow(), max_jump()); }

StorageResiduals storage_residual(const ImpulsiveSystemd& sys, const Certificate& cert,
                                  const Trajectory& traj, double gamma_override) {
  if (!is_gain_kind(cert.kind)) throw StructuralError("storage_residual needs a gain certificate");
  if (cert.lyap.rows() != sys.n()) throw StructuralError("certificate/system mismatch");
  const double gamma = gamma_override >= 0.0 ? gamma_override : cert.gamma;

  // the run must respect the certificate's dwell spec
  double prev = 0.0;
  for (double tk : traj.impulse_times) {
    if (!cert.spec.admits(tk - prev, 1e-9))
      throw DwellSpecError("trajectory violates the dwell-time spec");
    prev = tk;
  }

  const Index n = sys.n();
  const RowVector onesCc = col_sums(sys.C_c, n);
  const RowVector onesFc = col_sums(sys.F_c, sys.p_c());
  const RowVector onesCd = col_sums(sys.C_d, n);
  const RowVector onesFd = col_sums(sys.F_d, sys.p_d());

  StorageResiduals out;
  std::size_t next_impulse = 0;
  double t_last = 0.0;
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const double t = traj.times[s];
    if (traj.impulse_mark[s] == 2) {
      t_last = t;
      continue;  // right-limit rows restart the timer; flow residual at tau=0+
    }
    const double tau = t - t_last;
    const Vector& x = traj.states[s];
    const Vector z = cert.lyap.eval(tau);
    const Vector zdot = cert.lyap.right_derivative(tau).col(0);
    const Vector& w = traj.w_c[s];
    double r = (zdot.transpose() + z.transpose() * sys.A.eval(tau)).dot(x);
    if (sys.p_c() > 0) r += (z.transpose() * sys.E_c.eval(tau)).dot(w);
    if (traj.z_c[s].size() > 0) r += traj.z_c[s].sum();
    if (w.size() > 0) r -= gamma * w.sum();
    out.flow.push_back(r);

    if (traj.impulse_mark[s] == 1) {
      // paired right-limit sample follows
      const Vector& xplus = traj.states[s + 1];
      const Vector z0 = cert.lyap.eval(0.0);
      double rj = z0.dot(xplus) - z.dot(x);
      if (next_impulse < traj.z_d.size() && traj.z_d[next_impulse].size() > 0)
        rj += traj.z_d[next_impulse].sum();
      if (next_impulse < traj.w_d.size() && traj.w_d[next_impulse].size() > 0)
        rj -= gamma * traj.w_d[next_impulse].sum();
      out.jump.push_back(rj);
      ++next_impulse;
    }
  }
  return out;
}

}  // namespace dwellcert
