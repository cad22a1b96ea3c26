#include "dwellcert/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace dwellcert {

std::vector<double> sample_dwell_sequence(const DwellTimeSpec& spec, double horizon,
                                          std::uint64_t seed) {
  if (!(horizon > 0)) throw OrderingError("horizon must be positive");
  Rng rng(seed);
  std::vector<double> times;
  double t = 0.0;
  while (true) {
    double gap;
    if (spec.is_range()) {
      gap = rng.uniform(spec.t_min(), spec.t_max());
    } else {
      // t_bar plus an exponential tail with mean t_bar/2, truncated at 5 t_bar
      gap = std::min(spec.t_bar() + rng.exponential(spec.t_bar() / 2.0), 5.0 * spec.t_bar());
    }
    t += gap;
    if (t >= horizon) break;
    times.push_back(t);
  }
  return times;
}

namespace {

// one RK4 step of dx/dt = A(tau) x + E(tau) w(t) with timer tau = t - t_anchor
Vector rk4_step(const ImpulsiveSystemd& sys, const Vector& x, double t, double t_anchor,
                double h, const Signal& w_c) {
  auto f = [&](double tt, const Vector& xx) -> Vector {
    const double tau = tt - t_anchor;
    Vector dx = sys.A.eval(tau) * xx;
    if (sys.p_c() > 0) dx += sys.E_c.eval(tau) * w_c(tt);
    return dx;
  };
  const Vector k1 = f(t, x);
  const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Recorder {
  const ImpulsiveSystemd& sys;
  const Signal& w_c;
  Trajectory& traj;

  void sample(double t, const Vector& x, int mark) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    const Vector w = sys.p_c() > 0 ? w_c(t) : Vector::Zero(0);
    Vector z = Vector::Zero(sys.q_c());
    if (sys.q_c() > 0) {
      z = sys.C_c * x;
      if (sys.p_c() > 0) z += sys.F_c * w;
    }
    traj.z_c.push_back(std::move(z));
    traj.w_c.push_back(w);
    traj.impulse_mark.push_back(mark);
  }
};

void check_finite(const Vector& x, double t, double limit) {
  if (!x.allFinite() || x.norm() > limit)
    throw DivergenceError("state diverged during simulation", t);
}

}  // namespace

Trajectory simulate(const ImpulsiveSystemd& sys, const std::vector<double>& impulses,
                    const Signal& w_c, const SequenceSignal& w_d, const Vector& x0,
                    const SimOptions& opts) {
  sys.validate();
  if (x0.size() != sys.n()) throw DimensionError("x0 size != n");
  if (!(opts.dt > 0)) throw OrderingError("dt must be positive");
  for (std::size_t k = 0; k + 1 < impulses.size(); ++k)
    if (!(impulses[k + 1] > impulses[k])) throw OrderingError("impulse times must increase");

  double horizon = opts.horizon;
  if (horizon <= 0) {
    const double last = impulses.empty() ? 0.0 : impulses.back();
    horizon = last + (impulses.empty() ? 1.0 : last / std::max<std::size_t>(impulses.size(), 1));
  }

  Trajectory traj;
  Recorder rec{sys, w_c, traj};
  Vector x = x0;
  double t = 0.0, t_anchor = 0.0;
  rec.sample(0.0, x, 0);

  std::vector<double> breaks = impulses;
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double v) { return v >= horizon; }),
               breaks.end());
  breaks.push_back(horizon);

  int k = 1;  // impulse counter (the paper's k >= 1 for jumps)
  for (double tb : breaks) {
    const bool is_impulse = tb < horizon;
    const int steps = std::max(1, static_cast<int>(std::ceil((tb - t) / opts.dt)));
    const double h = (tb - t) / steps;
    for (int s = 0; s < steps; ++s) {
      x = rk4_step(sys, x, t, t_anchor, h, w_c);
      t = (s + 1 == steps) ? tb : t + h;
      check_finite(x, t, opts.divergence_norm);
      rec.sample(t, x, (is_impulse && s + 1 == steps) ? 1 : 0);
    }
    if (is_impulse) {
      const Vector wd = sys.p_d() > 0 ? w_d(k) : Vector::Zero(0);
      Vector zd = Vector::Zero(sys.q_d());
      if (sys.q_d() > 0) {
        zd = sys.C_d * x;  // left-limit state
        if (sys.p_d() > 0) zd += sys.F_d * wd;
      }
      traj.impulse_times.push_back(t);
      traj.z_d.push_back(std::move(zd));
      traj.w_d.push_back(wd);
      Vector xp = sys.J * x;
      if (sys.p_d() > 0) xp += sys.E_d * wd;
      x = std::move(xp);
      check_finite(x, t, opts.divergence_norm);
      rec.sample(t, x, 2);
      t_anchor = t;
      ++k;
    }
  }
  return traj;
}

double IntervalRun::enclosure_violation() const {
  double worst = 0.0;
  for (std::size_t s = 0; s < plant.size(); ++s) {
    worst = std::max(worst, (lower.states[s] - plant.states[s]).maxCoeff());
    worst = std::max(worst, (plant.states[s] - upper.states[s]).maxCoeff());
  }
  return worst;
}

namespace {

// Plant and the two observers co-simulated as one stacked RK4 state so the
// observers see the exact same measurement signal stage by stage.
struct ObserverSim {
  const ImpulsiveSystemd& plant;
  const ObserverDesign& design;
  const BoundedSignal& w_c;

  Vector flow(double t, double tau, const Vector& stacked) const {
    const Index n = plant.n();
    const Vector x = stacked.segment(0, n);
    const Vector xm = stacked.segment(n, n);
    const Vector xp = stacked.segment(2 * n, n);
    const Matrix A = plant.A.eval(tau);
    const Matrix Ec = plant.E_c.eval(tau);
    const Matrix L = design.L_c.eval(tau);

    const Vector w = plant.p_c() > 0 ? w_c.value(t) : Vector::Zero(0);
    const Vector wlo = plant.p_c() > 0 ? w_c.lo(t) : Vector::Zero(0);
    const Vector whi = plant.p_c() > 0 ? w_c.hi(t) : Vector::Zero(0);

    Vector y = Vector::Zero(plant.q_c());
    if (plant.q_c() > 0) {
      y = plant.C_c * x;
      if (plant.p_c() > 0) y += plant.F_c * w;
    }
    auto obs_flow = [&](const Vector& xo, const Vector& wo) -> Vector {
      Vector dx = A * xo;
      if (plant.p_c() > 0) dx += Ec * wo;
      if (plant.q_c() > 0) {
        Vector innov = y - plant.C_c * xo;
        if (plant.p_c() > 0) innov -= plant.F_c * wo;
        dx += L * innov;
      }
      return dx;
    };
    Vector out(3 * n);
    Vector dx = A * x;
    if (plant.p_c() > 0) dx += Ec * w;
    out.segment(0, n) = dx;
    out.segment(n, n) = obs_flow(xm, wlo);
    out.segment(2 * n, n) = obs_flow(xp, whi);
    return out;
  }
};

}  // namespace

IntervalRun run_interval_observer(const ImpulsiveSystemd& plant,
                                  const ObserverDesign& design,
                                  const std::vector<double>& impulses,
                                  const BoundedSignal& w_c, const BoundedSequence& w_d,
                                  const Vector& x0, const Vector& x0_lo,
                                  const Vector& x0_hi, const SimOptions& opts) {
  plant.validate();
  const Index n = plant.n();
  if (x0.size() != n || x0_lo.size() != n || x0_hi.size() != n)
    throw DimensionError("initial state size != n");
  if (((x0 - x0_lo).minCoeff() < 0) || ((x0_hi - x0).minCoeff() < 0))
    throw OrderingError("initial bounds must satisfy x0_lo <= x0 <= x0_hi");

  IntervalRun run;
  auto record = [&](Trajectory& traj, double t, const Vector& x, int mark) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.impulse_mark.push_back(mark);
  };

  ObserverSim sim{plant, design, w_c};
  Vector stacked(3 * n);
  stacked << x0, x0_lo, x0_hi;

  double horizon = opts.horizon;
  if (horizon <= 0) horizon = impulses.empty() ? 1.0 : impulses.back() * 1.1;

  double t = 0.0, t_anchor = 0.0;
  record(run.plant, 0.0, x0, 0);
  record(run.lower, 0.0, x0_lo, 0);
  record(run.upper, 0.0, x0_hi, 0);

  std::vector<double> breaks;
  for (double v : impulses)
    if (v < horizon) breaks.push_back(v);
  breaks.push_back(horizon);

  int k = 1;
  for (double tb : breaks) {
    const bool is_impulse = tb < horizon;
    const int steps = std::max(1, static_cast<int>(std::ceil((tb - t) / opts.dt)));
    const double h = (tb - t) / steps;
    for (int s = 0; s < steps; ++s) {
      auto f = [&](double tt, const Vector& xx) { return sim.flow(tt, tt - t_anchor, xx); };
      const Vector k1 = f(t, stacked);
      const Vector k2 = f(t + 0.5 * h, stacked + 0.5 * h * k1);
      const Vector k3 = f(t + 0.5 * h, stacked + 0.5 * h * k2);
      const Vector k4 = f(t + h, stacked + h * k3);
      stacked += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = (s + 1 == steps) ? tb : t + h;
      check_finite(stacked, t, opts.divergence_norm);
      const int mark = (is_impulse && s + 1 == steps) ? 1 : 0;
      record(run.plant, t, stacked.segment(0, n), mark);
      record(run.lower, t, stacked.segment(n, n), mark);
      record(run.upper, t, stacked.segment(2 * n, n), mark);
    }
    if (is_impulse) {
      const Vector wd = plant.p_d() > 0 ? w_d.value(k) : Vector::Zero(0);
      const Vector wdlo = plant.p_d() > 0 ? w_d.lo(k) : Vector::Zero(0);
      const Vector wdhi = plant.p_d() > 0 ? w_d.hi(k) : Vector::Zero(0);
      const Vector x = stacked.segment(0, n);
      Vector yd = Vector::Zero(plant.q_d());
      if (plant.q_d() > 0) {
        yd = plant.C_d * x;
        if (plant.p_d() > 0) yd += plant.F_d * wd;
      }
      auto obs_jump = [&](const Vector& xo, const Vector& wo) -> Vector {
        Vector xn = plant.J * xo;
        if (plant.p_d() > 0) xn += plant.E_d * wo;
        if (plant.q_d() > 0) {
          Vector innov = yd - plant.C_d * xo;
          if (plant.p_d() > 0) innov -= plant.F_d * wo;
          xn += design.L_d * innov;
        }
        return xn;
      };
      Vector xp = plant.J * x;
      if (plant.p_d() > 0) xp += plant.E_d * wd;
      const Vector xmp = obs_jump(stacked.segment(n, n), wdlo);
      const Vector xpp = obs_jump(stacked.segment(2 * n, n), wdhi);
      stacked << xp, xmp, xpp;
      check_finite(stacked, t, opts.divergence_norm);
      run.plant.impulse_times.push_back(t);
      run.lower.impulse_times.push_back(t);
      run.upper.impulse_times.push_back(t);
      record(run.plant, t, stacked.segment(0, n), 2);
      record(run.lower, t, stacked.segment(n, n), 2);
      record(run.upper, t, stacked.segment(2 * n, n), 2);
      t_anchor = t;
      ++k;
    }
  }
  return run;
}

double SwitchedIntervalRun::active_enclosure_violation() const {
  // only the block of the active mode is meaningful between switches; the
  // right-limit row of a switch already lives in the new interval
  double worst = 0.0;
  std::size_t interval = 0;
  for (std::size_t s = 0; s < lifted.plant.size(); ++s) {
    if (lifted.plant.impulse_mark[s] == 2) ++interval;
    const Index m = modes[std::min(interval, modes.size() - 1)];
    const auto seg = [&](const Trajectory& tr) {
      return tr.states[s].segment(m * block_dim, block_dim);
    };
    worst = std::max(worst, (seg(lifted.lower) - seg(lifted.plant)).maxCoeff());
    worst = std::max(worst, (seg(lifted.plant) - seg(lifted.upper)).maxCoeff());
  }
  return worst;
}

SwitchedIntervalRun run_switched_interval_observer(
    const SwitchedSystemd& sw, const SwitchedObserverDesign& design,
    const std::vector<double>& switch_times, const std::vector<Index>& modes,
    const BoundedSignal& w, const Vector& x0, const Vector& x0_lo, const Vector& x0_hi,
    const SimOptions& opts) {
  sw.validate();
  if (modes.size() != switch_times.size() + 1)
    throw StructuralError("need one mode per inter-switch interval");
  for (std::size_t k = 0; k + 1 < modes.size(); ++k)
    if (modes[k] == modes[k + 1])
      throw StructuralError("consecutive intervals must use different modes");
  const Index n = sw.n(), nm = sw.num_modes();
  if (x0.size() != n) throw DimensionError("x0 size != n");

  // lifted plant with the design's gains; jumps are applied per switch below
  LiftedSwitched<double> lifted = build_switched_error_system(sw, design);
  // observers for the plant need the plant dynamics, not the error dynamics:
  // rebuild the lifted plant and drive observers through an ObserverDesign view
  LiftedSwitched<double> plant = lift_switched(sw);

  ObserverDesign dv;
  dv.spec = design.spec;
  dv.M_c = Matrix::Identity(n * nm, n * nm);
  dv.M_d = Matrix::Identity(n * nm, n * nm);
  dv.gamma = design.gamma;
  dv.eps = design.eps;
  // block-diagonal gain schedule over the lifted measured output
  {
    const auto& grid = design.L.front().grid();
    std::vector<Matrix> lvals;
    for (double tau : grid) {
      Matrix L = Matrix::Zero(n * nm, sw.q() * nm);
      for (Index m = 0; m < nm; ++m)
        L.block(m * n, m * sw.q(), n, sw.q()) =
            design.L[static_cast<std::size_t>(m)].eval(tau);
      lvals.push_back(std::move(L));
    }
    dv.L_c = GridFn(std::vector<double>(grid.begin(), grid.end()), std::move(lvals));
    dv.L_d = Matrix::Zero(n * nm, 0);
  }

  // embed initial condition in the first active block
  auto embed = [&](const Vector& v, Index m) {
    Vector out = Vector::Zero(n * nm);
    out.segment(m * n, n) = v;
    return out;
  };

  SwitchedIntervalRun out;
  out.modes = modes;
  out.switch_times = switch_times;
  out.block_dim = n;

  // simulate interval-by-interval, applying the matching jump map per switch
  IntervalRun& run = out.lifted;
  Vector x = embed(x0, modes[0]);
  Vector xlo = embed(x0_lo, modes[0]);
  Vector xhi = embed(x0_hi, modes[0]);

  double t = 0.0;
  const double horizon = opts.horizon > 0
                             ? opts.horizon
                             : (switch_times.empty() ? 1.0 : switch_times.back() * 1.1);
  auto record = [&](Trajectory& traj, double tt, const Vector& v, int mark) {
    traj.times.push_back(tt);
    traj.states.push_back(v);
    traj.impulse_mark.push_back(mark);
  };
  record(run.plant, 0, x, 0);
  record(run.lower, 0, xlo, 0);
  record(run.upper, 0, xhi, 0);

  std::vector<double> breaks;
  for (double v : switch_times)
    if (v < horizon) breaks.push_back(v);
  breaks.push_back(horizon);

  ObserverSim sim{plant.sys, dv, w};
  Vector stacked(3 * n * nm);
  stacked << x, xlo, xhi;
  double t_anchor = 0.0;
  std::size_t interval = 0;
  for (double tb : breaks) {
    const bool is_switch = tb < horizon;
    const int steps = std::max(1, static_cast<int>(std::ceil((tb - t) / opts.dt)));
    const double h = (tb - t) / steps;
    for (int s = 0; s < steps; ++s) {
      auto f = [&](double tt, const Vector& xx) { return sim.flow(tt, tt - t_anchor, xx); };
      const Vector k1 = f(t, stacked);
      const Vector k2 = f(t + 0.5 * h, stacked + 0.5 * h * k1);
      const Vector k3 = f(t + 0.5 * h, stacked + 0.5 * h * k2);
      const Vector k4 = f(t + h, stacked + h * k3);
      stacked += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = (s + 1 == steps) ? tb : t + h;
      check_finite(stacked, t, opts.divergence_norm);
      const int mark = (is_switch && s + 1 == steps) ? 1 : 0;
      record(run.plant, t, stacked.segment(0, n * nm), mark);
      record(run.lower, t, stacked.segment(n * nm, n * nm), mark);
      record(run.upper, t, stacked.segment(2 * n * nm, n * nm), mark);
    }
    if (is_switch) {
      const Index from = modes[interval];
      const Index to = modes[interval + 1];
      Matrix Jmap;
      for (std::size_t j = 0; j < plant.jump_pairs.size(); ++j)
        if (plant.jump_pairs[j].first == to && plant.jump_pairs[j].second == from)
          Jmap = plant.jump_maps[j];
      for (int part = 0; part < 3; ++part)
        stacked.segment(part * n * nm, n * nm) =
            (Jmap * stacked.segment(part * n * nm, n * nm)).eval();
      run.plant.impulse_times.push_back(t);
      run.lower.impulse_times.push_back(t);
      run.upper.impulse_times.push_back(t);
      record(run.plant, t, stacked.segment(0, n * nm), 2);
      record(run.lower, t, stacked.segment(n * nm, n * nm), 2);
      record(run.upper, t, stacked.segment(2 * n * nm, n * nm), 2);
      t_anchor = t;
      ++interval;
    }
  }
  return out;
}

double trapezoid_l1(const std::vector<double>& times, const std::vector<Vector>& values) {
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < times.size(); ++s) {
    const double h = times[s + 1] - times[s];
    if (h <= 0) continue;  // paired impulse rows carry zero width
    const double a = values[s].size() ? values[s].cwiseAbs().sum() : 0.0;
    const double b = values[s + 1].size() ? values[s + 1].cwiseAbs().sum() : 0.0;
    acc += 0.5 * h * (a + b);
  }
  return acc;
}

EmpiricalGainResult empirical_gain(const ImpulsiveSystemd& sys, const DwellTimeSpec& spec,
                                   const EmpiricalGainOptions& opts) {
  sys.validate();
  const double t_ref = spec.is_range() ? spec.t_max() : spec.t_bar();
  const double horizon =
      opts.horizon > 0 ? opts.horizon : std::clamp(24.0 * t_ref, 10.0, 60.0);

  EmpiricalGainResult res;
  for (int trial = 0; trial < opts.trials; ++trial) {
    Rng rng(opts.seed * 0x9e3779b9ULL + static_cast<std::uint64_t>(trial) + 1);
    const std::vector<double> impulses =
        sample_dwell_sequence(spec, horizon, rng.next());

    // nonnegative pulse train per continuous channel, snapped to the sampling
    // grid so trapezoidal quadrature sees the edges exactly
    struct Pulse {
      double t0, t1, amp;
    };
    std::vector<std::vector<Pulse>> pulses(static_cast<std::size_t>(sys.p_c()));
    for (auto& chan : pulses) {
      const int np = rng.uniform_int(1, 5);
      for (int i = 0; i < np; ++i) {
        double t0 = rng.uniform(0.0, 0.55 * horizon);
        double dur = rng.uniform(2.0 * opts.dt, 0.12 * horizon);
        t0 = std::round(t0 / opts.dt) * opts.dt;
        dur = std::max(opts.dt, std::round(dur / opts.dt) * opts.dt);
        chan.push_back({t0, t0 + dur, rng.uniform(0.1, 1.5)});
      }
    }
    Signal w_c = [pulses, p = sys.p_c()](double t) {
      Vector w = Vector::Zero(p);
      for (Index j = 0; j < p; ++j)
        for (const auto& pu : pulses[static_cast<std::size_t>(j)])
          if (t >= pu.t0 && t < pu.t1) w[j] += pu.amp;
      return w;
    };
    // geometric-decay discrete inputs
    std::vector<std::pair<double, double>> geo(static_cast<std::size_t>(sys.p_d()));
    for (auto& [a, r] : geo) {
      a = rng.uniform(0.2, 1.0);
      r = rng.uniform(0.3, 0.8);
    }
    SequenceSignal w_d = [geo, p = sys.p_d()](int k) {
      Vector w = Vector::Zero(p);
      for (Index j = 0; j < p; ++j) {
        const auto& [a, r] = geo[static_cast<std::size_t>(j)];
        w[j] = k <= 25 ? a * std::pow(r, k) : 0.0;
      }
      return w;
    };

    SimOptions so;
    so.dt = opts.dt;
    so.horizon = horizon;
    const Trajectory traj =
        simulate(sys, impulses, w_c, w_d, Vector::Zero(sys.n()), so);

    const double in_c = trapezoid_l1(traj.times, traj.w_c);
    const double out_c = trapezoid_l1(traj.times, traj.z_c);
    double in_d = 0.0, out_d = 0.0;
    for (const auto& v : traj.w_d) in_d += v.size() ? v.cwiseAbs().sum() : 0.0;
    for (const auto& v : traj.z_d) out_d += v.size() ? v.cwiseAbs().sum() : 0.0;

    const double denom = in_c + in_d;
    if (denom < 1e-12) {
      ++res.trials_skipped;
      continue;
    }
    res.worst_ratio = std::max(res.worst_ratio, (out_c + out_d) / denom);
    ++res.trials_used;
  }
  return res;
}

EmpiricalGainResult empirical_gain_switched(const SwitchedSystemd& sw,
                                            const SwitchedObserverDesign& design,
                                            const EmpiricalGainOptions& opts) {
  sw.validate();
  const Index n = sw.n(), p = sw.p(), nm = sw.num_modes();
  const DwellTimeSpec& spec = design.spec;
  const double horizon =
      opts.horizon > 0 ? opts.horizon : std::clamp(24.0 * spec.t_bar(), 10.0, 60.0);

  EmpiricalGainResult res;
  for (int trial = 0; trial < opts.trials; ++trial) {
    Rng rng(opts.seed * 0x9e3779b9ULL + static_cast<std::uint64_t>(trial) + 1);
    const std::vector<double> switches = sample_dwell_sequence(spec, horizon, rng.next());
    std::vector<Index> modes;
    modes.push_back(rng.uniform_int(0, static_cast<int>(nm) - 1));
    for (std::size_t k = 0; k < switches.size(); ++k) {
      Index next = modes.back();
      while (next == modes.back())
        next = rng.uniform_int(0, static_cast<int>(nm) - 1);
      modes.push_back(next);
    }

    struct Pulse {
      double t0, t1, amp;
    };
    std::vector<std::vector<Pulse>> pulses(static_cast<std::size_t>(p));
    for (auto& chan : pulses) {
      const int np = rng.uniform_int(1, 5);
      for (int i = 0; i < np; ++i) {
        double t0 = std::round(rng.uniform(0.0, 0.55 * horizon) / opts.dt) * opts.dt;
        double dur = std::max(opts.dt,
                              std::round(rng.uniform(2 * opts.dt, 0.12 * horizon) / opts.dt) * opts.dt);
        chan.push_back({t0, t0 + dur, rng.uniform(0.1, 1.5)});
      }
    }
    auto w = [&](double t) {
      Vector v = Vector::Zero(p);
      for (Index j = 0; j < p; ++j)
        for (const auto& pu : pulses[static_cast<std::size_t>(j)])
          if (t >= pu.t0 && t < pu.t1) v[j] += pu.amp;
      return v;
    };

    // error state is continuous at switches; only the active mode flows it
    Vector e = Vector::Zero(n);
    double t = 0.0, t_anchor = 0.0;
    std::size_t interval = 0;
    double out_acc = 0.0, in_acc = 0.0;
    double z_prev = 0.0, w_prev = w(0.0).cwiseAbs().sum();
    std::vector<double> breaks = switches;
    breaks.push_back(horizon);
    for (double tb : breaks) {
      const auto& mode = sw.modes[static_cast<std::size_t>(modes[interval])];
      const auto& L = design.L[static_cast<std::size_t>(modes[interval])];
      const int steps = std::max(1, static_cast<int>(std::ceil((tb - t) / opts.dt)));
      const double h = (tb - t) / steps;
      auto f = [&](double tt, const Vector& ee) -> Vector {
        const Matrix Lm = L.eval(tt - t_anchor);
        return (mode.A - Lm * mode.C) * ee + (mode.E - Lm * mode.F) * w(tt);
      };
      for (int s = 0; s < steps; ++s) {
        const Vector k1 = f(t, e);
        const Vector k2 = f(t + 0.5 * h, e + 0.5 * h * k1);
        const Vector k3 = f(t + 0.5 * h, e + 0.5 * h * k2);
        const Vector k4 = f(t + h, e + h * k3);
        e += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = (s + 1 == steps) ? tb : t + h;
        check_finite(e, t, opts.horizon > 0 ? 1e12 : 1e12);
        const double z = (design.M * e).cwiseAbs().sum();
        const double wv = w(t).cwiseAbs().sum();
        out_acc += 0.5 * h * (z_prev + z);
        in_acc += 0.5 * h * (w_prev + wv);
        z_prev = z;
        w_prev = wv;
      }
      if (tb < horizon) {
        ++interval;
        t_anchor = tb;
      }
    }
    if (in_acc < 1e-12) {
      ++res.trials_skipped;
      continue;
    }
    res.worst_ratio = std::max(res.worst_ratio, out_acc / in_acc);
    ++res.trials_used;
  }
  return res;
}

}  // namespace dwellcert
