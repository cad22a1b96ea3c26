#include "dwellcert/serialization.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace dwellcert {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw ConfigError(where + ": " + msg);
}

void require_keys(const Json& j, const std::string& where,
                  const std::set<std::string>& allowed,
                  const std::set<std::string>& required) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) fail(where + "." + key, "unknown key");
  }
  for (const auto& key : required)
    if (!j.contains(key)) fail(where, "missing required key '" + key + "'");
}

double number_at(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index jx = 0; jx < m.cols(); ++jx) row.push_back(m(i, jx));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of rows");
  // row-major nested arrays; a flat numeric array is a single column
  if (j.front().is_number()) {
    Matrix m(static_cast<Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i)
      m(static_cast<Index>(i), 0) = number_at(j[i], where);
    return m;
  }
  const std::size_t cols = j.front().size();
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      fail(where, "row " + std::to_string(i) + " has inconsistent length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(i), static_cast<Index>(c)) =
          number_at(j[i][c], where + "[" + std::to_string(i) + "]");
  }
  return m;
}

Json grid_fn_to_json(const GridFn& f) {
  Json j;
  j["grid"] = f.grid();
  Json vals = Json::array();
  for (const auto& v : f.values()) vals.push_back(matrix_to_json(v));
  j["values"] = std::move(vals);
  return j;
}

GridFn grid_fn_from_json(const Json& j, const std::string& where) {
  require_keys(j, where, {"grid", "values"}, {"grid", "values"});
  std::vector<double> grid;
  for (const auto& v : j.at("grid")) grid.push_back(number_at(v, where + ".grid"));
  std::vector<Matrix> values;
  for (const auto& v : j.at("values"))
    values.push_back(matrix_from_json(v, where + ".values"));
  try {
    return GridFn(std::move(grid), std::move(values));
  } catch (const std::exception& e) {
    fail(where, e.what());
  }
}

Json dwell_to_json(const DwellTimeSpec& spec) {
  Json j;
  if (spec.is_range()) {
    j["type"] = "range";
    j["t_min"] = spec.t_min();
    j["t_max"] = spec.t_max();
  } else {
    j["type"] = "minimum";
    j["t_bar"] = spec.t_bar();
  }
  return j;
}

DwellTimeSpec dwell_from_json(const Json& j, const std::string& where) {
  require_keys(j, where, {"type", "t_min", "t_max", "t_bar"}, {"type"});
  const std::string type = j.at("type").is_string() ? j.at("type").get<std::string>() : "";
  try {
    if (type == "range")
      return DwellTimeSpec::range(number_at(j.at("t_min"), where + ".t_min"),
                                  number_at(j.at("t_max"), where + ".t_max"));
    if (type == "minimum")
      return DwellTimeSpec::minimum(number_at(j.at("t_bar"), where + ".t_bar"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(where, e.what());
  }
  fail(where + ".type", "expected 'range' or 'minimum'");
}

Json certificate_to_json(const Certificate& cert) {
  Json j;
  j["type"] = "certificate";
  j["kind"] = to_string(cert.kind);
  j["dwell"] = dwell_to_json(cert.spec);
  j["eps"] = cert.eps;
  if (is_gain_kind(cert.kind)) j["gamma"] = cert.gamma;
  j["lyap"] = grid_fn_to_json(cert.lyap);
  Json margins;
  for (const auto& [key, v] : cert.margins) margins[key] = v;
  j["margins"] = std::move(margins);
  return j;
}

Certificate certificate_from_json(const Json& j) {
  require_keys(j, "certificate", {"type", "kind", "dwell", "eps", "gamma", "lyap", "margins"},
               {"kind", "dwell", "eps", "lyap"});
  Certificate cert;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "range_stability") cert.kind = CertificateKind::RangeStability;
  else if (kind == "range_gain") cert.kind = CertificateKind::RangeGain;
  else if (kind == "min_stability") cert.kind = CertificateKind::MinStability;
  else if (kind == "min_gain") cert.kind = CertificateKind::MinGain;
  else fail("certificate.kind", "unknown kind '" + kind + "'");
  cert.spec = dwell_from_json(j.at("dwell"), "certificate.dwell");
  cert.eps = number_at(j.at("eps"), "certificate.eps");
  if (j.contains("gamma")) cert.gamma = number_at(j.at("gamma"), "certificate.gamma");
  cert.lyap = grid_fn_from_json(j.at("lyap"), "certificate.lyap");
  if (j.contains("margins"))
    for (const auto& [key, v] : j.at("margins").items())
      cert.margins[key] = number_at(v, "certificate.margins." + key);
  return cert;
}

Json design_to_json(const ObserverDesign& d) {
  Json j;
  j["type"] = "observer_design";
  j["dwell"] = dwell_to_json(d.spec);
  j["gamma"] = d.gamma;
  j["alpha"] = d.alpha;
  j["eps"] = d.eps;
  j["X"] = grid_fn_to_json(d.X);
  j["U_c"] = grid_fn_to_json(d.U_c);
  j["U_d"] = matrix_to_json(d.U_d);
  j["L_c"] = grid_fn_to_json(d.L_c);
  j["L_d"] = matrix_to_json(d.L_d);
  j["M_c"] = matrix_to_json(d.M_c);
  j["M_d"] = matrix_to_json(d.M_d);
  return j;
}

ObserverDesign design_from_json(const Json& j) {
  require_keys(j, "design",
               {"type", "dwell", "gamma", "alpha", "eps", "X", "U_c", "U_d", "L_c",
                "L_d", "M_c", "M_d"},
               {"dwell", "gamma", "X", "U_c", "U_d", "L_c", "L_d", "M_c", "M_d"});
  ObserverDesign d;
  d.spec = dwell_from_json(j.at("dwell"), "design.dwell");
  d.gamma = number_at(j.at("gamma"), "design.gamma");
  if (j.contains("alpha")) d.alpha = number_at(j.at("alpha"), "design.alpha");
  if (j.contains("eps")) d.eps = number_at(j.at("eps"), "design.eps");
  d.X = grid_fn_from_json(j.at("X"), "design.X");
  d.U_c = grid_fn_from_json(j.at("U_c"), "design.U_c");
  d.U_d = matrix_from_json(j.at("U_d"), "design.U_d");
  d.L_c = grid_fn_from_json(j.at("L_c"), "design.L_c");
  d.L_d = matrix_from_json(j.at("L_d"), "design.L_d");
  d.M_c = matrix_from_json(j.at("M_c"), "design.M_c");
  d.M_d = matrix_from_json(j.at("M_d"), "design.M_d");
  return d;
}

Json switched_design_to_json(const SwitchedObserverDesign& d) {
  Json j;
  j["type"] = "switched_observer_design";
  j["dwell"] = dwell_to_json(d.spec);
  j["gamma"] = d.gamma;
  j["alpha"] = d.alpha;
  j["eps"] = d.eps;
  Json modes = Json::array();
  for (std::size_t m = 0; m < d.X.size(); ++m) {
    Json mode;
    mode["X"] = grid_fn_to_json(d.X[m]);
    mode["U"] = grid_fn_to_json(d.U[m]);
    mode["L"] = grid_fn_to_json(d.L[m]);
    modes.push_back(std::move(mode));
  }
  j["modes"] = std::move(modes);
  j["M"] = matrix_to_json(d.M);
  return j;
}

SwitchedObserverDesign switched_design_from_json(const Json& j) {
  require_keys(j, "design", {"type", "dwell", "gamma", "alpha", "eps", "modes", "M"},
               {"dwell", "gamma", "modes", "M"});
  SwitchedObserverDesign d;
  d.spec = dwell_from_json(j.at("dwell"), "design.dwell");
  d.gamma = number_at(j.at("gamma"), "design.gamma");
  if (j.contains("alpha")) d.alpha = number_at(j.at("alpha"), "design.alpha");
  if (j.contains("eps")) d.eps = number_at(j.at("eps"), "design.eps");
  for (const auto& mode : j.at("modes")) {
    require_keys(mode, "design.modes[]", {"X", "U", "L"}, {"X", "U", "L"});
    d.X.push_back(grid_fn_from_json(mode.at("X"), "design.modes[].X"));
    d.U.push_back(grid_fn_from_json(mode.at("U"), "design.modes[].U"));
    d.L.push_back(grid_fn_from_json(mode.at("L"), "design.modes[].L"));
  }
  d.M = matrix_from_json(j.at("M"), "design.M");
  return d;
}

std::string canonical(const Json& j) { return j.dump(2) + "\n"; }

namespace {

InputConfig input_from_json(const Json& j, const std::string& where,
                            const std::set<std::string>& types) {
  require_keys(j, where, {"type", "lo", "hi"}, {"type"});
  InputConfig cfg;
  cfg.type = j.at("type").get<std::string>();
  if (!types.count(cfg.type)) fail(where + ".type", "unsupported input type '" + cfg.type + "'");
  if (j.contains("lo")) cfg.lo = number_at(j.at("lo"), where + ".lo");
  if (j.contains("hi")) cfg.hi = number_at(j.at("hi"), where + ".hi");
  if (cfg.lo > cfg.hi) fail(where, "lo exceeds hi");
  return cfg;
}

Vector vector_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = number_at(j[i], where);
  return v;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

ProblemConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  require_keys(j, "config",
               {"mode", "task", "system", "dwell", "weights", "grid", "gains", "sim"},
               {"mode", "system", "dwell"});
  ProblemConfig cfg;
  cfg.mode = j.at("mode").get<std::string>();
  if (cfg.mode != "impulsive" && cfg.mode != "switched")
    fail("config.mode", "expected 'impulsive' or 'switched'");
  if (j.contains("task")) {
    cfg.task = j.at("task").get<std::string>();
    static const std::set<std::string> tasks = {"check", "analyze", "synthesize", "simulate"};
    if (!tasks.count(cfg.task)) fail("config.task", "unknown task '" + cfg.task + "'");
  }
  cfg.dwell = dwell_from_json(j.at("dwell"), "config.dwell");

  const Json& sys = j.at("system");
  if (cfg.mode == "impulsive") {
    require_keys(sys, "config.system",
                 {"A", "E_c", "J", "E_d", "C_c", "F_c", "C_d", "F_d"},
                 {"A", "J"});
    auto mat = [&](const char* key, Index rows, Index cols) -> Matrix {
      if (!sys.contains(key)) return Matrix::Zero(rows, cols);
      return matrix_from_json(sys.at(key), std::string("config.system.") + key);
    };
    const Matrix A = matrix_from_json(sys.at("A"), "config.system.A");
    const Index n = A.rows();
    const Matrix J = matrix_from_json(sys.at("J"), "config.system.J");
    const Matrix E_c = mat("E_c", n, 0);
    const Matrix E_d = mat("E_d", n, 0);
    const Matrix C_c = mat("C_c", 0, n);
    const Matrix C_d = mat("C_d", 0, n);
    const Matrix F_c = mat("F_c", C_c.rows(), E_c.cols());
    const Matrix F_d = mat("F_d", C_d.rows(), E_d.cols());
    try {
      cfg.impulsive = ImpulsiveSystemd::constant(A, E_c, J, E_d, C_c, F_c, C_d, F_d,
                                                 cfg.dwell.horizon());
    } catch (const std::exception& e) {
      fail("config.system", e.what());
    }
  } else {
    require_keys(sys, "config.system", {"modes"}, {"modes"});
    SwitchedSystemd sw;
    for (const auto& mode : sys.at("modes")) {
      require_keys(mode, "config.system.modes[]", {"A", "E", "C", "F"}, {"A", "E", "C", "F"});
      SwitchedMode<double> m;
      m.A = matrix_from_json(mode.at("A"), "config.system.modes[].A");
      m.E = matrix_from_json(mode.at("E"), "config.system.modes[].E");
      m.C = matrix_from_json(mode.at("C"), "config.system.modes[].C");
      m.F = matrix_from_json(mode.at("F"), "config.system.modes[].F");
      sw.modes.push_back(std::move(m));
    }
    try {
      sw.validate();
    } catch (const std::exception& e) {
      fail("config.system.modes", e.what());
    }
    cfg.switched = std::move(sw);
  }

  const Index n = cfg.impulsive ? cfg.impulsive->n() : cfg.switched->n();
  cfg.M_c = Matrix::Identity(n, n);
  cfg.M_d = Matrix::Identity(n, n);
  cfg.M = Matrix::Identity(n, n);
  if (j.contains("weights")) {
    require_keys(j.at("weights"), "config.weights", {"M_c", "M_d", "M"}, {});
    const Json& w = j.at("weights");
    if (w.contains("M_c")) cfg.M_c = matrix_from_json(w.at("M_c"), "config.weights.M_c");
    if (w.contains("M_d")) cfg.M_d = matrix_from_json(w.at("M_d"), "config.weights.M_d");
    if (w.contains("M")) cfg.M = matrix_from_json(w.at("M"), "config.weights.M");
  }
  if (j.contains("grid")) {
    require_keys(j.at("grid"), "config.grid", {"grid_n", "dense_factor"}, {});
    const Json& g = j.at("grid");
    if (g.contains("grid_n")) {
      cfg.grid_n = static_cast<Index>(number_at(g.at("grid_n"), "config.grid.grid_n"));
      if (cfg.grid_n < 1) fail("config.grid.grid_n", "must be >= 1");
    }
    if (g.contains("dense_factor")) {
      cfg.dense_factor = static_cast<int>(number_at(g.at("dense_factor"), "config.grid.dense_factor"));
      if (cfg.dense_factor < 1) fail("config.grid.dense_factor", "must be >= 1");
    }
  }
  if (j.contains("gains")) {
    if (cfg.mode != "impulsive") fail("config.gains", "fixed gains are an impulsive-mode option");
    require_keys(j.at("gains"), "config.gains", {"L_c", "L_d"}, {"L_c", "L_d"});
    const Json& g = j.at("gains");
    if (g.at("L_c").is_object())
      cfg.gain_L_c = grid_fn_from_json(g.at("L_c"), "config.gains.L_c");
    else
      cfg.gain_L_c = GridFn::constant(matrix_from_json(g.at("L_c"), "config.gains.L_c"),
                                      cfg.dwell.horizon());
    cfg.gain_L_d = matrix_from_json(g.at("L_d"), "config.gains.L_d");
  }
  if (j.contains("sim")) {
    require_keys(j.at("sim"), "config.sim",
                 {"horizon", "dt", "seed", "w_c", "w_d", "x0", "x0_lo", "x0_hi"}, {});
    const Json& s = j.at("sim");
    if (s.contains("horizon")) cfg.sim.horizon = number_at(s.at("horizon"), "config.sim.horizon");
    if (s.contains("dt")) cfg.sim.dt = number_at(s.at("dt"), "config.sim.dt");
    if (s.contains("seed"))
      cfg.sim.seed = static_cast<std::uint64_t>(number_at(s.at("seed"), "config.sim.seed"));
    if (s.contains("w_c")) cfg.sim.w_c = input_from_json(s.at("w_c"), "config.sim.w_c", {"sin", "zero"});
    if (s.contains("w_d"))
      cfg.sim.w_d = input_from_json(s.at("w_d"), "config.sim.w_d", {"uniform", "zero"});
    if (s.contains("x0")) cfg.sim.x0 = vector_from_json(s.at("x0"), "config.sim.x0");
    if (s.contains("x0_lo")) cfg.sim.x0_lo = vector_from_json(s.at("x0_lo"), "config.sim.x0_lo");
    if (s.contains("x0_hi")) cfg.sim.x0_hi = vector_from_json(s.at("x0_hi"), "config.sim.x0_hi");
  }
  return cfg;
}

Json config_to_json(const ProblemConfig& cfg) {
  Json j;
  j["mode"] = cfg.mode;
  if (!cfg.task.empty()) j["task"] = cfg.task;
  Json sys;
  if (cfg.impulsive) {
    const auto& s = *cfg.impulsive;
    sys["A"] = matrix_to_json(s.A.eval(0.0));
    if (s.p_c() > 0) sys["E_c"] = matrix_to_json(s.E_c.eval(0.0));
    sys["J"] = matrix_to_json(s.J);
    if (s.p_d() > 0) sys["E_d"] = matrix_to_json(s.E_d);
    if (s.q_c() > 0) {
      sys["C_c"] = matrix_to_json(s.C_c);
      sys["F_c"] = matrix_to_json(s.F_c);
    }
    if (s.q_d() > 0) {
      sys["C_d"] = matrix_to_json(s.C_d);
      sys["F_d"] = matrix_to_json(s.F_d);
    }
  } else if (cfg.switched) {
    Json modes = Json::array();
    for (const auto& m : cfg.switched->modes) {
      Json mode;
      mode["A"] = matrix_to_json(m.A);
      mode["E"] = matrix_to_json(m.E);
      mode["C"] = matrix_to_json(m.C);
      mode["F"] = matrix_to_json(m.F);
      modes.push_back(std::move(mode));
    }
    sys["modes"] = std::move(modes);
  }
  j["system"] = std::move(sys);
  j["dwell"] = dwell_to_json(cfg.dwell);
  Json weights;
  if (cfg.mode == "impulsive") {
    weights["M_c"] = matrix_to_json(cfg.M_c);
    weights["M_d"] = matrix_to_json(cfg.M_d);
  } else {
    weights["M"] = matrix_to_json(cfg.M);
  }
  j["weights"] = std::move(weights);
  Json grid;
  grid["grid_n"] = cfg.grid_n;
  grid["dense_factor"] = cfg.dense_factor;
  j["grid"] = std::move(grid);
  if (cfg.gain_L_c) {
    Json gains;
    gains["L_c"] = grid_fn_to_json(*cfg.gain_L_c);
    gains["L_d"] = matrix_to_json(*cfg.gain_L_d);
    j["gains"] = std::move(gains);
  }
  Json sim;
  sim["horizon"] = cfg.sim.horizon;
  sim["dt"] = cfg.sim.dt;
  sim["seed"] = cfg.sim.seed;
  Json wc;
  wc["type"] = cfg.sim.w_c.type;
  wc["lo"] = cfg.sim.w_c.lo;
  wc["hi"] = cfg.sim.w_c.hi;
  sim["w_c"] = std::move(wc);
  Json wd;
  wd["type"] = cfg.sim.w_d.type;
  wd["lo"] = cfg.sim.w_d.lo;
  wd["hi"] = cfg.sim.w_d.hi;
  sim["w_d"] = std::move(wd);
  if (cfg.sim.x0.size()) sim["x0"] = vector_to_json(cfg.sim.x0);
  if (cfg.sim.x0_lo.size()) sim["x0_lo"] = vector_to_json(cfg.sim.x0_lo);
  if (cfg.sim.x0_hi.size()) sim["x0_hi"] = vector_to_json(cfg.sim.x0_hi);
  j["sim"] = std::move(sim);
  return j;
}

namespace {

void csv_row(std::ostringstream& os, double t, const Vector& x, const Vector& lo,
             const Vector& hi, int mark, std::optional<Index> mode) {
  os << t;
  for (Index i = 0; i < x.size(); ++i) os << "," << x[i];
  for (Index i = 0; i < lo.size(); ++i) os << "," << lo[i];
  for (Index i = 0; i < hi.size(); ++i) os << "," << hi[i];
  os << "," << mark;
  if (mode) os << "," << *mode;
  os << "\n";
}

}  // namespace

std::string interval_run_csv(const IntervalRun& run) {
  std::ostringstream os;
  os.precision(17);
  const Index n = run.plant.states.front().size();
  os << "t";
  for (Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Index i = 1; i <= n; ++i) os << ",xminus_" << i;
  for (Index i = 1; i <= n; ++i) os << ",xplus_" << i;
  os << ",impulse\n";
  for (std::size_t s = 0; s < run.plant.size(); ++s)
    csv_row(os, run.plant.times[s], run.plant.states[s], run.lower.states[s],
            run.upper.states[s], run.plant.impulse_mark[s], std::nullopt);
  return os.str();
}

std::string switched_run_csv(const SwitchedIntervalRun& srun) {
  std::ostringstream os;
  os.precision(17);
  const Index n = srun.block_dim;
  os << "t";
  for (Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Index i = 1; i <= n; ++i) os << ",xminus_" << i;
  for (Index i = 1; i <= n; ++i) os << ",xplus_" << i;
  os << ",impulse,mode\n";
  std::size_t interval = 0;
  const auto& run = srun.lifted;
  for (std::size_t s = 0; s < run.plant.size(); ++s) {
    if (run.plant.impulse_mark[s] == 2) ++interval;
    const Index m = srun.modes[std::min(interval, srun.modes.size() - 1)];
    csv_row(os, run.plant.times[s], run.plant.states[s].segment(m * n, n),
            run.lower.states[s].segment(m * n, n), run.upper.states[s].segment(m * n, n),
            run.plant.impulse_mark[s], m);
  }
  return os.str();
}

}  // namespace dwellcert
