// Command-line front end: config ingestion, pipeline orchestration
// (check -> analyze/synthesize -> post-verify -> simulate) and artifact
// persistence. Exit codes: 0 success/feasible, 1 infeasible or a failed
// verification, 2 usage/config errors.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dwellcert/positivity.hpp"
#include "dwellcert/serialization.hpp"
#include "dwellcert/simulate.hpp"
#include "dwellcert/synthesis.hpp"
#include "dwellcert/transition.hpp"

namespace fs = std::filesystem;
using namespace dwellcert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  Index grid_override = 0;
  int dense_override = 0;
  std::uint64_t seed_override = 0;
  int trials = 100;
  bool rational_gains = false;
  std::string design_path;
};

ProblemConfig load_config(const CommonArgs& args) {
  ProblemConfig cfg = parse_config(read_file(args.config_path));
  if (args.grid_override > 0) cfg.grid_n = args.grid_override;
  if (args.dense_override > 0) cfg.dense_factor = args.dense_override;
  if (args.seed_override > 0) cfg.sim.seed = args.seed_override;
  return cfg;
}

// the system a config describes: the closed-loop error system when fixed
// gains are present, otherwise the plant itself
ImpulsiveSystemd target_system(const ProblemConfig& cfg) {
  const ImpulsiveSystemd& plant = *cfg.impulsive;
  if (cfg.gain_L_c)
    return build_error_system(plant, *cfg.gain_L_c, *cfg.gain_L_d, cfg.M_c, cfg.M_d);
  return plant;
}

int cmd_check(const CommonArgs& args) {
  const ProblemConfig cfg = load_config(args);
  PositivityReport rep;
  if (cfg.impulsive) {
    rep = check_internal_positivity(target_system(cfg));
  } else {
    rep = check_internal_positivity(lift_switched(*cfg.switched).sys);
  }
  std::cout.precision(6);
  for (const auto& item : rep.items)
    std::cout << item.name << ": " << (item.ok ? "ok" : "violated") << " (worst "
              << item.worst << ")\n";
  std::cout << "internally_positive: " << (rep.positive() ? "yes" : "no") << "\n";
  return rep.positive() ? kExitOk : kExitInfeasible;
}

int cmd_analyze(const CommonArgs& args) {
  const ProblemConfig cfg = load_config(args);
  if (!cfg.impulsive) {
    std::cerr << "analyze expects an impulsive-mode config (use synthesize for "
                 "switched systems)\n";
    return kExitUsage;
  }
  const ImpulsiveSystemd sys = target_system(cfg);
  std::cout.precision(6);

  std::optional<Certificate> cert;
  if (cfg.dwell.is_range())
    cert = sys.has_outputs() ? certify_range_gain(sys, cfg.dwell, cfg.grid_n)
                             : certify_range_stability(sys, cfg.dwell, cfg.grid_n);
  else
    cert = sys.has_outputs() ? certify_min_gain(sys, cfg.dwell, cfg.grid_n)
                             : certify_min_stability(sys, cfg.dwell, cfg.grid_n);
  if (!cert) {
    std::cout << "infeasible\n";
    return kExitInfeasible;
  }

  const MarginReport ver = verify_certificate(sys, *cert, cfg.dense_factor);
  std::cout << "kind: " << to_string(cert->kind) << "\n";
  if (is_gain_kind(cert->kind)) std::cout << "gamma: " << cert->gamma << "\n";
  for (const auto& [key, v] : ver.worst) std::cout << "margin " << key << ": " << v << "\n";

  // spectral oracle cross-check with the certificate's own vector
  const Vector lambda = cfg.dwell.is_range() ? cert->lyap.eval(0.0).col(0)
                                             : cert->lyap.eval(cfg.dwell.t_bar()).col(0);
  const OracleReport oracle = cfg.dwell.is_range()
                                  ? range_dt_oracle(sys, lambda, cfg.dwell)
                                  : min_dt_oracle(sys, lambda, cfg.dwell);
  std::cout << "oracle: " << (oracle.verdict ? "consistent" : "violated") << " (worst "
            << oracle.worst_margin << ")\n";

  write_file(fs::path(args.out_dir) / "certificate.json",
             canonical(certificate_to_json(*cert)));
  std::cout << "wrote " << (fs::path(args.out_dir) / "certificate.json").string() << "\n";
  return ver.pass && oracle.verdict ? kExitOk : kExitInfeasible;
}

int cmd_synthesize(const CommonArgs& args) {
  const ProblemConfig cfg = load_config(args);
  std::cout.precision(6);
  const fs::path out(args.out_dir);
  try {
    if (cfg.impulsive) {
      const auto design = cfg.dwell.is_range()
                              ? synth_range(*cfg.impulsive, cfg.dwell, cfg.M_c, cfg.M_d,
                                            cfg.grid_n)
                              : synth_min(*cfg.impulsive, cfg.dwell, cfg.M_c, cfg.M_d,
                                          cfg.grid_n);
      if (!design) {
        std::cout << "infeasible\n";
        return kExitInfeasible;
      }
      const PostVerifyResult pv = post_verify(*cfg.impulsive, *design, cfg.dense_factor);
      std::cout << "gamma: " << design->gamma << "\n";
      std::cout << "gamma_analysis: " << pv.gamma_analysis << "\n";
      std::cout << "post_verify: pass\n";
      write_file(out / "design.json", canonical(design_to_json(*design)));
      write_file(out / "closed_loop_certificate.json",
                 canonical(certificate_to_json(*pv.analysis)));
      if (args.rational_gains)
        write_file(out / "gains_rational.json",
                   canonical(grid_fn_to_json(rational_gain_table(*design, cfg.dense_factor))));
    } else {
      const auto design = synth_switched(*cfg.switched, cfg.dwell, cfg.M, cfg.grid_n);
      if (!design) {
        std::cout << "infeasible\n";
        return kExitInfeasible;
      }
      const PostVerifyResult pv = post_verify(*cfg.switched, *design, cfg.dense_factor);
      std::cout << "gamma: " << design->gamma << "\n";
      std::cout << "gamma_analysis: " << pv.gamma_analysis << "\n";
      std::cout << "post_verify: pass\n";
      write_file(out / "design.json", canonical(switched_design_to_json(*design)));
      Json closed;
      closed["type"] = "switched_closed_loop_analysis";
      closed["gamma"] = pv.gamma_analysis;
      Json lyaps = Json::array();
      for (const auto& z : pv.mode_lyap) lyaps.push_back(grid_fn_to_json(z));
      closed["mode_lyap"] = std::move(lyaps);
      write_file(out / "closed_loop_certificate.json", canonical(closed));
      if (args.rational_gains) {
        Json tables = Json::array();
        for (std::size_t m = 0; m < design->L.size(); ++m) {
          ObserverDesign view;
          view.X = design->X[m];
          view.U_c = design->U[m];
          tables.push_back(grid_fn_to_json(rational_gain_table(view, cfg.dense_factor)));
        }
        write_file(out / "gains_rational.json", canonical(tables));
      }
    }
  } catch (const RejectedDesignError& e) {
    std::cout << "post_verify: fail (" << e.what() << ", worst " << e.worst_margin << ")\n";
    return kExitInfeasible;
  }
  std::cout << "wrote " << (out / "design.json").string() << "\n";
  return kExitOk;
}

Signal make_continuous_input(const InputConfig& cfg, Index p) {
  if (cfg.type == "zero")
    return [p](double) { return Vector::Zero(p); };
  return [p](double t) { return Vector::Constant(p, std::sin(t)); };
}

int cmd_simulate(const CommonArgs& args) {
  const ProblemConfig cfg = load_config(args);
  if (args.design_path.empty()) {
    std::cerr << "simulate requires --design FILE (written by synthesize)\n";
    return kExitUsage;
  }
  const Json dj = Json::parse(read_file(args.design_path));
  const fs::path out(args.out_dir);
  std::cout.precision(6);

  if (cfg.impulsive) {
    if (dj.value("type", "") != "observer_design") {
      std::cerr << "design file does not hold an impulsive observer design\n";
      return kExitUsage;
    }
    const ObserverDesign design = design_from_json(dj);
    const ImpulsiveSystemd& plant = *cfg.impulsive;
    const Index n = plant.n(), pc = plant.p_c(), pd = plant.p_d();

    const std::vector<double> impulses =
        sample_dwell_sequence(cfg.dwell, cfg.sim.horizon, cfg.sim.seed);

    BoundedSignal wc;
    wc.value = make_continuous_input(cfg.sim.w_c, pc);
    wc.lo = [pc, lo = cfg.sim.w_c.lo](double) { return Vector::Constant(pc, lo); };
    wc.hi = [pc, hi = cfg.sim.w_c.hi](double) { return Vector::Constant(pc, hi); };

    // discrete disturbances drawn once so the record is reproducible
    std::vector<Vector> wd_draws(impulses.size() + 2, Vector::Zero(pd));
    {
      Rng rng(cfg.sim.seed + 7);
      for (auto& v : wd_draws)
        for (Index j = 0; j < pd; ++j)
          v[j] = cfg.sim.w_d.type == "zero" ? 0.0
                                            : rng.uniform(cfg.sim.w_d.lo, cfg.sim.w_d.hi);
    }
    BoundedSequence wd;
    wd.value = [wd_draws, pd](int k) {
      return k < static_cast<int>(wd_draws.size()) ? wd_draws[static_cast<std::size_t>(k)]
                                                   : Vector::Zero(pd);
    };
    wd.lo = [pd, lo = cfg.sim.w_d.lo](int) { return Vector::Constant(pd, lo); };
    wd.hi = [pd, hi = cfg.sim.w_d.hi](int) { return Vector::Constant(pd, hi); };

    const Vector x0 = cfg.sim.x0.size() ? cfg.sim.x0 : Vector::Zero(n);
    const Vector x0_lo = cfg.sim.x0_lo.size() ? cfg.sim.x0_lo : Vector(x0.array() - 0.5);
    const Vector x0_hi = cfg.sim.x0_hi.size() ? cfg.sim.x0_hi : Vector(x0.array() + 0.5);

    SimOptions so;
    so.dt = cfg.sim.dt;
    so.horizon = cfg.sim.horizon;
    const IntervalRun run =
        run_interval_observer(plant, design, impulses, wc, wd, x0, x0_lo, x0_hi, so);
    const double violation = run.enclosure_violation();

    EmpiricalGainOptions eg;
    eg.trials = args.trials;
    eg.seed = cfg.sim.seed + 1;
    eg.dt = cfg.sim.dt;
    const ImpulsiveSystemd err = build_error_system(plant, design);
    const EmpiricalGainResult gains = empirical_gain(err, cfg.dwell, eg);

    write_file(out / "trajectory.csv", interval_run_csv(run));
    Json rep;
    rep["enclosure_violation"] = violation;
    rep["empirical_ratio"] = gains.worst_ratio;
    rep["gamma"] = design.gamma;
    rep["trials_used"] = gains.trials_used;
    write_file(out / "simulation_report.json", canonical(rep));

    std::cout << "enclosure_violation: " << violation << "\n";
    std::cout << "empirical_ratio: " << gains.worst_ratio << " (gamma " << design.gamma
              << ")\n";
    const bool ok = violation <= 1e-9 && gains.worst_ratio <= design.gamma + 1e-4;
    std::cout << "wrote " << (out / "trajectory.csv").string() << "\n";
    return ok ? kExitOk : kExitInfeasible;
  }

  if (dj.value("type", "") != "switched_observer_design") {
    std::cerr << "design file does not hold a switched observer design\n";
    return kExitUsage;
  }
  const SwitchedObserverDesign design = switched_design_from_json(dj);
  const SwitchedSystemd& sw = *cfg.switched;

  const std::vector<double> switches =
      sample_dwell_sequence(cfg.dwell, cfg.sim.horizon, cfg.sim.seed);
  Rng rng(cfg.sim.seed + 3);
  std::vector<Index> modes;
  modes.push_back(rng.uniform_int(0, static_cast<int>(sw.num_modes()) - 1));
  for (std::size_t k = 0; k < switches.size(); ++k) {
    Index next = modes.back();
    while (next == modes.back())
      next = rng.uniform_int(0, static_cast<int>(sw.num_modes()) - 1);
    modes.push_back(next);
  }

  BoundedSignal w;
  w.value = make_continuous_input(cfg.sim.w_c, sw.p());
  w.lo = [p = sw.p(), lo = cfg.sim.w_c.lo](double) { return Vector::Constant(p, lo); };
  w.hi = [p = sw.p(), hi = cfg.sim.w_c.hi](double) { return Vector::Constant(p, hi); };

  const Vector x0 = cfg.sim.x0.size() ? cfg.sim.x0 : Vector::Zero(sw.n());
  const Vector x0_lo = cfg.sim.x0_lo.size() ? cfg.sim.x0_lo : Vector(x0.array() - 0.5);
  const Vector x0_hi = cfg.sim.x0_hi.size() ? cfg.sim.x0_hi : Vector(x0.array() + 0.5);

  SimOptions so;
  so.dt = cfg.sim.dt;
  so.horizon = cfg.sim.horizon;
  const SwitchedIntervalRun run = run_switched_interval_observer(
      sw, design, switches, modes, w, x0, x0_lo, x0_hi, so);
  const double violation = run.active_enclosure_violation();

  EmpiricalGainOptions eg;
  eg.trials = args.trials;
  eg.seed = cfg.sim.seed + 1;
  eg.dt = cfg.sim.dt;
  const EmpiricalGainResult gains = empirical_gain_switched(sw, design, eg);

  write_file(out / "trajectory.csv", switched_run_csv(run));
  Json rep;
  rep["enclosure_violation"] = violation;
  rep["empirical_ratio"] = gains.worst_ratio;
  rep["gamma"] = design.gamma;
  rep["trials_used"] = gains.trials_used;
  write_file(out / "simulation_report.json", canonical(rep));

  std::cout << "enclosure_violation: " << violation << "\n";
  std::cout << "empirical_ratio: " << gains.worst_ratio << " (gamma " << design.gamma
            << ")\n";
  std::cout << "wrote " << (out / "trajectory.csv").string() << "\n";
  const bool ok = violation <= 1e-9 && gains.worst_ratio <= design.gamma + 1e-4;
  return ok ? kExitOk : kExitInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dwell-time stability/gain certification and interval-observer synthesis "
               "for linear positive impulsive and switched systems"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub, bool sim) {
    sub->add_option("--config", args.config_path, "problem config (JSON)")->required();
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--grid", args.grid_override, "override grid segment count");
    sub->add_option("--dense-factor", args.dense_override, "verification refinement factor");
    sub->add_option("--seed", args.seed_override, "override simulation seed");
    if (sim) {
      sub->add_option("--trials", args.trials, "empirical-gain trial count");
      sub->add_option("--design", args.design_path, "design file from synthesize");
    }
  };

  CLI::App* c_check = app.add_subcommand("check", "internal-positivity report");
  add_common(c_check, false);
  CLI::App* c_analyze = app.add_subcommand("analyze", "stability/gain certificate");
  add_common(c_analyze, false);
  CLI::App* c_synth = app.add_subcommand("synthesize", "interval-observer synthesis");
  add_common(c_synth, false);
  c_synth->add_flag("--rational-gains", args.rational_gains,
                    "also emit the X^{-1}U_c gain table");
  CLI::App* c_sim = app.add_subcommand("simulate", "interval-observer simulation");
  add_common(c_sim, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? kExitUsage : kExitUsage;
  }

  try {
    if (app.got_subcommand(c_check)) return cmd_check(args);
    if (app.got_subcommand(c_analyze)) return cmd_analyze(args);
    if (app.got_subcommand(c_synth)) return cmd_synthesize(args);
    if (app.got_subcommand(c_sim)) return cmd_simulate(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "document error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  }
  return kExitUsage;
}
