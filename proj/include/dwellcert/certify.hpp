#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dwellcert/lp.hpp"
#include "dwellcert/systems.hpp"

namespace dwellcert {

enum class CertificateKind { RangeStability, RangeGain, MinStability, MinGain };

std::string to_string(CertificateKind k);
bool is_gain_kind(CertificateKind k);

/// Feasible witness of a dwell-time theorem: piecewise-linear coefficients of
/// the copositive storage function V(tau, x) = lyap(tau)'x, the fixed strictness
/// constant eps, the certified gain (gain kinds), and worst slack per condition
/// group as re-evaluated on the assembly points.
struct Certificate {
  CertificateKind kind = CertificateKind::MinStability;
  DwellTimeSpec spec = DwellTimeSpec::minimum(1.0);
  GridFn lyap;  // n x 1
  double eps = 1e-6;
  double gamma = 0.0;
  std::map<std::string, double> margins;
};

struct CertifyOptions {
  double eps = 1e-6;       // strictness constant in the jump/stationary rows
  double eps_pos = 1e-6;   // componentwise floor on the anchored lyap node
  double eta_scale = 1e-7; // strict-margin scale; grid-independent by design
  std::vector<double> explicit_grid;  // when set, replaces the uniform grid
};

/// Dense margin re-evaluation of a certificate or design on a refined grid.
struct MarginReport {
  std::map<std::string, double> worst;  // per condition group
  bool pass = false;
  double tol = 0.0;

  double worst_overall() const {
    double w = -kInf;
    for (const auto& [k, v] : worst) w = std::max(w, v);
    return w;
  }
};

std::optional<Certificate> certify_range_stability(const ImpulsiveSystemd& sys,
                                                   const DwellTimeSpec& spec,
                                                   Index grid_n,
                                                   const CertifyOptions& opts = {});
std::optional<Certificate> certify_range_gain(const ImpulsiveSystemd& sys,
                                              const DwellTimeSpec& spec, Index grid_n,
                                              const CertifyOptions& opts = {});
std::optional<Certificate> certify_min_stability(const ImpulsiveSystemd& sys,
                                                 const DwellTimeSpec& spec, Index grid_n,
                                                 const CertifyOptions& opts = {});
std::optional<Certificate> certify_min_gain(const ImpulsiveSystemd& sys,
                                            const DwellTimeSpec& spec, Index grid_n,
                                            const CertifyOptions& opts = {});

/// Re-evaluates every theorem row on a dense_factor-times refined grid and
/// reports the worst margin per condition group; passes iff all <= tol.
MarginReport verify_certificate(const ImpulsiveSystemd& sys, const Certificate& cert,
                                int dense_factor, double tol = 1e-9);

struct Trajectory;  // defined in simulate.hpp

/// Signed dissipation residuals of the storage function along a simulated run:
/// flow residual d/dtau V + 1'z_c - gamma 1'w_c per sample (time derivative
/// taken through the dynamics) and the jump residual per impulse. All values
/// are <= 0 for a valid gain certificate on an admissible nonnegative run.
struct StorageResiduals {
  std::vector<double> flow;
  std::vector<double> jump;

  double max_flow() const;
  double max_jump() const;
  double worst() const;
};

StorageResiduals storage_residual(const ImpulsiveSystemd& sys, const Certificate& cert,
                                  const Trajectory& traj,
                                  double gamma_override = -1.0);

}  // namespace dwellcert
