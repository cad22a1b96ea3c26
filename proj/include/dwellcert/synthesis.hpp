#pragma once

#include <optional>
#include <vector>

#include "dwellcert/certify.hpp"
#include "dwellcert/systems.hpp"

namespace dwellcert {

/// Interval-observer design from the convex synthesis conditions: diagonal
/// scaling X(tau), scaled gains U_c(tau) = X(tau) L_c(tau), U_d = X(anchor) L_d,
/// and the recovered gains. Between nodes the deployed gain is the PWL
/// interpolation of the node gains (the rational X(tau)^{-1}U_c(tau) evaluation
/// is available separately for cross-checking).
struct ObserverDesign {
  DwellTimeSpec spec = DwellTimeSpec::minimum(1.0);
  GridFn X;    // n x n diagonal
  GridFn U_c;  // n x q_c
  Matrix U_d;  // n x q_d
  double alpha = 0.0;
  double gamma = 0.0;
  double eps = 1e-6;
  GridFn L_c;  // n x q_c node gains
  Matrix L_d;  // n x q_d
  Matrix M_c, M_d;  // performance weights baked into the synthesis
};

/// Per-mode designs for a switched system; the discrete gain is fixed to zero.
struct SwitchedObserverDesign {
  DwellTimeSpec spec = DwellTimeSpec::minimum(1.0);
  std::vector<GridFn> X;    // per mode, n x n diagonal
  std::vector<GridFn> U;    // per mode, n x q
  std::vector<GridFn> L;    // per mode node gains
  double alpha = 0.0;
  double gamma = 0.0;
  double eps = 1e-6;
  Matrix M;
};

struct SynthOptions {
  double eps = 1e-6;
  double eps_pos = 1e-6;      // floor on diagonal X node values
  double eta_scale = 1e-7;
  double alpha_max = 1e6;
};

/// Closed-loop observation-error system: flow A - L_c(tau) C_c driven by
/// E_c - L_c(tau) F_c, jump J - L_d C_d driven by E_d - L_d F_d, and the
/// weighted error outputs (M_c, 0) / (M_d, 0).
ImpulsiveSystemd build_error_system(const ImpulsiveSystemd& plant, const GridFn& L_c,
                                    const Matrix& L_d, const Matrix& M_c,
                                    const Matrix& M_d);
ImpulsiveSystemd build_error_system(const ImpulsiveSystemd& plant,
                                    const ObserverDesign& design);

/// Lifted error system of a switched design (block flow, identity-placeholder
/// jump) plus the jump maps it shares with the lifted plant.
LiftedSwitched<double> build_switched_error_system(const SwitchedSystemd& sw,
                                                   const SwitchedObserverDesign& design);

std::optional<ObserverDesign> synth_range(const ImpulsiveSystemd& plant,
                                          const DwellTimeSpec& spec, const Matrix& M_c,
                                          const Matrix& M_d, Index grid_n,
                                          const SynthOptions& opts = {});
std::optional<ObserverDesign> synth_min(const ImpulsiveSystemd& plant,
                                        const DwellTimeSpec& spec, const Matrix& M_c,
                                        const Matrix& M_d, Index grid_n,
                                        const SynthOptions& opts = {});
std::optional<SwitchedObserverDesign> synth_switched(const SwitchedSystemd& sw,
                                                     const DwellTimeSpec& spec,
                                                     const Matrix& M, Index grid_n,
                                                     const SynthOptions& opts = {});

/// Closed-loop re-verification of a design: dense positivity of the error
/// system with the deployed PWL gains, and an independent analysis certificate
/// whose gain must not exceed the synthesis gain by more than tol. Returns the
/// report and the fresh analysis certificate.
struct PostVerifyResult {
  MarginReport positivity;
  std::optional<Certificate> analysis;  // impulsive path
  std::vector<GridFn> mode_lyap;        // switched path: fresh per-mode zeta
  double gamma_analysis = 0.0;
  double gamma_synthesis = 0.0;
  bool pass = false;
};

PostVerifyResult post_verify(const ImpulsiveSystemd& plant, const ObserverDesign& design,
                             int dense_factor, double tol = 1e-6);
PostVerifyResult post_verify(const SwitchedSystemd& sw, const SwitchedObserverDesign& design,
                             int dense_factor, double tol = 1e-6);

/// Gain table evaluated as X(tau)^{-1} U_c(tau) between nodes (rational in tau)
/// for comparison against closed-form gains; sampled on the refined grid.
GridFn rational_gain_table(const ObserverDesign& design, int dense_factor);

}  // namespace dwellcert
