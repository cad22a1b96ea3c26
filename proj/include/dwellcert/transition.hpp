#pragma once

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dwellcert/systems.hpp"

namespace dwellcert {

/// State-transition matrix Phi = Psi(tau, s) of the flow d/dt Psi = A(t) Psi.
struct TransitionMatrix {
  Matrix phi;
  double s = 0.0;
  double tau = 0.0;
  int steps = 0;
  std::string method = "rk4";
};

inline int default_phi_steps(double span) {
  return std::max(200, static_cast<int>(std::ceil(400.0 * span)));
}

/// Fixed-step classical RK4 integration of the matrix ODE over [s, tau].
/// steps <= 0 selects the default step count for the span.
template <typename Scalar>
TransitionMatrix compute_phi(const MatrixGridFn<Scalar>& A, double s, double tau,
                             int steps = -1) {
  if (!(0.0 <= s && s <= tau)) throw OrderingError("compute_phi needs 0 <= s <= tau");
  if (steps <= 0) steps = default_phi_steps(tau - s);
  const Index n = A.rows();
  Matrix phi = Matrix::Identity(n, n);
  const double h = (tau - s) / steps;
  if (h > 0) {
    for (int k = 0; k < steps; ++k) {
      const double t0 = s + k * h;
      const Matrix k1 = A.eval(t0) * phi;
      const Matrix Amid = A.eval(t0 + 0.5 * h);
      const Matrix k2 = Amid * (phi + 0.5 * h * k1);
      const Matrix k3 = Amid * (phi + 0.5 * h * k2);
      const Matrix k4 = A.eval(t0 + h) * (phi + h * k3);
      phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return {std::move(phi), s, tau, steps, "rk4"};
}

/// Sampled check of a spectral dwell-time condition. The verdict is a
/// falsifier/sanity signal; the LP certificate is the actual proof object.
struct OracleReport {
  bool verdict = false;
  double worst_margin = 0.0;            // max over samples/conditions; < 0 passes
  std::vector<double> condition_margins;  // per condition group
  int samples = 0;
};

inline void check_conditioning(const Matrix& phi) {
  Eigen::PartialPivLU<Matrix> lu(phi);
  const double n1 = phi.cwiseAbs().colwise().sum().maxCoeff();
  const Matrix inv = lu.inverse();
  const double ninv = inv.cwiseAbs().colwise().sum().maxCoeff();
  if (!(n1 * ninv < 1e12)) throw SingularityError("Phi(theta) numerically singular");
}

/// Range dwell-time condition lambda' (J - Phi(theta)^{-1}) < 0 sampled over
/// theta in [t_min, t_max].
template <typename Scalar>
OracleReport range_dt_oracle(const ImpulsiveSystem<Scalar>& sys, const Vector& lambda,
                             const DwellTimeSpec& spec, int theta_samples = 101) {
  if (!spec.is_range()) throw StructuralError("range_dt_oracle needs a range spec");
  if (lambda.size() != sys.n()) throw DimensionError("lambda size != n");
  if (!(lambda.array() > 0).all()) throw OrderingError("lambda must be positive");
  OracleReport rep;
  rep.samples = theta_samples;
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < theta_samples; ++k) {
    const double theta =
        theta_samples == 1
            ? spec.t_min()
            : spec.t_min() + (spec.t_max() - spec.t_min()) * k / (theta_samples - 1);
    const TransitionMatrix tm = compute_phi(sys.A, 0.0, theta);
    check_conditioning(tm.phi);
    const Matrix inv = tm.phi.partialPivLu().inverse();
    const RowVector row = lambda.transpose() * (sys.J - inv);
    worst = std::max(worst, row.maxCoeff());
  }
  rep.worst_margin = worst;
  rep.condition_margins = {worst};
  rep.verdict = worst < 0.0;
  return rep;
}

/// Minimum dwell-time conditions lambda' A(t_bar) < 0 and
/// lambda' (Phi(t_bar) J - I) < 0 with an explicit jump matrix (used per jump
/// map for lifted switched systems).
template <typename Scalar>
OracleReport min_dt_oracle_with_jump(const ImpulsiveSystem<Scalar>& sys,
                                     const Matrix& jump, const Vector& lambda,
                                     const DwellTimeSpec& spec) {
  if (!spec.is_minimum()) throw StructuralError("min_dt_oracle needs a minimum spec");
  if (lambda.size() != sys.n()) throw DimensionError("lambda size != n");
  if (!(lambda.array() > 0).all()) throw OrderingError("lambda must be positive");
  const double tbar = spec.t_bar();
  const double flow_margin = (lambda.transpose() * sys.A.eval(tbar)).maxCoeff();
  const TransitionMatrix tm = compute_phi(sys.A, 0.0, tbar);
  check_conditioning(tm.phi);
  const RowVector row =
      lambda.transpose() * (tm.phi * jump - Matrix::Identity(sys.n(), sys.n()));
  const double jump_margin = row.maxCoeff();
  OracleReport rep;
  rep.samples = 1;
  rep.condition_margins = {flow_margin, jump_margin};
  rep.worst_margin = std::max(flow_margin, jump_margin);
  rep.verdict = rep.worst_margin < 0.0;
  return rep;
}

template <typename Scalar>
OracleReport min_dt_oracle(const ImpulsiveSystem<Scalar>& sys, const Vector& lambda,
                           const DwellTimeSpec& spec) {
  return min_dt_oracle_with_jump(sys, sys.J, lambda, spec);
}

}  // namespace dwellcert
