#pragma once

#include <vector>

#include "dwellcert/matrix_grid_fn.hpp"
#include "dwellcert/types.hpp"

namespace dwellcert {

/// Dwell-time constraint on the inter-impulse times T_k = t_{k+1} - t_k:
/// either T_k in [t_min, t_max] or T_k >= t_bar.
class DwellTimeSpec {
 public:
  enum class Kind { Range, Minimum };

  static DwellTimeSpec range(double t_min, double t_max) {
    if (!(0 < t_min && t_min <= t_max) || !std::isfinite(t_max))
      throw OrderingError("range dwell-time needs 0 < t_min <= t_max < inf");
    DwellTimeSpec s;
    s.kind_ = Kind::Range;
    s.t_min_ = t_min;
    s.t_max_ = t_max;
    return s;
  }

  static DwellTimeSpec minimum(double t_bar) {
    if (!(t_bar > 0)) throw OrderingError("minimum dwell-time needs t_bar > 0");
    DwellTimeSpec s;
    s.kind_ = Kind::Minimum;
    s.t_bar_ = t_bar;
    return s;
  }

  Kind kind() const { return kind_; }
  bool is_range() const { return kind_ == Kind::Range; }
  bool is_minimum() const { return kind_ == Kind::Minimum; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  double t_bar() const { return t_bar_; }

  /// End of the timer horizon the certificate grid must cover.
  double horizon() const { return is_range() ? t_max_ : t_bar_; }

  bool admits(double gap, double tol = 0.0) const {
    if (is_range()) return gap >= t_min_ - tol && gap <= t_max_ + tol;
    return gap >= t_bar_ - tol;
  }

 private:
  DwellTimeSpec() = default;
  Kind kind_ = Kind::Minimum;
  double t_min_ = 0, t_max_ = 0, t_bar_ = 0;
};

/// Linear impulsive system with timer-dependent flow
///
///   d/dtau x(t_k + tau) = A(tau) x + E_c(tau) w_c,   tau in (0, T_k]
///   x(t_k^+)            = J x(t_k) + E_d w_d(k)
///   z_c                 = C_c x + F_c w_c
///   z_d(k)              = C_d x(t_k) + F_d w_d(k)
///
/// Output/input blocks may be empty (zero rows/columns).
template <typename Scalar>
struct ImpulsiveSystem {
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  MatrixGridFn<Scalar> A;    // n x n
  MatrixGridFn<Scalar> E_c;  // n x p_c
  MatrixType J;              // n x n
  MatrixType E_d;            // n x p_d
  MatrixType C_c;            // q_c x n
  MatrixType F_c;            // q_c x p_c
  MatrixType C_d;            // q_d x n
  MatrixType F_d;            // q_d x p_d

  Index n() const { return A.rows(); }
  Index p_c() const { return E_c.cols(); }
  Index p_d() const { return E_d.cols(); }
  Index q_c() const { return C_c.rows(); }
  Index q_d() const { return C_d.rows(); }
  bool has_outputs() const { return q_c() > 0 || q_d() > 0; }

  static ImpulsiveSystem constant(const MatrixType& A, const MatrixType& E_c,
                                  const MatrixType& J, const MatrixType& E_d,
                                  const MatrixType& C_c, const MatrixType& F_c,
                                  const MatrixType& C_d, const MatrixType& F_d,
                                  Scalar horizon = Scalar(1)) {
    ImpulsiveSystem s;
    s.A = MatrixGridFn<Scalar>::constant(A, horizon);
    s.E_c = MatrixGridFn<Scalar>::constant(E_c, horizon);
    s.J = J;
    s.E_d = E_d;
    s.C_c = C_c;
    s.F_c = F_c;
    s.C_d = C_d;
    s.F_d = F_d;
    s.validate();
    return s;
  }

  void validate() const {
    const Index nn = A.rows();
    if (A.cols() != nn) throw DimensionError("A must be square");
    if (E_c.rows() != nn) throw DimensionError("E_c row count != n");
    if (J.rows() != nn || J.cols() != nn) throw DimensionError("J must be n x n");
    if (E_d.rows() != nn) throw DimensionError("E_d row count != n");
    if (C_c.cols() != nn && C_c.rows() > 0) throw DimensionError("C_c column count != n");
    if (C_d.cols() != nn && C_d.rows() > 0) throw DimensionError("C_d column count != n");
    if (F_c.rows() != C_c.rows()) throw DimensionError("F_c row count != q_c");
    if (F_c.cols() != E_c.cols() && F_c.rows() > 0) throw DimensionError("F_c column count != p_c");
    if (F_d.rows() != C_d.rows()) throw DimensionError("F_d row count != q_d");
    if (F_d.cols() != E_d.cols() && F_d.rows() > 0) throw DimensionError("F_d column count != p_d");
  }
};

using ImpulsiveSystemd = ImpulsiveSystem<double>;

/// One mode of a switched system: x' = A x + E w, y = C x + F w.
template <typename Scalar>
struct SwitchedMode {
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  MatrixType A, E, C, F;
};

/// Linear switched system x' = A_sigma x + E_sigma w with measured output
/// y = C_sigma x + F_sigma w; all modes share state/input/output dimensions.
template <typename Scalar>
struct SwitchedSystem {
  std::vector<SwitchedMode<Scalar>> modes;

  Index num_modes() const { return static_cast<Index>(modes.size()); }
  Index n() const { return modes.front().A.rows(); }
  Index p() const { return modes.front().E.cols(); }
  Index q() const { return modes.front().C.rows(); }

  void validate() const {
    if (modes.size() < 2) throw DimensionError("switched system needs N >= 2 modes");
    const Index nn = modes.front().A.rows();
    const Index pp = modes.front().E.cols();
    const Index qq = modes.front().C.rows();
    for (const auto& m : modes) {
      if (m.A.rows() != nn || m.A.cols() != nn) throw DimensionError("mode A must be n x n");
      if (m.E.rows() != nn || m.E.cols() != pp) throw DimensionError("mode E must be n x p");
      if (m.C.rows() != qq || m.C.cols() != nn) throw DimensionError("mode C must be q x n");
      if (m.F.rows() != qq || m.F.cols() != pp) throw DimensionError("mode F must be q x p");
    }
  }
};

using SwitchedSystemd = SwitchedSystem<double>;

/// Impulsive lifting of a switched system: block-diagonal flow over all modes
/// plus one jump map per ordered mode pair moving block j into block i.
template <typename Scalar>
struct LiftedSwitched {
  ImpulsiveSystem<Scalar> sys;  // J is set to the identity placeholder
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> jump_maps;
  std::vector<std::pair<Index, Index>> jump_pairs;  // (to, from) per map
};

template <typename Scalar>
LiftedSwitched<Scalar> lift_switched(const SwitchedSystem<Scalar>& sw) {
  sw.validate();
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index N = sw.num_modes(), n = sw.n(), p = sw.p(), q = sw.q();

  MatrixType A = MatrixType::Zero(n * N, n * N);
  MatrixType E = MatrixType::Zero(n * N, p);
  MatrixType C = MatrixType::Zero(q * N, n * N);
  MatrixType F = MatrixType::Zero(q * N, p);
  for (Index i = 0; i < N; ++i) {
    const auto& m = sw.modes[static_cast<std::size_t>(i)];
    A.block(i * n, i * n, n, n) = m.A;
    E.block(i * n, 0, n, p) = m.E;
    C.block(i * q, i * n, q, n) = m.C;
    F.block(i * q, 0, q, p) = m.F;
  }

  LiftedSwitched<Scalar> out;
  out.sys = ImpulsiveSystem<Scalar>::constant(
      A, E, MatrixType::Identity(n * N, n * N), MatrixType::Zero(n * N, 0),
      C, F, MatrixType::Zero(0, n * N), MatrixType::Zero(0, 0));
  for (Index i = 0; i < N; ++i) {
    for (Index j = 0; j < N; ++j) {
      if (i == j) continue;
      MatrixType Jij = MatrixType::Zero(n * N, n * N);
      Jij.block(i * n, j * n, n, n) = MatrixType::Identity(n, n);
      out.jump_maps.push_back(std::move(Jij));
      out.jump_pairs.emplace_back(i, j);
    }
  }
  return out;
}

}  // namespace dwellcert
