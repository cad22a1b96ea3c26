#pragma once

#include <string>
#include <vector>

#include "dwellcert/systems.hpp"

namespace dwellcert {

/// Metzler test: every off-diagonal entry >= -tol.
template <typename Derived>
bool is_metzler(const Eigen::MatrixBase<Derived>& M, double tol = 1e-9) {
  if (M.rows() != M.cols()) throw DimensionError("is_metzler needs a square matrix");
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j)
      if (i != j && M(i, j) < -tol) return false;
  return true;
}

/// Worst (most negative) off-diagonal entry; 0 for scalars.
template <typename Derived>
double metzler_margin(const Eigen::MatrixBase<Derived>& M) {
  double worst = 0.0;
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j)
      if (i != j) worst = std::min(worst, static_cast<double>(M(i, j)));
  return worst;
}

/// Componentwise nonnegativity: every entry >= -tol.
template <typename Derived>
bool is_nonnegative(const Eigen::MatrixBase<Derived>& M, double tol = 1e-9) {
  if (M.size() == 0) return true;
  return (M.array() >= -tol).all();
}

template <typename Derived>
double nonnegative_margin(const Eigen::MatrixBase<Derived>& M) {
  if (M.size() == 0) return 0.0;
  return std::min(0.0, static_cast<double>(M.minCoeff()));
}

/// One entry per condition of the internal-positivity characterization.
struct PositivityReport {
  struct Item {
    std::string name;
    bool ok = true;
    double worst = 0.0;  // most negative offending value (0 when clean)
  };
  std::vector<Item> items;

  bool positive() const {
    for (const auto& it : items)
      if (!it.ok) return false;
    return true;
  }
  const Item* find(const std::string& name) const {
    for (const auto& it : items)
      if (it.name == name) return &it;
    return nullptr;
  }
};

/// Checks the sign conditions for internal positivity: A(tau) Metzler and
/// E_c(tau) nonnegative at every grid node and segment midpoint, and the
/// constant matrices J, E_d, C_c, F_c, C_d, F_d nonnegative. Never throws.
template <typename Scalar>
PositivityReport check_internal_positivity(const ImpulsiveSystem<Scalar>& sys,
                                           double tol = 1e-9) {
  PositivityReport rep;
  auto add = [&rep, tol](const std::string& name, double worst) {
    rep.items.push_back({name, worst >= -tol, worst});
  };

  // PWL functions are affine per segment, so node checks suffice; midpoints
  // are kept as redundancy for non-PWL extensions.
  double worstA = 0.0, worstE = 0.0;
  const auto& g = sys.A.grid();
  auto probe = [&](double tau) {
    worstA = std::min(worstA, metzler_margin(sys.A.eval(tau)));
    worstE = std::min(worstE, nonnegative_margin(sys.E_c.eval(tau)));
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    probe(g[i]);
    if (i + 1 < g.size()) probe(0.5 * (g[i] + g[i + 1]));
  }
  if (!sys.E_c.is_constant()) {
    // E_c may live on its own grid
    const auto& ge = sys.E_c.grid();
    for (std::size_t i = 0; i < ge.size(); ++i) {
      probe(ge[i]);
      if (i + 1 < ge.size()) probe(0.5 * (ge[i] + ge[i + 1]));
    }
  }
  add("A_metzler", worstA);
  add("E_c_nonneg", worstE);
  add("J_nonneg", nonnegative_margin(sys.J));
  add("E_d_nonneg", nonnegative_margin(sys.E_d));
  add("C_c_nonneg", nonnegative_margin(sys.C_c));
  add("F_c_nonneg", nonnegative_margin(sys.F_c));
  add("C_d_nonneg", nonnegative_margin(sys.C_d));
  add("F_d_nonneg", nonnegative_margin(sys.F_d));
  return rep;
}

}  // namespace dwellcert
