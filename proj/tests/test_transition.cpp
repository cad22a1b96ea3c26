#include <doctest.h>

#include <cmath>

#include "dwellcert/simulate.hpp"
#include "dwellcert/transition.hpp"
#include "example_systems.hpp"
#include "oracles.hpp"

using namespace dwellcert;
using examples::mat;

namespace {

Matrix random_metzler(Rng& rng, Index n) {
  Matrix A(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      A(i, j) = i == j ? rng.uniform(-3.0, -0.5) : rng.uniform(0.0, 1.0);
  return A;
}

ImpulsiveSystemd flow_only(const Matrix& A, const Matrix& J, double horizon = 1.0) {
  const Index n = A.rows();
  return ImpulsiveSystemd::constant(A, Matrix::Zero(n, 0), J, Matrix::Zero(n, 0),
                                    Matrix::Zero(0, n), Matrix::Zero(0, 0),
                                    Matrix::Zero(0, n), Matrix::Zero(0, 0), horizon);
}

}  // namespace

TEST_CASE("zero flow gives the identity exactly") {
  const GridFn A = GridFn::constant(Matrix::Zero(3, 3), 1.0);
  const TransitionMatrix tm = compute_phi(A, 0.0, 1.0);
  CHECK((tm.phi - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant lower-triangular flow matches the closed form") {
  const GridFn A = GridFn::constant(mat({{-1, 0}, {1, -2}}), 1.0);
  const TransitionMatrix tm = compute_phi(A, 0.0, 1.0);
  CHECK(tm.phi(0, 0) == doctest::Approx(0.367879).epsilon(1e-5));
  CHECK(tm.phi(0, 1) == doctest::Approx(0.0));
  CHECK(tm.phi(1, 0) == doctest::Approx(0.232544).epsilon(1e-5));
  CHECK(tm.phi(1, 1) == doctest::Approx(0.135335).epsilon(1e-5));

  const Matrix ref = oracles::expm_series(mat({{-1, 0}, {1, -2}}));
  CHECK((tm.phi - ref).norm() / ref.norm() < 1e-8);
}

TEST_CASE("diagonal flow decouples") {
  const GridFn A = GridFn::constant(mat({{-2, 0}, {0, 1}}), 1.0);
  const TransitionMatrix tm = compute_phi(A, 0.0, 0.3);
  CHECK(tm.phi(0, 0) == doctest::Approx(std::exp(-0.6)).epsilon(1e-9));
  CHECK(tm.phi(1, 1) == doctest::Approx(std::exp(0.3)).epsilon(1e-9));
}

TEST_CASE("argument ordering is enforced") {
  const GridFn A = GridFn::constant(Matrix::Zero(1, 1), 1.0);
  CHECK_THROWS_AS(compute_phi(A, 0.5, 0.2), OrderingError);
}

TEST_CASE("rk4 agrees with the series exponential on random constant flows") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + rng.uniform_int(0, 3);
    const Matrix A = random_metzler(rng, n);
    const double tau = rng.uniform(0.2, 2.0);
    const TransitionMatrix tm = compute_phi(GridFn::constant(A, tau), 0.0, tau);
    const Matrix ref = oracles::expm_series(A * tau);
    CHECK((tm.phi - ref).norm() / ref.norm() < 1e-8);
  }
}

TEST_CASE("inverse and semigroup properties of the transition matrix") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix A = random_metzler(rng, 3);
    const GridFn Af = GridFn::constant(A, 2.0);
    const double tau = rng.uniform(0.5, 2.0);
    const double r = rng.uniform(0.1, tau - 0.05);

    const Matrix full = compute_phi(Af, 0.0, tau, 1000).phi;
    const Matrix left = compute_phi(Af, r, tau, 1000).phi;
    const Matrix right = compute_phi(Af, 0.0, r, 1000).phi;
    CHECK((full - left * right).cwiseAbs().maxCoeff() < 1e-6);

    const Matrix inv = full.partialPivLu().inverse();
    CHECK((full * inv - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("derivative in the second argument matches -Psi(tau,s) A(s)") {
  // timer-varying flow so the property is exercised beyond the constant case
  GridFn A({0.0, 0.5, 1.0},
           {mat({{-1, 0.5}, {0.2, -2}}), mat({{-2, 1}, {0.1, -1}}), mat({{-1, 0}, {0.3, -3}})});
  const double tau = 0.9, s = 0.4, h = 1e-4;
  const Matrix plus = compute_phi(A, s + h, tau, 4000).phi;
  const Matrix minus = compute_phi(A, s - h, tau, 4000).phi;
  const Matrix fd = (plus - minus) / (2 * h);
  const Matrix expect = -compute_phi(A, s, tau, 4000).phi * A.eval(s);
  CHECK((fd - expect).cwiseAbs().maxCoeff() < 5e-4);
}

TEST_CASE("range oracle on scalar systems") {
  // stable flow with no jump: lambda (0 - e^{theta}) < 0 for any theta
  const auto stable = flow_only(mat({{-1}}), mat({{0}}));
  const auto spec = DwellTimeSpec::range(0.5, 1.0);
  Vector lam(1);
  lam << 1.0;
  CHECK(range_dt_oracle(stable, lam, spec).verdict);

  // growth in both flow and jump: 1 - e^{-1} > 0
  const auto unstable = flow_only(mat({{1}}), mat({{1}}));
  const auto rep = range_dt_oracle(unstable, lam, DwellTimeSpec::range(1.0, 1.0));
  CHECK(!rep.verdict);
  CHECK(rep.worst_margin == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("minimum oracle margins") {
  Vector lam2 = Vector::Ones(2);
  const auto sys = flow_only(-Matrix::Identity(2, 2), Matrix::Zero(2, 2));
  const auto rep = min_dt_oracle(sys, lam2, DwellTimeSpec::minimum(1.0));
  CHECK(rep.verdict);
  CHECK(rep.condition_margins[0] == doctest::Approx(-1.0));
  CHECK(rep.condition_margins[1] == doctest::Approx(-1.0));

  // scalar: e^{-ln 2} * 3 - 1 = 1/2 > 0
  Vector lam1 = Vector::Ones(1);
  const auto bad = flow_only(mat({{-1}}), mat({{3}}), std::log(2.0));
  const auto rep2 = min_dt_oracle(bad, lam1, DwellTimeSpec::minimum(std::log(2.0)));
  CHECK(!rep2.verdict);
  CHECK(rep2.condition_margins[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("oracle argument validation") {
  const auto sys = flow_only(mat({{-1}}), mat({{0}}));
  Vector lam = Vector::Ones(1);
  CHECK_THROWS_AS(range_dt_oracle(sys, lam, DwellTimeSpec::minimum(1.0)), StructuralError);
  CHECK_THROWS_AS(min_dt_oracle(sys, lam, DwellTimeSpec::range(0.5, 1.0)), StructuralError);
  Vector bad = -Vector::Ones(1);
  CHECK_THROWS_AS(range_dt_oracle(sys, bad, DwellTimeSpec::range(0.5, 1.0)), OrderingError);
  Vector wrong = Vector::Ones(2);
  CHECK_THROWS_AS(range_dt_oracle(sys, wrong, DwellTimeSpec::range(0.5, 1.0)), DimensionError);
}

TEST_CASE("ill-conditioned transition matrices are rejected") {
  const Matrix A = mat({{-40, 400}, {0, 40}});
  const auto sys = flow_only(A, Matrix::Zero(2, 2), 1.0);
  Vector lam = Vector::Ones(2);
  CHECK_THROWS_AS(range_dt_oracle(sys, lam, DwellTimeSpec::range(0.9, 1.0)), SingularityError);
}
