#include <doctest.h>

#include "dwellcert/positivity.hpp"
#include "dwellcert/synthesis.hpp"
#include "dwellcert/transition.hpp"
#include "example_systems.hpp"

using namespace dwellcert;
using examples::mat;

TEST_CASE("error-system construction reproduces the closed-loop jump matrices") {
  const Matrix I2 = Matrix::Identity(2, 2);
  {
    const auto plant = examples::min_plant();
    const auto err = build_error_system(plant, examples::min_gain_Lc_sampled(10, true),
                                        examples::min_gain_Ld(), I2, I2);
    CHECK((err.J - mat({{2, 0}, {1, 0}})).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((err.E_d - mat({{0.33}, {0.21}})).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(err.F_c.cwiseAbs().maxCoeff() == 0.0);
    CHECK(err.C_c == I2);
  }
  {
    const auto plant = examples::range_plant();
    const auto err = build_error_system(plant, examples::range_gain_Lc(),
                                        examples::range_gain_Ld(), I2, I2);
    CHECK((err.J - mat({{1.1, 0}, {0, 0}})).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((err.A.eval(0.25) - mat({{-2, 0}, {0, 0}})).cwiseAbs().maxCoeff() < 1e-12);
  }
  {
    // zero gains leave the plant dynamics untouched, only the outputs change
    const auto plant = examples::range_plant();
    const auto err = build_error_system(plant, GridFn::constant(Matrix::Zero(2, 1), 0.5),
                                        Matrix::Zero(2, 1), I2, I2);
    CHECK(err.J == plant.J);
    CHECK(err.E_d == plant.E_d);
    CHECK((err.A.eval(0.3) - plant.A.eval(0.3)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("range synthesis on the benchmark plant") {
  const auto plant = examples::range_plant();
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto spec = DwellTimeSpec::range(0.3, 0.5);
  const auto design = synth_range(plant, spec, I2, I2, 50);
  REQUIRE(design.has_value());
  CHECK(design->gamma <= 0.95);
  CHECK(std::abs(design->L_d(0, 0) - 1.0) <= 0.15);
  CHECK(std::abs(design->L_d(1, 0) - (-0.1)) <= 0.15);

  // gain recovery consistency at every node
  for (Index k = 0; k < design->X.nodes(); ++k) {
    const Matrix lhs = design->X.value(k) * design->L_c.value(k);
    CHECK((lhs - design->U_c.value(k)).cwiseAbs().maxCoeff() < 1e-10);
  }

  const auto pv = post_verify(plant, *design, 8);
  CHECK(pv.pass);
  CHECK(pv.gamma_analysis <= design->gamma + 1e-6);
}

TEST_CASE("minimum synthesis on the benchmark plant") {
  const auto plant = examples::min_plant();
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto spec = DwellTimeSpec::minimum(1.0);
  const auto design = synth_min(plant, spec, I2, I2, 50);
  REQUIRE(design.has_value());
  CHECK(design->gamma <= 1.73);
  CHECK(std::abs(design->L_d(0, 0) - (-1.0)) <= 0.2);
  CHECK(std::abs(design->L_d(1, 0) - 3.0) <= 0.2);
  CHECK(post_verify(plant, *design, 8).pass);

  // shipped positivity at a dense sampling
  const auto err = build_error_system(plant, *design);
  for (int d = 0; d <= 400; ++d) {
    const double tau = d / 400.0;
    CHECK(is_metzler(err.A.eval(tau), 1e-9));
    CHECK(is_nonnegative(err.E_c.eval(tau), 1e-9));
  }
}

TEST_CASE("fourth-order minimum synthesis stays within the gain budget") {
  const auto plant = examples::wide_plant();
  const Matrix I4 = Matrix::Identity(4, 4);
  const auto design = synth_min(plant, DwellTimeSpec::minimum(1.0), I4, I4, 50);
  REQUIRE(design.has_value());
  CHECK(design->gamma <= 3.2);
  CHECK(post_verify(plant, *design, 8).pass);
}

TEST_CASE("measurement-free positive plant: synthesis collapses to analysis") {
  // already-positive plant with zero output matrices: gains cannot act
  const auto plant = ImpulsiveSystemd::constant(
      mat({{-2, 1}, {0.5, -3}}), mat({{0.2}, {0.1}}), mat({{0.4, 0}, {0, 0.4}}),
      mat({{0.1}, {0.1}}), Matrix::Zero(1, 2), Matrix::Zero(1, 1), Matrix::Zero(1, 2),
      Matrix::Zero(1, 1), 1.0);
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto spec = DwellTimeSpec::minimum(1.0);
  const auto design = synth_min(plant, spec, I2, I2, 30);
  REQUIRE(design.has_value());

  const auto err = build_error_system(plant, *design);
  const auto cert = certify_min_gain(err, spec, 30);
  REQUIRE(cert.has_value());
  CHECK(cert->gamma == doctest::Approx(design->gamma).epsilon(1e-6));
}

TEST_CASE("unobservable expanding jump is infeasible") {
  const Index n = 2;
  const auto plant = ImpulsiveSystemd::constant(
      Matrix::Zero(n, n), Matrix::Zero(n, 1), 2.0 * Matrix::Identity(n, n),
      Matrix::Zero(n, 1), Matrix::Zero(1, n), Matrix::Zero(1, 1), Matrix::Zero(1, n),
      Matrix::Zero(1, 1), 1.0);
  const Matrix I2 = Matrix::Identity(2, 2);
  CHECK(!synth_range(plant, DwellTimeSpec::range(1.0, 1.0), I2, I2, 25).has_value());
}

TEST_CASE("weight validation") {
  const auto plant = examples::min_plant();
  const Matrix I2 = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(synth_min(plant, DwellTimeSpec::minimum(1.0), Matrix::Zero(2, 2), I2, 10),
                  StructuralError);
  Matrix neg = I2;
  neg(0, 1) = -0.5;
  CHECK_THROWS_AS(synth_min(plant, DwellTimeSpec::minimum(1.0), neg, I2, 10),
                  StructuralError);
  CHECK_THROWS_AS(synth_min(plant, DwellTimeSpec::range(0.3, 0.5), I2, I2, 10),
                  StructuralError);
}

TEST_CASE("switched synthesis on the two-mode benchmark") {
  const auto sw = examples::switched_system();
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto spec = DwellTimeSpec::minimum(1.0);
  const auto design = synth_switched(sw, spec, I2, 50);
  REQUIRE(design.has_value());
  CHECK(design->gamma <= 0.85);

  const auto pv = post_verify(sw, *design, 8);
  CHECK(pv.pass);
  CHECK(pv.gamma_analysis <= design->gamma + 1e-6);
  REQUIRE(pv.mode_lyap.size() == 2);

  // lifted spectral oracle per jump map with the fresh analysis vector
  const auto lifted = build_switched_error_system(sw, *design);
  Vector lam(4);
  lam << pv.mode_lyap[0].eval(1.0).col(0), pv.mode_lyap[1].eval(1.0).col(0);
  for (const auto& Jmap : lifted.jump_maps)
    CHECK(min_dt_oracle_with_jump(lifted.sys, Jmap, lam, spec).verdict);
}

TEST_CASE("lifted error system positivity equals the per-mode checks") {
  const auto sw = examples::switched_system();
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto design = synth_switched(sw, DwellTimeSpec::minimum(1.0), I2, 25);
  REQUIRE(design.has_value());
  const auto lifted = build_switched_error_system(sw, *design);
  const PositivityReport rep = check_internal_positivity(lifted.sys);
  CHECK(rep.positive());

  // brute-force block extraction cross-check on a dense sampling
  for (int d = 0; d <= 100; ++d) {
    const double tau = d / 100.0;
    const Matrix A = lifted.sys.A.eval(tau);
    for (Index m = 0; m < sw.num_modes(); ++m) {
      const auto& mode = sw.modes[static_cast<std::size_t>(m)];
      const Matrix Lm = design->L[static_cast<std::size_t>(m)].eval(tau);
      const Matrix block = A.block(2 * m, 2 * m, 2, 2);
      CHECK((block - (mode.A - Lm * mode.C)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(is_metzler(block, 1e-9));
    }
  }
}

TEST_CASE("identical stable unmeasured modes behave symmetrically") {
  SwitchedSystemd sw;
  SwitchedMode<double> m;
  m.A = mat({{-2, 0.5}, {0.3, -1.5}});
  m.E = mat({{0.4}, {0.2}});
  m.C = Matrix::Zero(1, 2);
  m.F = Matrix::Zero(1, 1);
  sw.modes = {m, m};
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto d1 = synth_switched(sw, DwellTimeSpec::minimum(1.0), I2, 20);
  REQUIRE(d1.has_value());
  // zero measurement: the recovered gains must vanish
  for (const auto& L : d1->L)
    for (const auto& v : L.values()) CHECK(v.cwiseAbs().maxCoeff() < 1e-9);
  // relabeling the modes cannot change the optimal gain
  std::swap(sw.modes[0], sw.modes[1]);
  const auto d2 = synth_switched(sw, DwellTimeSpec::minimum(1.0), I2, 20);
  REQUIRE(d2.has_value());
  CHECK(d1->gamma == doctest::Approx(d2->gamma).epsilon(1e-9));
}

TEST_CASE("post-verify rejects a corrupted design") {
  const auto plant = examples::min_plant();
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto design = synth_min(plant, DwellTimeSpec::minimum(1.0), I2, I2, 25);
  REQUIRE(design.has_value());

  ObserverDesign bad = *design;
  bad.L_d = mat({{-0.5}, {3.5}});  // J - L_d C_d picks up negative entries
  CHECK_THROWS_AS(post_verify(plant, bad, 8), RejectedDesignError);
  try {
    post_verify(plant, bad, 8);
  } catch (const RejectedDesignError& e) {
    CHECK(e.worst_margin > 0.0);
  }
}

TEST_CASE("dense factor does not change the verdict on constant plants") {
  const auto plant = examples::min_plant();
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto design = synth_min(plant, DwellTimeSpec::minimum(1.0), I2, I2, 25);
  REQUIRE(design.has_value());
  CHECK(post_verify(plant, *design, 1).pass);
  CHECK(post_verify(plant, *design, 8).pass);
}

TEST_CASE("rational gain table agrees with node gains at the nodes") {
  const auto plant = examples::min_plant();
  const Matrix I2 = Matrix::Identity(2, 2);
  const auto design = synth_min(plant, DwellTimeSpec::minimum(1.0), I2, I2, 20);
  REQUIRE(design.has_value());
  const GridFn table = rational_gain_table(*design, 4);
  for (Index k = 0; k < design->L_c.nodes(); ++k) {
    const double tau = design->L_c.node_at(k);
    CHECK((table.eval(tau) - design->L_c.value(k)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("timer-varying plants are rejected by synthesis") {
  auto plant = examples::min_plant();
  plant.A = GridFn({0.0, 1.0}, {mat({{-1, 0}, {1, -2}}), mat({{-2, 0}, {1, -2}})});
  const Matrix I2 = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(synth_min(plant, DwellTimeSpec::minimum(1.0), I2, I2, 10),
                  StructuralError);
}
