#include <doctest.h>

#include "dwellcert/positivity.hpp"
#include "dwellcert/systems.hpp"
#include "example_systems.hpp"

using namespace dwellcert;
using examples::mat;

TEST_CASE("dwell-time spec validation") {
  CHECK_THROWS_AS(DwellTimeSpec::range(0.0, 1.0), OrderingError);
  CHECK_THROWS_AS(DwellTimeSpec::range(2.0, 1.0), OrderingError);
  CHECK_THROWS_AS(DwellTimeSpec::minimum(0.0), OrderingError);
  const auto r = DwellTimeSpec::range(0.3, 0.5);
  CHECK(r.admits(0.4));
  CHECK(!r.admits(0.29));
  CHECK(!r.admits(0.51));
  const auto m = DwellTimeSpec::minimum(1.0);
  CHECK(m.admits(5.0));
  CHECK(!m.admits(0.99));
  CHECK(m.horizon() == 1.0);
}

TEST_CASE("impulsive system dimension validation") {
  ImpulsiveSystemd sys = examples::range_plant();
  CHECK(sys.n() == 2);
  CHECK(sys.p_c() == 1);
  CHECK(sys.q_c() == 1);
  sys.J = Matrix::Zero(3, 3);
  CHECK_THROWS_AS(sys.validate(), DimensionError);
}

TEST_CASE("switched lifting: block structure and jump maps") {
  const auto sw = examples::switched_system();
  const auto lifted = lift_switched(sw);
  CHECK(lifted.sys.n() == 4);
  CHECK(lifted.sys.p_c() == 1);

  const Matrix A = lifted.sys.A.eval(0.0);
  CHECK(A.block(0, 0, 2, 2) == sw.modes[0].A);
  CHECK(A.block(2, 2, 2, 2) == sw.modes[1].A);
  CHECK(A.block(0, 2, 2, 2).cwiseAbs().maxCoeff() == 0.0);

  const Matrix E = lifted.sys.E_c.eval(0.0);
  CHECK(E.block(0, 0, 2, 1) == sw.modes[0].E);
  CHECK(E.block(2, 0, 2, 1) == sw.modes[1].E);

  REQUIRE(lifted.jump_maps.size() == 2);  // N(N-1)
  // the (1,2) map carries the identity in rows 1-2, columns 3-4
  const Matrix& J12 = lifted.jump_maps[0];
  CHECK(lifted.jump_pairs[0] == std::pair<Index, Index>(0, 1));
  CHECK(J12.block(0, 2, 2, 2) == Matrix::Identity(2, 2));
  CHECK(J12.cwiseAbs().sum() == 2.0);
}

TEST_CASE("three-mode lifting has N(N-1) maps that annihilate on mismatched pairs") {
  SwitchedSystemd sw;
  for (int k = 0; k < 3; ++k) {
    SwitchedMode<double> m;
    m.A = mat({{-1. - k, 0}, {0, -2. - k}});
    m.E = mat({{1}, {1}});
    m.C = mat({{1, 0}});
    m.F = mat({{0}});
    sw.modes.push_back(m);
  }
  const auto lifted = lift_switched(sw);
  REQUIRE(lifted.jump_maps.size() == 6);

  // J_ij J_kl = 0 whenever j != k (basis-vector algebra)
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = 0; b < 6; ++b) {
      const auto [i, j] = lifted.jump_pairs[a];
      const auto [k, l] = lifted.jump_pairs[b];
      (void)i;
      (void)l;
      const Matrix prod = lifted.jump_maps[a] * lifted.jump_maps[b];
      if (j != k)
        CHECK(prod.cwiseAbs().maxCoeff() == 0.0);
      else
        CHECK(prod.cwiseAbs().maxCoeff() == 1.0);
    }
  }
}

TEST_CASE("switched system validation") {
  SwitchedSystemd sw;
  SwitchedMode<double> m;
  m.A = mat({{-1, 0}, {0, -1}});
  m.E = mat({{1}, {1}});
  m.C = mat({{1, 0}});
  m.F = mat({{0}});
  sw.modes = {m};
  CHECK_THROWS_AS(sw.validate(), DimensionError);  // needs N >= 2
  sw.modes.push_back(m);
  CHECK_NOTHROW(sw.validate());
  sw.modes[1].A = Matrix::Zero(3, 3);
  CHECK_THROWS_AS(sw.validate(), DimensionError);
}
