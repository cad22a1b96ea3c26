#include <doctest.h>

#include "dwellcert/matrix_grid_fn.hpp"
#include "dwellcert/simulate.hpp"

using namespace dwellcert;

namespace {
Matrix m2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}
}  // namespace

TEST_CASE("grid function construction invariants") {
  CHECK_THROWS_AS(GridFn({0.0}, {m2(1, 0, 0, 1)}), GridError);
  CHECK_THROWS_AS(GridFn({0.0, 1.0, 0.5}, {m2(0, 0, 0, 0), m2(0, 0, 0, 0), m2(0, 0, 0, 0)}),
                  GridError);
  CHECK_THROWS_AS(GridFn({0.5, 1.0}, {m2(0, 0, 0, 0), m2(0, 0, 0, 0)}), GridError);
  Matrix wrong(1, 2);
  wrong << 1, 2;
  CHECK_THROWS_AS(GridFn({0.0, 1.0}, {m2(0, 0, 0, 0), wrong}), DimensionError);
}

TEST_CASE("eval is exact at nodes and affine on segments") {
  const Matrix v0 = m2(1, 2, 3, 4);
  const Matrix v1 = m2(5, -2, 0, 1);
  const Matrix v2 = m2(0.25, 8, -3, 2);
  GridFn f({0.0, 0.5, 2.0}, {v0, v1, v2});

  CHECK(f.eval(0.0) == v0);  // bitwise
  CHECK(f.eval(0.5) == v1);
  CHECK(f.eval(2.0) == v2);

  const Matrix mid = f.eval(0.25);
  CHECK(((mid - 0.5 * (v0 + v1)).cwiseAbs().maxCoeff()) == doctest::Approx(0.0));
  const Matrix mid2 = f.eval(1.25);
  CHECK(((mid2 - 0.5 * (v1 + v2)).cwiseAbs().maxCoeff()) == doctest::Approx(0.0));

  // constant extension beyond the horizon
  CHECK(f.eval(3.7) == v2);
  CHECK_THROWS_AS(f.eval(-0.1), OrderingError);
}

TEST_CASE("one-sided derivatives at an interior node") {
  GridFn f({0.0, 1.0, 2.0}, {m2(0, 0, 0, 0), m2(1, 0, 0, 0), m2(3, 0, 0, 0)});
  CHECK(f.left_derivative(1.0)(0, 0) == doctest::Approx(1.0));
  CHECK(f.right_derivative(1.0)(0, 0) == doctest::Approx(2.0));
  CHECK(f.right_derivative(2.5)(0, 0) == 0.0);  // frozen past the grid
}

TEST_CASE("constant factory and is_constant") {
  const GridFn c = GridFn::constant(m2(1, 2, 3, 4), 2.0);
  CHECK(c.nodes() == 2);
  CHECK(c.is_constant());
  CHECK(c.eval(1.234) == m2(1, 2, 3, 4));
  GridFn f({0.0, 1.0}, {m2(0, 0, 0, 0), m2(1, 0, 0, 0)});
  CHECK(!f.is_constant());
}

TEST_CASE("uniform grids nest under 4x refinement and anchor insertion") {
  const auto coarse = uniform_grid(0.5, 50);
  const auto fine = uniform_grid(0.5, 200);
  for (std::size_t i = 0; i < coarse.size(); ++i)
    CHECK(coarse[i] == fine[4 * i]);  // bit-exact nesting

  const auto with_anchor = uniform_grid_with(0.5, 50, 0.3);
  CHECK(with_anchor.size() == 51);  // 0.3 already a node
  bool found = false;
  for (double v : with_anchor) found = found || v == 0.3;
  CHECK(found);

  const auto inserted = uniform_grid_with(1.0, 3, 0.5);
  CHECK(inserted.size() == 5);
  CHECK(inserted[2] == 0.5);
}

TEST_CASE("random PWL functions match manual interpolation") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Index nodes = 2 + rng.uniform_int(0, 6);
    std::vector<double> grid{0.0};
    for (Index i = 1; i < nodes; ++i) grid.push_back(grid.back() + rng.uniform(0.1, 1.0));
    std::vector<Matrix> vals;
    for (Index i = 0; i < nodes; ++i)
      vals.push_back(m2(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                        rng.uniform(-2, 2)));
    GridFn f(grid, vals);
    for (int probe = 0; probe < 30; ++probe) {
      const double tau = rng.uniform(0.0, grid.back());
      std::size_t s = 0;
      while (s + 2 < grid.size() && grid[s + 1] <= tau) ++s;
      const double w = (tau - grid[s]) / (grid[s + 1] - grid[s]);
      const Matrix expect = (1 - w) * vals[s] + w * vals[s + 1];
      CHECK((f.eval(tau) - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}
