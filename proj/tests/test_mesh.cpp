#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "formlab/mesh.hpp"

using namespace formlab;

TEST_CASE("weights") {
  Weight f = Weight::flat();
  CHECK(f(0.37) == 1.0);
  CHECK(f.sphere_factor() == 1.0);

  Weight r3 = Weight::radial(3);
  CHECK(r3.sphere_factor() == doctest::Approx(4.0 * M_PI).epsilon(1e-15));
  CHECK(r3(2.0) == doctest::Approx(16.0 * M_PI).epsilon(1e-15));

  Weight r2 = Weight::radial(2);
  CHECK(r2(1.5) == doctest::Approx(2.0 * M_PI * 1.5).epsilon(1e-15));

  CHECK_THROWS_AS(Weight::radial(1), std::invalid_argument);
}

TEST_CASE("uniform mesh basics") {
  Mesh m = Mesh::uniform(0.0, 1.0, 4);
  CHECK(m.node_count() == 5);
  CHECK(m.element_count() == 4);
  CHECK(m.node(0) == 0.0);
  CHECK(m.node(4) == 1.0);
  CHECK(m.h(2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(m.max_h() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(m.element_of(0.3) == 1);
  CHECK(m.element_of(0.0) == 0);
  CHECK(m.element_of(1.0) == 3);

  CHECK_THROWS_AS(Mesh::uniform(1.0, 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(Mesh::uniform(0.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(Mesh::uniform(-1.0, 1.0, 4, Weight::radial(3)), std::invalid_argument);
  CHECK_THROWS_AS((void)m.element_of(1.5), std::invalid_argument);
}

TEST_CASE("graded mesh ratios and endpoints") {
  Mesh m = Mesh::graded(1e-12, 1e12, 4000, Weight::radial(3), 1.05);
  CHECK(m.node(0) == 1e-12);
  CHECK(m.node(m.node_count() - 1) == 1e12);
  for (std::size_t e = 0; e + 1 < m.element_count(); ++e) {
    CHECK(m.h(e + 1) / m.h(e) <= 1.05 * (1.0 + 1e-12));
    CHECK(m.h(e) > 0.0);
  }
  // a cap of 1 collapses to the uniform mesh
  Mesh u = Mesh::graded(0.0, 1.0, 8, Weight::flat(), 1.0);
  for (std::size_t e = 0; e < u.element_count(); ++e)
    CHECK(u.h(e) == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("from_nodes validation") {
  CHECK_THROWS_AS(Mesh::from_nodes({0.0, 0.0, 1.0}, Weight::flat()), std::invalid_argument);
  CHECK_THROWS_AS(Mesh::from_nodes({0.0, 1.0}, Weight::flat()), std::invalid_argument);
  Mesh m = Mesh::from_nodes({0.0, 0.4, 1.0}, Weight::flat());
  CHECK(m.h(0) == doctest::Approx(0.4));
  CHECK(m.h(1) == doctest::Approx(0.6));
}

TEST_CASE("gauss quadrature is exact on low degree polynomials") {
  Mesh m = Mesh::uniform(0.0, 1.0, 7);
  CHECK(integrate(m, [](double x) { return x * x; }) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(integrate(m, [](double x) { return x * x * x * x * x; }) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  Mesh r = Mesh::uniform(0.5, 2.0, 9, Weight::radial(3));
  // integrand 1 against 4 pi r^2 dr
  double vol = integrate(r, [](double) { return 1.0; });
  CHECK(vol == doctest::Approx(4.0 * M_PI / 3.0 * (8.0 - 0.125)).epsilon(1e-14));
}

TEST_CASE("interval integration clips at element boundaries") {
  Mesh m = Mesh::uniform(0.0, 1.0, 4);
  CHECK(integrate_interval(m, 0.3, 0.55, [](double) { return 1.0; }) ==
        doctest::Approx(0.25).epsilon(1e-14));
  CHECK(integrate_interval(m, 0.25, 0.75, [](double x) { return x; }) ==
        doctest::Approx((0.75 * 0.75 - 0.25 * 0.25) / 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(integrate_interval(m, 0.5, 0.4, [](double) { return 1.0; }),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate_interval(m, -0.5, 0.4, [](double) { return 1.0; }),
                  std::invalid_argument);
}

TEST_CASE("weighted average of a constant is exact") {
  Mesh m = Mesh::graded(0.1, 30.0, 57, Weight::radial(3), 1.2);
  double c = 3.8125;
  CHECK(weighted_average(m, 0.2, 7.3, [c](double) { return c; }) ==
        doctest::Approx(c).epsilon(1e-15));
}

TEST_CASE("field interpolation and slopes") {
  Mesh m = Mesh::uniform(0.0, 1.0, 10);
  Field f = Field::sample(m, [](double x) { return 2.0 * x + 1.0; });
  CHECK(f.eval(0.55) == doctest::Approx(2.1).epsilon(1e-14));
  CHECK(f.slope(3) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.slope_at(0.99) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.min_value() == doctest::Approx(1.0));
  CHECK(f.finite());

  Field g = Field::constant(m, -2.5);
  CHECK(g.max_abs() == 2.5);
  CHECK(integrate(g) == doctest::Approx(-2.5).epsilon(1e-14));

  CHECK_THROWS_AS(Field(m, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("ball scans are deterministic and stay inside the subdomain") {
  Mesh m = Mesh::uniform(0.0, 1.0, 256);
  BallScan s1 = enumerate_balls(m, 0.1, 0.9, 2, 48);
  BallScan s2 = enumerate_balls(m, 0.1, 0.9, 2, 48);
  REQUIRE(!s1.balls.empty());
  REQUIRE(s1.balls.size() == s2.balls.size());
  for (std::size_t i = 0; i < s1.balls.size(); ++i) {
    CHECK(s1.balls[i].center == s2.balls[i].center);
    CHECK(s1.balls[i].radius == s2.balls[i].radius);
    // enlarged ball inside (lo, hi)
    CHECK(s1.balls[i].center - 2 * s1.balls[i].radius >= 0.1 - 1e-12);
    CHECK(s1.balls[i].center + 2 * s1.balls[i].radius <= 0.9 + 1e-12);
    CHECK(s1.balls[i].radius > 0.0);
  }
  std::set<double> radii;
  for (const auto& b : s1.balls) radii.insert(b.radius);
  CHECK(radii.size() >= 2);  // dyadic ladder, not a single size
  for (double r : radii) {
    double ratio = *radii.rbegin() / r;
    CHECK(std::abs(ratio - std::round(ratio)) < 1e-9);  // powers of two apart
  }
}

TEST_CASE("exhaustion levels nest with the documented mollification radii") {
  ExhaustionSpec s = build_exhaustion(0.0, 1.0, 6);
  REQUIRE(s.levels.size() == 6);
  CHECK(s.levels[0].a == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.levels[0].b == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(s.levels[0].eps == doctest::Approx(0.0045).epsilon(1e-12));
  CHECK(s.levels[1].eps == doctest::Approx(0.00045).epsilon(1e-12));
  CHECK(s.levels[5].eps == doctest::Approx(5e-8).epsilon(1e-12));
  for (std::size_t j = 0; j + 1 < s.levels.size(); ++j) {
    CHECK(s.levels[j + 1].a < s.levels[j].a);  // strictly growing domains
    CHECK(s.levels[j + 1].b > s.levels[j].b);
    CHECK(s.levels[j].eps > 0.0);
    // mollified potentials stay evaluable strictly inside the outer domain
    CHECK(s.levels[j].a - s.levels[j].eps > s.outer_a);
    CHECK(s.levels[j].b + s.levels[j].eps < s.outer_b);
  }
  CHECK_THROWS_AS(build_exhaustion(1.0, 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_exhaustion(0.0, 1.0, 0), std::invalid_argument);
}
