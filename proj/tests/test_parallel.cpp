#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "formlab/forms.hpp"
#include "formlab/potential.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace formlab;

namespace {

// wide graded annulus with a radial measure, enough elements to spread
// across every worker
Mesh probe_mesh() { return Mesh::graded(1e-3, 1e3, 2000, Weight::radial(3), 1.05); }

double wavy(double r) { return std::sin(r) / (1.0 + r * r) + std::log1p(r); }

}  // namespace

TEST_CASE("the pool reports at least one worker") {
  CHECK(par::thread_count() >= 1);
}

TEST_CASE("fill and map write the same bits on both paths") {
  const std::size_t n = 10007;
  auto f = [](std::size_t i) {
    double x = static_cast<double>(i) * 1e-3;
    return std::sin(x) * std::exp(-x * 0.1) + 1.0 / (1.0 + x);
  };
  std::vector<double> serial = par::map<double>(par::Exec::serial, n, f);
  std::vector<double> parallel = par::map<double>(par::Exec::parallel, n, f);
  CHECK(serial == parallel);
}

TEST_CASE("sum reduces in index order and argmax takes the first maximum") {
  std::vector<double> xs;
  for (int i = 0; i < 5000; ++i) xs.push_back(std::sin(0.7 * i) * 1e-3 + 1e-16 * i);
  double manual = 0.0;
  for (double x : xs) manual += x;
  CHECK(par::sum(xs) == manual);

  std::vector<double> ties = {1.0, 3.0, 2.0, 3.0, 3.0, -1.0};
  CHECK(par::argmax(ties) == 1);
}

TEST_CASE("integrate agrees bitwise between serial and parallel") {
  Mesh m = probe_mesh();
  double s = integrate(m, wavy, par::Exec::serial);
  double p = integrate(m, wavy, par::Exec::parallel);
  CHECK(s == p);

  Field f = Field::sample(m, wavy);
  CHECK(integrate(f, par::Exec::serial) == integrate(f, par::Exec::parallel));
}

TEST_CASE("potential pairings agree bitwise between serial and parallel") {
  ExampleSpec osc = catalog("radial_oscillating");
  Mesh m = Mesh::graded(osc.domain_a, osc.domain_b, 1500, osc.weight, 1.02);

  // sum of a divergence part and a pointwise part in one call
  std::vector<double> hs = pair_with_hats(osc.potential, m, par::Exec::serial);
  std::vector<double> hp = pair_with_hats(osc.potential, m, par::Exec::parallel);
  CHECK(hs == hp);

  Field h = Field::sample(m, [&](double r) {
    double t = (r - m.a()) / (m.b() - m.a());
    return t * (1.0 - t);
  });
  CHECK(pair_with_square(osc.potential, h, par::Exec::serial) ==
        pair_with_square(osc.potential, h, par::Exec::parallel));

  Mesh unit = Mesh::uniform(0.0, 1.0, 512);
  Potential atoms = Potential::atomic({{0.25, 1.0}, {0.5, 2.0}, {0.77, 0.5}});
  CHECK(pair_with_hats(atoms, unit, par::Exec::serial) ==
        pair_with_hats(atoms, unit, par::Exec::parallel));
}

TEST_CASE("assembly agrees bitwise between serial and parallel") {
  ExampleSpec hardy = catalog("hardy", {{"n", 3}, {"c", 0.16}});
  Mesh m = Mesh::graded(hardy.domain_a, hardy.domain_b, 1200, hardy.weight, 1.05);
  FormMatrices s = assemble(m, EllipticCoeff::unit(), hardy.potential, par::Exec::serial);
  FormMatrices p = assemble(m, EllipticCoeff::unit(), hardy.potential, par::Exec::parallel);
  CHECK(s.stiffness.diag == p.stiffness.diag);
  CHECK(s.stiffness.off == p.stiffness.off);
  CHECK(s.potential.diag == p.potential.diag);
  CHECK(s.potential.off == p.potential.off);
  CHECK(s.flat_stiffness.diag == p.flat_stiffness.diag);
  CHECK(s.flat_stiffness.off == p.flat_stiffness.off);
}

TEST_CASE("results do not depend on the worker count") {
#ifdef _OPENMP
  Mesh m = probe_mesh();
  int before = omp_get_max_threads();
  double base = integrate(m, wavy, par::Exec::parallel);
  std::vector<double> hats = pair_with_hats(
      Potential::pointwise([](double r) { return 1.0 / (1.0 + r); }, "probe"), m,
      par::Exec::parallel);
  for (int workers : {1, 2, 3}) {
    omp_set_num_threads(workers);
    CHECK(integrate(m, wavy, par::Exec::parallel) == base);
    CHECK(pair_with_hats(Potential::pointwise([](double r) { return 1.0 / (1.0 + r); },
                                              "probe"),
                         m, par::Exec::parallel) == hats);
  }
  omp_set_num_threads(before);
#else
  CHECK(par::thread_count() == 1);
#endif
}
