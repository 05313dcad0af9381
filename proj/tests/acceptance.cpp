// Release gate: every numerical claim the library stands behind, one line of
// output per criterion. A criterion owns its tolerances and (where stated)
// its wall-clock budget; the exit code is the number of failed criteria, so
// the harness needs no extra wiring.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "formlab/scenario.hpp"

using namespace formlab;

namespace {

int failures = 0;

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += detail.empty() ? "" : "; ";
      detail += what;
    }
  }
  void note(const std::string& s) {
    detail += detail.empty() ? "" : "; ";
    detail += s;
  }
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run(int id, const char* title, double budget_s, const std::function<Outcome()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& ex) {
    o.ok = false;
    o.detail = std::string{"threw: "} + ex.what();
  }
  double secs = seconds_since(t0);
  if (budget_s > 0.0 && secs > budget_s)
    o.require(false, "exceeded " + num(budget_s) + "s budget");
  if (!o.ok) ++failures;
  std::printf("[%s] %2d %s (%.2fs)%s%s\n", o.ok ? "PASS" : "FAIL", id, title, secs,
              o.detail.empty() ? "" : " ", o.detail.c_str());
  std::fflush(stdout);
}

Mesh wide_annulus(int elements) {
  return Mesh::graded(1e-12, 1e12, elements, Weight::radial(3), 1.05);
}

double interior_energy(const Field& u, double lo, double hi) {
  return integrate_interval(u.mesh, lo, hi, [&](double r) {
    double s = u.slope_at(r);
    return s * s;
  });
}

// 1. The inverse-square bound on a wide annulus approaches 4c for a range of
//    subcritical c, within 2% once the mesh resolves the profile, and each
//    case stays under 30 seconds.
Outcome inverse_square_bound() {
  Outcome o;
  for (double c : {0.09, 0.16, 0.2}) {
    auto t0 = std::chrono::steady_clock::now();
    ExampleSpec e = catalog("hardy", {{"n", 3.0}, {"c", c}});
    double target = 4.0 * c;
    double err_coarse = 0.0, err_fine = 0.0, lambda = 0.0;
    for (int n : {1000, 2000, 4000}) {
      Mesh m = Mesh::graded(1e-12, 1e12, n, e.weight, 1.05);
      lambda = estimate_upper_form_bound(assemble(m, EllipticCoeff::unit(), e.potential))
                   .lambda;
      err_fine = std::abs(lambda - target) / target;
      if (n == 1000) err_coarse = err_fine;
    }
    double secs = seconds_since(t0);
    o.require(err_fine <= 0.02,
              "c=" + num(c) + " ended " + num(100 * err_fine) + "% off 4c");
    o.require(err_fine <= err_coarse + 1e-12, "c=" + num(c) + " did not improve");
    o.require(secs < 30.0, "c=" + num(c) + " took " + num(secs) + "s");
    o.note("c=" + num(c) + ": " + num(lambda) + " vs " + num(target) + " (" +
           num(100 * err_fine) + "%)");
  }
  return o;
}

// 2. The gradient-equation residual of the power solution log-derivative
//    vanishes at first order or better; under 1e-3 by four thousand elements.
Outcome power_solution_residual() {
  Outcome o;
  ExampleSpec e = catalog("hardy", {{"n", 3.0}, {"c", 0.1875}});
  double alpha = *e.alpha_plus;
  o.require(alpha == -0.25, "alpha+ is " + num(alpha));
  double prev = 0.0, last = 0.0;
  for (int n : {1000, 2000, 4000}) {
    Mesh m = Mesh::graded(e.domain_a, e.domain_b, n, e.weight, 1.05);
    Field v = Field::sample(m, [alpha](double r) { return alpha * std::log(r); });
    last = riccati_residual(v, EllipticCoeff::unit(), e.potential, m).max_abs_residual;
    if (prev > 0.0)
      o.require(last <= prev / 1.8, "residual ratio " + num(prev / last) + " at n=" +
                                        std::to_string(n));
    prev = last;
  }
  o.require(last < 1e-3, "final residual " + num(last));
  o.note("residual " + num(last) + " at 4000 elements");
  return o;
}

// 3. The exhaustion scheme for the constant potential settles by the fourth
//    level, lands on the cosine profile, and its log transform almost solves
//    the gradient equation.
Outcome constant_exhaustion() {
  Outcome o;
  ExampleSpec e = catalog("constant");
  ExhaustionSpec es = build_exhaustion(0.0, 1.0, 5);
  ExhaustionSolveReport rep =
      solve_exhaustion(es, EllipticCoeff::unit(), e.potential, {});
  o.require(rep.converged_at >= 0 && rep.converged_at <= 3,
            "drift settled at level " + std::to_string(rep.converged_at));
  for (std::size_t j = 0; j < rep.levels.size(); ++j)
    if (j >= 3)
      o.require(rep.levels[j].drift < 1e-4,
                "drift " + num(rep.levels[j].drift) + " at level " + std::to_string(j));

  const Mesh& m = rep.final_u.mesh;
  double norm = std::sqrt(ball_average(m, rep.ball.lo(), rep.ball.hi(), [&](double r) {
    double f = e.closed_solution(r);
    return f * f;
  }));
  double sup = 0.0;
  for (std::size_t i = 0; i < m.node_count(); ++i)
    sup = std::max(sup,
                   std::abs(rep.final_u.values[i] - e.closed_solution(m.node(i)) / norm));
  o.require(sup < 1e-4, "closed-form sup distance " + num(sup));

  Field v = log_transform(rep.final_u);
  double res = riccati_residual(v, EllipticCoeff::unit(), e.potential, m).max_abs_residual;
  o.require(res < 1e-3, "log-transform residual " + num(res));
  o.note("sup " + num(sup) + ", residual " + num(res));
  return o;
}

// 4. Every subcritical cataloged potential yields positive normalized
//    solutions on every level, and the log-Caccioppoli ratios stay flat.
Outcome catalog_positivity() {
  Outcome o;
  int covered = 0;
  for (const auto& name : catalog_names()) {
    ExampleSpec e = catalog(name);
    if (e.supercritical) continue;
    ++covered;
    ExhaustionOptions opt;
    opt.elements_per_level = 800;
    opt.weight = e.weight;
    if (name == "hardy") opt.grading_ratio = 1.05;
    ExhaustionSpec es = build_exhaustion(e.domain_a, e.domain_b, 5);
    ExhaustionSolveReport rep = solve_exhaustion(es, EllipticCoeff::unit(), e.potential, opt);
    double worst_min = 1e300, worst_norm = 0.0;
    std::vector<double> lc;
    for (const auto& lv : rep.levels) {
      worst_min = std::min(worst_min, lv.min_u);
      worst_norm = std::max(worst_norm, lv.normalization_error);
      lc.push_back(lv.log_caccioppoli);
    }
    std::sort(lc.begin(), lc.end());
    double median = lc[lc.size() / 2];
    double ratio = median > 0.0 ? lc.back() / median : 1.0;
    o.require(worst_min > 0.0, name + ": min u " + num(worst_min));
    o.require(worst_norm <= 1e-8, name + ": normalization error " + num(worst_norm));
    o.require(ratio <= 2.0, name + ": log-Caccioppoli spread " + num(ratio));
  }
  o.require(covered == 5, "covered " + std::to_string(covered) + " of 5 entries");
  o.note(std::to_string(covered) + " potentials, all levels positive");
  return o;
}

// 5. The two oscillating examples carry machine-verifiable semiboundedness
//    certificates with equality residuals near zero, and their assembled
//    bounds respect the 1 + 10h admissibility line.
Outcome oscillating_certificates() {
  Outcome o;
  for (const auto& name : {"radial_oscillating", "oscillating_1d"}) {
    ExampleSpec e = catalog(name);
    Mesh m = Mesh::uniform(e.domain_a, e.domain_b, 4000, e.weight);
    CertificateReport cert =
        check_semibound_certificate(e.certificate, EllipticCoeff::unit(), e.potential, m);
    o.require(cert.holds, std::string{name} + ": certificate rejected");
    o.require(cert.max_abs_residual <= 1e-6 * cert.scale,
              std::string{name} + ": equality residual " + num(cert.max_abs_residual));
    double lambda =
        estimate_upper_form_bound(assemble(m, EllipticCoeff::unit(), e.potential)).lambda;
    double gate = 1.0 + 10.0 * m.max_h();
    o.require(lambda <= gate,
              std::string{name} + ": lambda " + num(lambda) + " over " + num(gate));
    o.note(std::string{name} + ": lambda " + num(lambda) + " <= " + num(gate));
  }
  return o;
}

// 6. The multiplier norm of g = 1/(4r) lands on 1/4 and the divergence field
//    it generates stays within the implied 2 sqrt(C1) budget.
Outcome multiplier_budget() {
  Outcome o;
  Mesh m = wide_annulus(4000);
  auto g = [](double r) { return 0.25 / r; };
  double c1 = multiplier_norm(g, m).lambda;
  o.require(std::abs(c1 - 0.25) <= 0.02 * 0.25, "C1 " + num(c1));
  SufficiencyReport suf = verify_sufficiency_constant(g, m);
  o.require(suf.consistent, "measured " + num(suf.measured_lambda) + " over implied " +
                                num(suf.implied_lambda));
  o.require(suf.measured_lambda <= 1.001,
            "measured lambda " + num(suf.measured_lambda) + " over 1.001");
  o.note("C1 " + num(c1) + ", lambda " + num(suf.measured_lambda));
  return o;
}

// 7. Sweeping the critical inverse-square potential toward its form bound
//    blows up the inner-annulus Dirichlet energy: the last factor holds at
//    least five times the first-level energy.
Outcome critical_energy_blowup() {
  Outcome o;
  ExampleSpec e = catalog("hardy", {{"n", 3.0}, {"c", 0.25}});
  Mesh m = wide_annulus(4000);
  std::vector<double> factors;
  for (int k = 1; k <= 8; ++k) factors.push_back(1.0 - std::pow(2.0, -k));
  SweepOptions opt;
  opt.inner_lo = 1e-12;
  opt.inner_hi = 1e-11;
  SweepReport rep = critical_sweep(e.potential, EllipticCoeff::unit(), m, factors, opt);
  o.require(rep.coercivity_lost_at == -1,
            "coercivity lost at index " + std::to_string(rep.coercivity_lost_at));
  o.require(rep.rows.size() == 8, "swept " + std::to_string(rep.rows.size()) + " rows");
  if (rep.rows.size() >= 2) {
    double growth = rep.rows.back().inner_energy / rep.rows.front().inner_energy;
    o.require(growth > 5.0, "energy growth " + num(growth));
    o.note("growth x" + num(growth) + ", reference curve value " +
           num(rep.reference_energy));
  }
  return o;
}

// 8. Gauge solves: the cosine closed form at the midpoint, the atomic lift
//    hit exactly, agreement between the direct and series solvers, u >= 1,
//    and interior energy stable under refinement.
Outcome gauge_closed_forms() {
  Outcome o;
  ExampleSpec e = catalog("constant");
  GaugeReport fem = solve_gauge(e.potential, GaugeMethod::fem, 1000);
  double mid_err = std::abs(fem.u.eval(0.5) - std::sqrt(2.0));
  o.require(mid_err <= 1e-5, "u(1/2) off by " + num(mid_err));

  GaugeReport series = solve_gauge(e.potential, GaugeMethod::neumann_series, 1000);
  o.require(series.converged, "series did not converge");
  double diff = 0.0;
  for (std::size_t i = 0; i < fem.u.values.size(); ++i)
    diff = std::max(diff, std::abs(fem.u.values[i] - series.u.values[i]));
  o.require(diff <= 1e-5, "solver disagreement " + num(diff));
  o.require(fem.min_u >= 1.0 - 1e-9, "min u " + num(fem.min_u));
  o.require(series.min_u >= 1.0 - 1e-9, "series min u " + num(series.min_u));

  GaugeReport atom = solve_gauge(Potential::atomic({{0.5, 2.0}}), GaugeMethod::fem, 1000);
  double atom_err = std::abs(atom.u.eval(0.5) - 2.0);
  o.require(atom_err <= 1e-8, "atomic u(1/2) off by " + num(atom_err));
  o.require(atom.min_u >= 1.0 - 1e-9, "atomic min u " + num(atom.min_u));

  double lo_e = 1e300, hi_e = 0.0;
  for (int n : {250, 500, 1000, 2000}) {
    GaugeReport g = solve_gauge(e.potential, GaugeMethod::fem, n);
    double en = interior_energy(g.u, 0.1, 0.9);
    lo_e = std::min(lo_e, en);
    hi_e = std::max(hi_e, en);
  }
  o.require(hi_e <= 1.01 * lo_e, "interior energy drifted " + num(hi_e / lo_e));
  o.note("mid error " + num(mid_err) + ", solver gap " + num(diff) + ", energy window " +
         num(hi_e / lo_e));
  return o;
}

// 9. Diagnostics are reproducible bit for bit, invariant under rescaling the
//    weight, exact on the unit weight, finite on power weights, and the
//    spike family pushes oscillation, reverse Holder, and doubling together.
Outcome diagnostics_invariances() {
  Outcome o;
  Mesh m = Mesh::uniform(0.0, 1.0, 1024);
  Field w = Field::sample(m, [](double x) { return std::pow(x + 1e-9, 1.5); });
  PipelineReport r1 = wrh_bmo_implies_doubling_check(w, 0.02, 0.98, 2.0, 48);
  PipelineReport r2 = wrh_bmo_implies_doubling_check(w, 0.02, 0.98, 2.0, 48);
  o.require(r1.wrh.constant == r2.wrh.constant &&
                r1.bmo.constant == r2.bmo.constant &&
                r1.doubling.constant == r2.doubling.constant,
            "rerun changed a constant");
  o.require(r1.wrh.witness.ball.center == r2.wrh.witness.ball.center &&
                r1.wrh.witness.ball.radius == r2.wrh.witness.ball.radius &&
                r1.doubling.witness.value == r2.doubling.witness.value,
            "rerun moved a witness");

  Field scaled(m, [&] {
    std::vector<double> vs = w.values;
    for (double& v : vs) v *= 37.25;
    return vs;
  }());
  PipelineReport rs = wrh_bmo_implies_doubling_check(scaled, 0.02, 0.98, 2.0, 48);
  o.require(std::abs(rs.wrh.constant - r1.wrh.constant) <= 1e-12 * r1.wrh.constant,
            "reverse Holder moved under scaling");
  o.require(std::abs(rs.bmo.constant - r1.bmo.constant) <= 1e-12 * (1.0 + r1.bmo.constant),
            "oscillation moved under scaling");
  o.require(std::abs(rs.doubling.constant - r1.doubling.constant) <=
                1e-12 * r1.doubling.constant,
            "doubling moved under scaling");

  Field unit = Field::constant(m, 1.0);
  PipelineReport ru = wrh_bmo_implies_doubling_check(unit, 0.02, 0.98, 2.0, 48);
  o.require(ru.wrh.constant == 1.0 && ru.bmo.constant == 0.0 && ru.doubling.constant == 1.0,
            "unit weight triple (" + num(ru.wrh.constant) + ", " + num(ru.bmo.constant) +
                ", " + num(ru.doubling.constant) + ")");

  for (double beta : {-0.5, 0.5, 1.0, 2.0}) {
    Field p = Field::sample(m, [beta](double x) { return std::pow(x + 1e-9, beta); });
    PipelineReport rp = wrh_bmo_implies_doubling_check(p, 0.02, 0.98, 2.0, 48);
    bool finite = std::isfinite(rp.wrh.constant) && std::isfinite(rp.bmo.constant) &&
                  std::isfinite(rp.doubling.constant);
    o.require(finite && rp.wrh.constant > 0.0 && rp.doubling.constant >= 1.0,
              "power weight beta=" + num(beta) + " degenerated");
  }

  double prev_wrh = 0.0, prev_bmo = 0.0, prev_dbl = 0.0;
  for (int k = 1; k <= 4; ++k) {
    double amp = std::pow(10.0, k), width = 0.08 / std::pow(2.0, k);
    Field sp = Field::sample(m, [=](double x) {
      double t = (x - 0.5) / width;
      return 1.0 + amp * std::exp(-t * t);
    });
    PipelineReport rk = wrh_bmo_implies_doubling_check(sp, 0.05, 0.95, 2.0, 48);
    o.require(rk.wrh.constant > prev_wrh && rk.bmo.constant > prev_bmo &&
                  rk.doubling.constant > prev_dbl,
              "spike k=" + std::to_string(k) + " did not sharpen every constant");
    prev_wrh = rk.wrh.constant;
    prev_bmo = rk.bmo.constant;
    prev_dbl = rk.doubling.constant;
  }
  o.note("spikes end at wrh " + num(prev_wrh) + ", doubling " + num(prev_dbl));
  return o;
}

// 10. The nonsymmetric 3D example: the exact solution satisfies the strong
//     equation to finite-difference accuracy, and the antisymmetric part is
//     invisible to the quadratic form.
Outcome nonsymmetric_exactness() {
  Outcome o;
  ExampleSpec e = catalog("nonsym_3d");
  const Example3D& ex = *e.example3d;
  std::vector<Point3> samples = unit_ball_samples(100);
  double res = pointwise_residual_3d(ex.solution, ex.matrix, ex.sigma, samples, 1e-3);
  o.require(res < 1e-5, "strong residual " + num(res));

  double form_dev = 0.0;
  const Point3 dirs[] = {{1.0, 0.0, 0.0},
                         {0.0, 1.0, 0.0},
                         {0.0, 0.0, 1.0},
                         {0.57735, 0.57735, 0.57735},
                         {-0.4, 0.75, 0.2}};
  for (const auto& x : samples) {
    std::array<double, 9> a = ex.matrix(x);
    for (const auto& d : dirs) {
      double quad = 0.0, norm2 = 0.0;
      for (int i = 0; i < 3; ++i) {
        norm2 += d[i] * d[i];
        for (int j = 0; j < 3; ++j) quad += d[i] * a[3 * i + j] * d[j];
      }
      form_dev = std::max(form_dev, std::abs(quad - norm2) / norm2);
    }
  }
  o.require(form_dev <= 1e-13, "quadratic form deviates by " + num(form_dev));
  o.note("residual " + num(res) + ", form deviation " + num(form_dev));
  return o;
}

}  // namespace

int main() {
  std::printf("acceptance gate, library version %s\n", kVersion);
  run(1, "inverse-square bound approaches 4c", 0.0, inverse_square_bound);
  run(2, "power-solution gradient residual is first order", 10.0, power_solution_residual);
  run(3, "constant-potential exhaustion hits the cosine profile", 10.0, constant_exhaustion);
  run(4, "cataloged potentials stay positive and normalized", 0.0, catalog_positivity);
  run(5, "oscillating certificates hold with equality", 10.0, oscillating_certificates);
  run(6, "multiplier norm meets its sufficiency budget", 0.0, multiplier_budget);
  run(7, "critical sweep blows up the inner energy", 60.0, critical_energy_blowup);
  run(8, "gauge solvers reproduce closed forms", 0.0, gauge_closed_forms);
  run(9, "diagnostics are reproducible and scale invariant", 0.0, diagnostics_invariances);
  run(10, "nonsymmetric 3D example is exact", 0.0, nonsymmetric_exactness);
  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
