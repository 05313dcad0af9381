#include "formlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace formlab {

namespace {

bool is_pointwise_like(const Potential& p) {
  if (p.kind() == Potential::Kind::pointwise) return true;
  if (p.kind() != Potential::Kind::sum) return false;
  for (const auto& part : p.parts())
    if (!is_pointwise_like(part)) return false;
  return true;
}

double ball_mean_square(const Mesh& m, const Field& u, const Ball& b) {
  return ball_average(m, b.lo(), b.hi(), [&](double r) {
    double v = u.eval(r);
    return v * v;
  });
}

/// Core of solve_level without the normalization: solves (K - S) w = s and
/// returns v = w + 1 as nodal values on the full mesh.
struct RawSolve {
  std::vector<double> v;
  double lambda = 0.0;
  int iterations = 0;
  bool fallback = false;
};

RawSolve solve_raw(const Mesh& mesh, const EllipticCoeff& coeff, const Potential& sigma,
                   bool direct) {
  FormMatrices fm = assemble(mesh, coeff, sigma);
  RawSolve out;
  out.lambda = estimate_upper_form_bound(fm).lambda;
  if (out.lambda >= 1.0)
    throw formlab::error("coercivity lost: measured form bound reaches 1");

  linalg::SymTridiag A = linalg::subtract(fm.stiffness, fm.potential);
  std::vector<double> s = pair_with_hats(sigma, mesh);
  std::vector<double> w(s.size(), 0.0);
  if (direct) {
    linalg::TridiagLdlt::factor(A).solve(s, w);
  } else {
    auto cg = linalg::pcg(A, s, w, 1e-10);
    out.iterations = cg.iterations;
    if (!cg.converged) {
      // keep the run alive, but flag it: the report records the fallback
      linalg::TridiagLdlt::factor(A).solve(s, w);
      out.fallback = true;
    }
  }

  out.v.assign(mesh.node_count(), 1.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) throw formlab::error("linear solve produced non-finite values");
    out.v[i + 1] += w[i];
  }
  return out;
}

LevelSolve finish_level(const Mesh& mesh, RawSolve raw, const Ball& ball) {
  double ms = ball_mean_square(mesh, Field(mesh, raw.v), ball);
  if (!(ms > 0.0)) throw formlab::error("solution has no mass on the normalization ball");
  double scale = 1.0 / std::sqrt(ms);
  for (double& x : raw.v) x *= scale;

  LevelSolve out;
  out.u = Field(mesh, std::move(raw.v));
  out.measured_lambda = raw.lambda;
  out.min_u = out.u.min_value();
  out.linear_iterations = raw.iterations;
  out.used_direct_fallback = raw.fallback;
  if (out.min_u < -1e-10)
    throw formlab::error("maximum principle violated at the discrete level; refine the mesh");
  out.normalization_error = std::abs(ball_mean_square(mesh, out.u, ball) - 1.0);
  return out;
}

}  // namespace

nlohmann::json LevelSolve::to_json() const {
  return {{"measured_lambda", measured_lambda},
          {"normalization_error", normalization_error},
          {"min_u", min_u},
          {"linear_iterations", linear_iterations},
          {"used_direct_fallback", used_direct_fallback}};
}

LevelSolve solve_level(const Mesh& mesh, const EllipticCoeff& coeff,
                       const Potential& sigma_pointwise, const Ball& ball) {
  if (!is_pointwise_like(sigma_pointwise))
    throw std::invalid_argument("solve_level needs a pointwise (mollified) potential");
  if (ball.lo() < mesh.a() || ball.hi() > mesh.b())
    throw std::invalid_argument("normalization ball leaves the mesh");
  return finish_level(mesh, solve_raw(mesh, coeff, sigma_pointwise, false), ball);
}

std::vector<MollifierSpec> mollifier_family(const ExhaustionSpec& spec) {
  std::vector<MollifierSpec> fam;
  fam.reserve(spec.levels.size());
  for (const auto& lvl : spec.levels) fam.push_back(MollifierSpec{lvl.eps});
  return fam;
}

nlohmann::json ExhaustionSolveReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& l : levels)
    rows.push_back({{"a", l.a},
                    {"b", l.b},
                    {"eps", l.eps},
                    {"lambda", l.lambda},
                    {"min_u", l.min_u},
                    {"normalization_error", l.normalization_error},
                    {"drift", l.drift},
                    {"caccioppoli", l.caccioppoli},
                    {"log_caccioppoli", l.log_caccioppoli},
                    {"doubling_u2", l.doubling_u2}});
  return {{"levels", rows},
          {"ball", {{"center", ball.center}, {"radius", ball.radius}}},
          {"converged_at", converged_at},
          {"drift_stalled", drift_stalled},
          {"final_weak_residual", final_weak_residual}};
}

namespace {

Mesh level_mesh(double a, double b, const ExhaustionOptions& opt, const Weight& w) {
  if (opt.grading_ratio > 1.0)
    return Mesh::graded(a, b, opt.elements_per_level, w, opt.grading_ratio);
  return Mesh::uniform(a, b, opt.elements_per_level, w);
}

/// Hat-by-hat weak residual of -(a u' w)' = sigma u w, direct quadrature,
/// independent of the assembled matrices.
double weak_residual(const Mesh& m, const EllipticCoeff& coeff, const Potential& sigma,
                     const Field& u) {
  const auto& x = m.nodes();
  const std::size_t ni = m.node_count() - 2;
  auto rows = par::map<double>(par::Exec::parallel, ni, [&](std::size_t k) -> double {
    try {
      const std::size_t i = k + 1;
      const double xl = x[i - 1], xc = x[i], xr = x[i + 1];
      auto hat = [&](double r) {
        return r <= xc ? (r - xl) / (xc - xl) : (xr - r) / (xr - xc);
      };
      auto hat_slope = [&](double r) {
        return r <= xc ? 1.0 / (xc - xl) : -1.0 / (xr - xc);
      };
      auto f = [&](double r) {
        return coeff(r) * u.slope_at(r) * hat_slope(r) -
               sigma.density(r) * u.eval(r) * hat(r);
      };
      auto mag = [&](double r) {
        return std::abs(coeff(r) * u.slope_at(r) * hat_slope(r)) +
               std::abs(sigma.density(r) * u.eval(r) * hat(r));
      };
      double res = integrate_interval(m, xl, xc, f) + integrate_interval(m, xc, xr, f);
      double scl = integrate_interval(m, xl, xc, mag) + integrate_interval(m, xc, xr, mag);
      return std::abs(res) / std::max(scl, 1e-300);
    } catch (...) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  });
  double worst = 0.0;
  for (double r : rows) {
    if (!std::isfinite(r)) throw formlab::error("non-finite weak residual");
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace

ExhaustionSolveReport solve_exhaustion(const ExhaustionSpec& spec,
                                       const EllipticCoeff& coeff, const Potential& sigma,
                                       const ExhaustionOptions& opt) {
  if (spec.levels.empty()) throw std::invalid_argument("exhaustion has no levels");
  if (!(opt.elements_per_level >= 8))
    throw std::invalid_argument("too few elements per level");
  const Weight& weight = opt.weight;

  ExhaustionSolveReport rep;
  const auto& first = spec.levels.front();
  const double mid0 = 0.5 * (first.a + first.b);
  rep.ball = Ball{mid0, 0.1 * (first.b - first.a)};
  const double psi_half = 0.5 * opt.psi_fraction * (first.b - first.a);
  const double psi_lo = mid0 - psi_half, psi_hi = mid0 + psi_half;

  auto mollifiers = mollifier_family(spec);
  for (std::size_t j = 0; j < spec.levels.size(); ++j) {
    const auto& lvl = spec.levels[j];
    Mesh m = level_mesh(lvl.a, lvl.b, opt, weight);
    Potential sig_eps = mollify(sigma, mollifiers[j], spec.outer_a, spec.outer_b, weight);
    LevelSolve ls = solve_level(m, coeff, sig_eps, rep.ball);

    ExhaustionSolveReport::Level row;
    row.a = lvl.a;
    row.b = lvl.b;
    row.eps = lvl.eps;
    row.lambda = ls.measured_lambda;
    row.min_u = ls.min_u;
    row.normalization_error = ls.normalization_error;

    Field psi = tent(m, psi_lo, psi_hi);
    row.caccioppoli = caccioppoli_ratio(ls.u, psi, coeff);
    row.log_caccioppoli = log_caccioppoli_ratio(ls.u, psi);
    Field u2(m, [&] {
      std::vector<double> sq(ls.u.values.size());
      for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = ls.u.values[i] * ls.u.values[i];
      return sq;
    }());
    row.doubling_u2 =
        doubling_constant(u2, enumerate_balls(m, lvl.a, lvl.b, 4, opt.scan_target)).constant;

    if (!rep.solutions.empty()) {
      const Field& prev = rep.solutions.back();
      double d2 = integrate(prev.mesh, [&](double r) {
        double d = ls.u.eval(r) - prev.eval(r);
        return d * d;
      });
      row.drift = std::sqrt(std::max(d2, 0.0));
      if (rep.converged_at < 0 && row.drift < opt.drift_tolerance)
        rep.converged_at = static_cast<int>(j);
    }
    rep.levels.push_back(row);
    rep.solutions.push_back(std::move(ls.u));

    // a drift that refuses to decrease over three consecutive comparisons
    // signals a stalled scheme rather than convergence in progress
    if (rep.levels.size() >= 4) {
      std::size_t n = rep.levels.size();
      bool stalled = true;
      for (std::size_t t = n - 3; t < n; ++t)
        if (rep.levels[t].drift < rep.levels[t - 1].drift) stalled = false;
      if (stalled && rep.converged_at < 0) rep.drift_stalled = true;
    }
  }

  rep.final_u = rep.solutions.back();
  Potential sig_last =
      mollify(sigma, mollifiers.back(), spec.outer_a, spec.outer_b, weight);
  rep.final_weak_residual =
      weak_residual(rep.final_u.mesh, coeff, sig_last, rep.final_u);
  return rep;
}

Field log_transform(const Field& u) {
  if (!u.finite() || u.min_value() <= 0.0)
    throw std::invalid_argument("log transform needs a strictly positive field");
  std::vector<double> vals(u.values.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = std::log(u.values[i]);
  return Field(u.mesh, std::move(vals));
}

double log_gradient_energy(const Field& u, double lo, double hi) {
  if (u.min_value() <= 0.0)
    throw std::invalid_argument("log gradient energy needs a positive field");
  return integrate_interval(u.mesh, lo, hi, [&](double r) {
    double s = u.slope_at(r), v = u.eval(r);
    return (s * s) / (v * v);
  });
}

nlohmann::json RiccatiReport::to_json() const {
  return {{"max_abs_residual", max_abs_residual}, {"scale", scale}, {"relative", relative}};
}

RiccatiReport riccati_residual(const Field& v, const EllipticCoeff& coeff,
                               const Potential& sigma, const Mesh& mesh) {
  if (!v.finite()) throw std::invalid_argument("v must be finite");
  if (!v.mesh.same_nodes(mesh)) throw std::invalid_argument("v must live on the mesh");
  const auto& x = mesh.nodes();
  const Weight& w = mesh.weight();
  const std::size_t ni = mesh.node_count() - 2;
  if (ni == 0) throw std::invalid_argument("mesh has no interior nodes");

  std::vector<double> sig = pair_with_hats(sigma, mesh);

  struct Row {
    double residual, magnitude;
  };
  auto rows = par::map<Row>(par::Exec::parallel, ni, [&](std::size_t k) -> Row {
    try {
      const std::size_t i = k + 1;
      const double xl = x[i - 1], xc = x[i], xr = x[i + 1];
      // element-constant gradients make the first term a two-element sum
      auto lin = [&](double r) { return coeff(r) * v.slope_at(r); };
      auto linl = [&](double r) { return lin(r) / (xc - xl); };
      auto linr = [&](double r) { return -lin(r) / (xr - xc); };
      const double t1 =
          integrate_interval(mesh, xl, xc, linl) + integrate_interval(mesh, xc, xr, linr);
      // quadratic term: element-midpoint rule, hat evaluated mid-element
      double t2 = 0.0;
      for (const auto& [lo, hi] : {std::pair{xl, xc}, std::pair{xc, xr}}) {
        const double mid = 0.5 * (lo + hi);
        const double s = v.slope_at(mid);
        const double hatmid = mid <= xc ? (mid - xl) / (xc - xl) : (xr - mid) / (xr - xc);
        t2 -= coeff(mid) * s * s * hatmid * w(mid) * (hi - lo);
      }
      const double t3 = -sig[k];
      return Row{t1 + t2 + t3, std::abs(t1) + std::abs(t2) + std::abs(t3)};
    } catch (...) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return Row{nan, nan};
    }
  });

  RiccatiReport rep;
  rep.profile.resize(ni);
  double scale = 0.0;
  for (std::size_t k = 0; k < ni; ++k) {
    if (!std::isfinite(rows[k].residual))
      throw formlab::error("non-finite Riccati residual");
    rep.profile[k] = rows[k].residual;
    rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(rows[k].residual));
    scale = std::max(scale, rows[k].magnitude);
  }
  rep.scale = scale > 0.0 ? scale : 1.0;
  rep.relative = rep.max_abs_residual / rep.scale;
  return rep;
}

nlohmann::json RiccatiBounds::to_json() const {
  return {{"lambda", lambda},
          {"lambda_tolerance", lambda_tolerance},
          {"upper_within_tolerance", upper_within_tolerance},
          {"Lambda", Lambda},
          {"grad_multiplier", grad_multiplier}};
}

RiccatiBounds form_bounds_from_riccati(const Field& v, const EllipticCoeff& coeff,
                                       const Mesh& mesh) {
  if (!v.mesh.same_nodes(mesh)) throw std::invalid_argument("v must live on the mesh");
  // sigma := -div(a v' x/|x|) - a v'^2
  Potential sigma = Potential::sum(
      {Potential::divergence([&, v](double r) { return -coeff(r) * v.slope_at(r); },
                             "-a v'"),
       Potential::pointwise(
           [&, v](double r) {
             double s = v.slope_at(r);
             return -coeff(r) * s * s;
           },
           "-a v'^2")},
      "riccati-reconstruction");
  FormMatrices fm = assemble(mesh, coeff, sigma);
  RiccatiBounds out;
  out.lambda = estimate_upper_form_bound(fm).lambda;
  out.Lambda = estimate_lower_form_bound(fm).lambda;
  out.lambda_tolerance = 1.0 + 10.0 * mesh.max_h();
  out.upper_within_tolerance = out.lambda <= out.lambda_tolerance;
  out.grad_multiplier =
      multiplier_norm([&, v](double r) { return std::abs(v.slope_at(r)); }, mesh).lambda;
  return out;
}

nlohmann::json SweepReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"lambda_factor", r.lambda_factor},
                         {"effective_lambda", r.effective_lambda},
                         {"sup_u", r.sup_u},
                         {"min_u", r.min_u},
                         {"inner_energy", r.inner_energy},
                         {"doubling", r.doubling}});
  return {{"rows", rows_json},
          {"base_lambda", base_lambda},
          {"reference_energy", reference_energy},
          {"coercivity_lost_at", coercivity_lost_at},
          {"inner_lo", inner_lo},
          {"inner_hi", inner_hi}};
}

SweepReport critical_sweep(const Potential& sigma, const EllipticCoeff& coeff,
                           const Mesh& mesh, const std::vector<double>& lambdas,
                           const SweepOptions& opt) {
  if (lambdas.empty()) throw std::invalid_argument("sweep needs at least one factor");
  if (!is_pointwise_like(sigma))
    throw std::invalid_argument("sweep needs a pointwise potential");

  FormMatrices base = assemble(mesh, coeff, sigma);
  SweepReport rep;
  rep.base_lambda = estimate_upper_form_bound(base).lambda;
  if (std::abs(rep.base_lambda - 1.0) > 0.02)
    throw std::invalid_argument("sweep expects a potential with form bound 1 within 2%");

  rep.inner_lo = opt.inner_lo > 0.0 ? opt.inner_lo : mesh.a();
  rep.inner_hi = opt.inner_hi > 0.0 ? opt.inner_hi : std::min(mesh.b(), mesh.a() * 10.0);
  if (!(rep.inner_lo < rep.inner_hi)) {
    rep.inner_lo = mesh.a();
    rep.inner_hi = mesh.b();
  }

  const Weight& w = mesh.weight();
  if (w.kind == WeightKind::radial && w.dim > 2) {
    double half = 0.5 * (w.dim - 2);
    rep.reference_energy = w.sphere_factor() * half * half * std::log(rep.inner_hi / rep.inner_lo);
  }

  const double mid = 0.5 * (mesh.a() + mesh.b());
  Ball ball{mid, 0.1 * (mesh.b() - mesh.a())};

  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    const double t = lambdas[j];
    if (!(t > 0.0) || t >= 1.0)
      throw std::invalid_argument("sweep factors must lie in (0, 1)");
    Potential scaled = sigma.scaled(t);
    SweepReport::Row row;
    row.lambda_factor = t;
    row.effective_lambda = t * rep.base_lambda;
    try {
      // near-critical systems are too stiff for the iterative path; the
      // tridiagonal factorization is exact and cheap at any conditioning
      RawSolve raw = solve_raw(mesh, coeff, scaled, true);
      LevelSolve ls = finish_level(mesh, std::move(raw), ball);
      row.sup_u = ls.u.max_abs();
      row.min_u = ls.min_u;
      row.inner_energy = integrate_interval(mesh, rep.inner_lo, rep.inner_hi, [&](double r) {
        double s = ls.u.slope_at(r);
        return coeff(r) * s * s;
      });
      Field u2(ls.u.mesh, [&] {
        std::vector<double> sq(ls.u.values.size());
        for (std::size_t i = 0; i < sq.size(); ++i)
          sq[i] = ls.u.values[i] * ls.u.values[i];
        return sq;
      }());
      row.doubling =
          doubling_constant(u2, enumerate_balls(mesh, mesh.a(), mesh.b(), 4, opt.scan_target))
              .constant;
    } catch (const formlab::error&) {
      rep.coercivity_lost_at = static_cast<int>(j);
      rep.rows.push_back(row);
      break;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

namespace {

/// Nodal application of the Green operator: out_i = int G(x_i, y) f(y) dy for
/// the P1 interpolant of the nodal data f (plus point masses). Exact per
/// element (the integrand is piecewise quadratic; the kink of G sits on a
/// node by construction).
std::vector<double> green_apply(const Mesh& m, const std::vector<double>& fvals,
                                const std::vector<std::pair<double, double>>& atoms,
                                const Field* ufield) {
  const std::size_t n = m.node_count();
  const auto& x = m.nodes();
  auto G = [](double a, double b) { return a <= b ? a * (1.0 - b) : b * (1.0 - a); };

  // prefix sums make each row O(1) per element via the split
  //   int G(xi, y) f = (1-xi) int_{y<xi} y f + xi int_{y>xi} (1-y) f
  // with each piece exact for the quadratic y*f(y) via Simpson per element.
  std::vector<double> left(n, 0.0), right(n, 0.0);
  for (std::size_t e = 0; e < n - 1; ++e) {
    const double a = x[e], b = x[e + 1], h = b - a, mid = 0.5 * (a + b);
    const double fa = fvals[e], fb = fvals[e + 1], fm = 0.5 * (fa + fb);
    left[e + 1] = left[e] + h / 6.0 * (a * fa + 4.0 * mid * fm + b * fb);
  }
  for (std::size_t e = n - 1; e-- > 0;) {
    const double a = x[e], b = x[e + 1], h = b - a, mid = 0.5 * (a + b);
    const double fa = fvals[e], fb = fvals[e + 1], fm = 0.5 * (fa + fb);
    right[e] = right[e + 1] + h / 6.0 * ((1.0 - a) * fa + 4.0 * (1.0 - mid) * fm + (1.0 - b) * fb);
  }

  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 - x[i]) * left[i] + x[i] * right[i];
  for (const auto& [t, mass] : atoms) {
    const double ut = ufield ? ufield->eval(t) : 1.0;
    for (std::size_t i = 0; i < n; ++i) out[i] += mass * ut * G(std::min(x[i], t), std::max(x[i], t));
  }
  return out;
}

void split_gauge_potential(const Potential& sigma, const Mesh& m,
                           std::vector<double>& density,
                           std::vector<std::pair<double, double>>& atoms) {
  switch (sigma.kind()) {
    case Potential::Kind::pointwise:
      for (std::size_t i = 0; i < m.node_count(); ++i)
        density[i] += sigma.density(m.node(i));
      return;
    case Potential::Kind::atomic:
      for (const auto& a : sigma.atoms()) atoms.push_back(a);
      return;
    case Potential::Kind::sum:
      for (const auto& part : sigma.parts()) split_gauge_potential(part, m, density, atoms);
      return;
    default:
      throw std::invalid_argument("gauge potentials must be pointwise or atomic");
  }
}

}  // namespace

nlohmann::json GaugeReport::to_json() const {
  return {{"method", method},
          {"min_u", min_u},
          {"measured_lambda", measured_lambda},
          {"fixed_point_residual", fixed_point_residual},
          {"partial_sups", partial_sups},
          {"iterations", iterations},
          {"converged", converged}};
}

GaugeReport solve_gauge(const Potential& sigma, GaugeMethod method, int elements,
                        int max_iterations) {
  if (elements < 8) throw std::invalid_argument("too few elements");
  Mesh m = Mesh::uniform(0.0, 1.0, elements, Weight::flat());

  std::vector<double> density(m.node_count(), 0.0);
  std::vector<std::pair<double, double>> atoms;
  split_gauge_potential(sigma, m, density, atoms);
  for (const auto& [t, mass] : atoms) {
    (void)mass;
    if (t <= 0.0 || t >= 1.0) throw std::invalid_argument("atom outside the open interval");
  }

  GaugeReport rep;
  rep.method = method == GaugeMethod::fem ? "fem"
               : method == GaugeMethod::neumann_series ? "neumann_series"
                                                       : "fixed_point";

  FormMatrices fm = assemble(m, EllipticCoeff::unit(), sigma);
  rep.measured_lambda = estimate_upper_form_bound(fm).lambda;
  const bool subcritical = rep.measured_lambda < 1.0;

  auto series_step = [&](const Field& u) {
    // 1 + G(sigma u), with sigma u interpolated nodally for the density part
    std::vector<double> su(m.node_count());
    for (std::size_t i = 0; i < su.size(); ++i) su[i] = density[i] * u.values[i];
    std::vector<double> gu = green_apply(m, su, atoms, &u);
    for (double& g : gu) g += 1.0;
    return Field(m, std::move(gu));
  };

  if (method == GaugeMethod::fem) {
    if (!subcritical)
      throw formlab::error("gauge problem lost coercivity: measured form bound reaches 1");
    // tridiagonal factorization: exact kernel algebra for atomic data at nodes
    RawSolve raw = solve_raw(m, EllipticCoeff::unit(), sigma, true);
    rep.u = Field(m, std::move(raw.v));
    rep.iterations = raw.iterations;
    rep.converged = true;
  } else {
    Field u = Field::constant(m, 1.0);
    rep.partial_sups.push_back(u.max_abs());
    int k = 0;
    const int cap = subcritical ? max_iterations : 24;
    for (; k < cap; ++k) {
      Field next = series_step(u);
      double change = 0.0;
      for (std::size_t i = 0; i < next.values.size(); ++i)
        change = std::max(change, std::abs(next.values[i] - u.values[i]));
      u = std::move(next);
      rep.partial_sups.push_back(u.max_abs());
      if (!u.finite()) break;
      if (change < 1e-8) {
        rep.converged = true;
        break;
      }
    }
    rep.iterations = k + 1;
    rep.u = std::move(u);
    if (!subcritical) rep.converged = false;
  }

  rep.min_u = rep.u.min_value();
  if (rep.u.finite()) {
    Field once = series_step(rep.u);
    double res = 0.0;
    for (std::size_t i = 0; i < once.values.size(); ++i)
      res = std::max(res, std::abs(once.values[i] - rep.u.values[i]));
    rep.fixed_point_residual = res;
  } else {
    rep.fixed_point_residual = std::numeric_limits<double>::infinity();
  }
  return rep;
}

double check_gauge_condition(const Potential& sigma, double c, double x0, int elements) {
  if (!(x0 > 0.0) || !(x0 < 1.0)) throw std::invalid_argument("x0 must lie inside (0,1)");
  Mesh m = Mesh::uniform(0.0, 1.0, elements, Weight::flat());
  auto green = [x0](double x) {
    return x <= x0 ? x * (1.0 - x0) : x0 * (1.0 - x);
  };
  auto small = [&](double x) { return std::min(1.0, green(x)); };

  std::vector<std::pair<double, double>> atoms;
  auto collect_atoms = [&](auto&& self, const Potential& p) -> void {
    if (p.kind() == Potential::Kind::atomic) {
      for (const auto& a : p.atoms()) atoms.push_back(a);
    } else if (p.kind() == Potential::Kind::sum) {
      for (const auto& part : p.parts()) self(self, part);
    }
  };
  collect_atoms(collect_atoms, sigma);
  auto density_of = [&](double x) -> double {
    switch (sigma.kind()) {
      case Potential::Kind::pointwise:
        return sigma.density(x);
      case Potential::Kind::sum: {
        double s = 0.0;
        for (const auto& part : sigma.parts())
          if (part.kind() == Potential::Kind::pointwise) s += part.density(x);
        return s;
      }
      default:
        return 0.0;
    }
  };
  if (sigma.kind() == Potential::Kind::divergence)
    throw std::invalid_argument("gauge condition needs pointwise or atomic potentials");

  for (const auto& [t, mass] : atoms)
    if (mass < 0.0) throw std::invalid_argument("gauge condition needs sigma >= 0");
  for (std::size_t i = 0; i < m.node_count(); ++i)
    if (density_of(m.node(i)) < -1e-12)
      throw std::invalid_argument("gauge condition needs sigma >= 0");

  auto dsigma = [&](const std::function<double(double)>& f) {
    // Direct Gauss panels split at the kink of G. Zero density short-circuits
    // before f is evaluated, and overflow propagates as +infinity: the
    // functional legitimately diverges when sigma charges the boundary.
    static const double gx[3] = {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)};
    static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    double total = 0.0;
    for (std::size_t e = 0; e < m.element_count(); ++e) {
      double cuts[3] = {m.node(e), m.node(e + 1), m.node(e + 1)};
      int nseg = 1;
      if (x0 > cuts[0] && x0 < cuts[1]) {
        cuts[2] = cuts[1];
        cuts[1] = x0;
        nseg = 2;
      }
      for (int s = 0; s < nseg; ++s) {
        const double hw = 0.5 * (cuts[s + 1] - cuts[s]);
        const double mid = 0.5 * (cuts[s + 1] + cuts[s]);
        for (int q = 0; q < 3; ++q) {
          const double x = mid + hw * gx[q];
          const double d = density_of(x);
          if (d == 0.0) continue;
          total += hw * gw[q] * d * f(x);
        }
      }
      if (std::isinf(total)) return total;
    }
    for (const auto& [t, w] : atoms) {
      if (w == 0.0) continue;
      total += w * f(t);
      if (std::isinf(total)) return total;
    }
    if (!std::isfinite(total)) throw formlab::error("gauge condition integrand degenerated");
    return total;
  };

  const double j_mass = dsigma(small);
  return dsigma([&](double x) {
    double mx = small(x);
    if (mx <= 0.0)  // the kernel vanishes there; the limit of m e^{cJ/m} decides
      return c * j_mass > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return mx * std::exp(c * j_mass / mx);
  });
}

}  // namespace formlab
