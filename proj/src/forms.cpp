#include "formlab/forms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace formlab {

EllipticCoeff EllipticCoeff::unit() {
  return {[](double) { return 1.0; }, 1.0, 1.0, "unit"};
}

namespace {

constexpr double kGx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kGw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

struct ElemLocal {
  double k = 0.0;    // int a w / h^2 over the element
  double k0 = 0.0;   // int w / h^2
  double sll = 0.0;  // <sigma, phi_l phi_l> restricted to the element
  double slr = 0.0;
  double srr = 0.0;
  bool coeff_ok = true;  // ellipticity window held at every quadrature point
};

struct Leaves {
  std::vector<const Potential*> pointwise;
  std::vector<const Potential*> divergence;
  std::vector<const Potential*> atomic;
};

void collect(const Potential& p, Leaves& out) {
  switch (p.kind()) {
    case Potential::Kind::pointwise:
      out.pointwise.push_back(&p);
      return;
    case Potential::Kind::divergence:
      out.divergence.push_back(&p);
      return;
    case Potential::Kind::atomic:
      out.atomic.push_back(&p);
      return;
    case Potential::Kind::sum:
      for (const auto& part : p.parts()) collect(part, out);
      return;
  }
}

}  // namespace

FormMatrices assemble(const Mesh& mesh, const EllipticCoeff& coeff,
                      const Potential& sigma, par::Exec ex) {
  if (!mesh.valid() || mesh.node_count() < 3)
    throw std::invalid_argument("assemble needs a mesh with interior nodes");
  if (!(coeff.m > 0.0) || coeff.M < coeff.m)
    throw std::invalid_argument("ellipticity window must satisfy 0 < m <= M");

  Leaves leaves;
  collect(sigma, leaves);

  const Weight& w = mesh.weight();
  const std::size_t ne = mesh.element_count();

  constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
  auto locals = par::map<ElemLocal>(ex, ne, [&](std::size_t e) -> ElemLocal {
    const double x0 = mesh.node(e), x1 = mesh.node(e + 1);
    const double h = x1 - x0, mid = 0.5 * (x0 + x1);
    ElemLocal loc;
    try {
    for (int q = 0; q < 3; ++q) {
      const double r = mid + 0.5 * h * kGx[q];
      const double wq = 0.5 * h * kGw[q] * w(r);
      const double a = coeff(r);
      if (!(a >= coeff.m * (1.0 - 1e-12)) || !(a <= coeff.M * (1.0 + 1e-12)))
        loc.coeff_ok = false;  // no throwing from inside the parallel region
      loc.k += wq * a / (h * h);
      loc.k0 += wq / (h * h);
      const double pl = (x1 - r) / h, pr = (r - x0) / h;
      double dens = 0.0;
      for (const Potential* p : leaves.pointwise) dens += p->density(r);
      loc.sll += wq * dens * pl * pl;
      loc.slr += wq * dens * pl * pr;
      loc.srr += wq * dens * pr * pr;
      // <div(g x/|x|), phi_i phi_j> = -int g (phi_i phi_j)' w
      double g = 0.0;
      for (const Potential* p : leaves.divergence) g += p->radial_component(r);
      if (g != 0.0) {
        loc.sll -= wq * g * 2.0 * pl * (-1.0 / h);
        loc.slr -= wq * g * (pl / h - pr / h);
        loc.srr -= wq * g * 2.0 * pr * (1.0 / h);
      }
    }
    } catch (...) {
      // exceptions must not cross the parallel region; surface as non-finite
      loc.k = loc.k0 = loc.sll = loc.slr = loc.srr = kNan;
    }
    return loc;
  });

  for (const ElemLocal& loc : locals)
    if (!loc.coeff_ok)
      throw std::invalid_argument("coefficient leaves its ellipticity window");

  const std::size_t ni = mesh.node_count() - 2;
  linalg::SymTridiag K(ni), K0(ni), S(ni);
  for (std::size_t e = 0; e < ne; ++e) {
    const ElemLocal& loc = locals[e];
    // element e couples nodes e and e+1; interior node i sits at row i-1
    if (e >= 1) {  // left node interior
      K.diag[e - 1] += loc.k;
      K0.diag[e - 1] += loc.k0;
      S.diag[e - 1] += loc.sll;
    }
    if (e + 1 <= ni) {  // right node interior
      K.diag[e] += loc.k;
      K0.diag[e] += loc.k0;
      S.diag[e] += loc.srr;
    }
    if (e >= 1 && e + 1 <= ni) {
      K.off[e - 1] += -loc.k;
      K0.off[e - 1] += -loc.k0;
      S.off[e - 1] += loc.slr;
    }
  }

  for (const Potential* p : leaves.atomic) {
    for (const auto& [t, mass] : p->atoms()) {
      if (t < mesh.a() || t > mesh.b())
        throw std::invalid_argument("atom outside the mesh extent");
      const std::size_t e = mesh.element_of(t);
      const double x0 = mesh.node(e), x1 = mesh.node(e + 1);
      const double pl = (x1 - t) / (x1 - x0), pr = (t - x0) / (x1 - x0);
      const double wt = mass * w(t);
      if (e >= 1) S.diag[e - 1] += wt * pl * pl;
      if (e + 1 <= ni) S.diag[e] += wt * pr * pr;
      if (e >= 1 && e + 1 <= ni) S.off[e - 1] += wt * pl * pr;
    }
  }

  if (!K.finite() || !S.finite() || !K0.finite())
    throw formlab::error("assembly produced non-finite matrix entries");
  return {mesh, std::move(K), std::move(S), std::move(K0)};
}

nlohmann::json FormBoundReport::to_json() const {
  return {{"lambda", lambda},         {"raw_eigenvalue", raw_eigenvalue},
          {"iterations", iterations}, {"residual", residual},
          {"mesh_h", mesh_h},         {"converged", converged}};
}

namespace {

FormBoundReport bound_report(const Mesh& mesh, const linalg::SymTridiag& s,
                             const linalg::SymTridiag& k, bool want_max) {
  auto pr = linalg::pencil_extreme(s, k, want_max);
  if (!pr.converged) throw formlab::error("form-bound power iteration did not converge");
  FormBoundReport rep;
  rep.raw_eigenvalue = pr.value;
  rep.iterations = static_cast<std::size_t>(pr.iterations);
  rep.residual = pr.residual;
  rep.mesh_h = mesh.max_h();
  rep.converged = pr.converged;
  std::vector<double> padded(mesh.node_count(), 0.0);
  std::copy(pr.vector.begin(), pr.vector.end(), padded.begin() + 1);
  rep.extremal = Field(mesh, std::move(padded));
  return rep;
}

}  // namespace

FormBoundReport estimate_upper_form_bound(const FormMatrices& fm) {
  FormBoundReport rep = bound_report(fm.mesh, fm.potential, fm.stiffness, true);
  rep.lambda = std::max(rep.raw_eigenvalue, 0.0);
  return rep;
}

FormBoundReport estimate_lower_form_bound(const FormMatrices& fm) {
  FormBoundReport rep = bound_report(fm.mesh, fm.potential, fm.stiffness, false);
  rep.lambda = std::max(-rep.raw_eigenvalue, 0.0);
  return rep;
}

FormBoundReport multiplier_norm(const std::function<double(double)>& g, const Mesh& mesh) {
  Potential g2 = Potential::pointwise([g](double r) { return g(r) * g(r); }, "|Gamma|^2");
  FormMatrices fm = assemble(mesh, EllipticCoeff::unit(), g2);
  FormBoundReport rep = bound_report(mesh, fm.potential, fm.flat_stiffness, true);
  rep.lambda = std::max(rep.raw_eigenvalue, 0.0);
  return rep;
}

nlohmann::json CertificateReport::to_json() const {
  return {{"min_residual", min_residual},
          {"max_abs_residual", max_abs_residual},
          {"scale", scale},
          {"holds", holds}};
}

CertificateReport check_semibound_certificate(const std::function<double(double)>& g,
                                              const EllipticCoeff& coeff,
                                              const Potential& sigma, const Mesh& mesh,
                                              double tol) {
  // Weak residual of sigma <= div(a Gamma) - a |Gamma|^2 against each
  // interior hat: R_i = -int a g phi_i' w - int a g^2 phi_i w - <sigma, phi_i>.
  // Equality certificates sit at zero up to quadrature error.
  const auto& x = mesh.nodes();
  const std::size_t ni = mesh.node_count() - 2;
  if (ni == 0) throw std::invalid_argument("mesh has no interior nodes");

  std::vector<double> sig = pair_with_hats(sigma, mesh);

  struct Row {
    double residual, magnitude;
  };
  auto rows = par::map<Row>(par::Exec::parallel, ni, [&](std::size_t kdx) -> Row {
    try {
      const std::size_t i = kdx + 1;
      const double xl = x[i - 1], xc = x[i], xr = x[i + 1];
      auto hat = [&](double r) {
        return r <= xc ? (r - xl) / (xc - xl) : (xr - r) / (xr - xc);
      };
      auto hat_slope = [&](double r) {
        return r <= xc ? 1.0 / (xc - xl) : -1.0 / (xr - xc);
      };
      auto t1f = [&](double r) { return -coeff(r) * g(r) * hat_slope(r); };
      auto t2f = [&](double r) { return -coeff(r) * g(r) * g(r) * hat(r); };
      const double t1 =
          integrate_interval(mesh, xl, xc, t1f) + integrate_interval(mesh, xc, xr, t1f);
      const double t2 =
          integrate_interval(mesh, xl, xc, t2f) + integrate_interval(mesh, xc, xr, t2f);
      const double t3 = -sig[kdx];
      return Row{t1 + t2 + t3, std::abs(t1) + std::abs(t2) + std::abs(t3)};
    } catch (...) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return Row{nan, nan};
    }
  });
  for (const Row& r : rows)
    if (!std::isfinite(r.residual)) throw formlab::error("non-finite certificate residual");

  CertificateReport rep;
  rep.min_residual = rows[0].residual;
  rep.max_abs_residual = 0.0;
  rep.scale = 0.0;
  for (const Row& r : rows) {
    rep.min_residual = std::min(rep.min_residual, r.residual);
    rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(r.residual));
    rep.scale = std::max(rep.scale, r.magnitude);
  }
  if (rep.scale <= 0.0) rep.scale = 1.0;
  rep.holds = rep.min_residual >= -tol * rep.scale;
  return rep;
}

nlohmann::json SufficiencyReport::to_json() const {
  return {{"c1", c1},
          {"implied_lambda", implied_lambda},
          {"measured_lambda", measured_lambda},
          {"consistent", consistent}};
}

SufficiencyReport verify_sufficiency_constant(const std::function<double(double)>& g,
                                              const Mesh& mesh) {
  SufficiencyReport rep;
  rep.c1 = multiplier_norm(g, mesh).lambda;
  rep.implied_lambda = 2.0 * std::sqrt(rep.c1);
  Potential divg = Potential::divergence(g, "div Gamma");
  FormMatrices fm = assemble(mesh, EllipticCoeff::unit(), divg);
  rep.measured_lambda = estimate_upper_form_bound(fm).lambda;
  rep.consistent = rep.measured_lambda <= rep.implied_lambda + 1e-3;
  return rep;
}

}  // namespace formlab
