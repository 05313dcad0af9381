#pragma once

#include <functional>
#include <optional>
#include <string>

#include "formlab/linalg.hpp"
#include "formlab/potential.hpp"

namespace formlab {

/// Scalar elliptic coefficient a(r) with ellipticity window [m, M].
struct EllipticCoeff {
  std::function<double(double)> a;
  double m = 1.0;
  double M = 1.0;
  std::string label = "unit";

  static EllipticCoeff unit();
  double operator()(double r) const { return a(r); }
};

/// Dirichlet-interior P1 matrices on a weighted mesh: the weighted stiffness
/// form K for coefficient a, the potential form S, and the flat (a == 1)
/// stiffness K0 used by multiplier norms.
struct FormMatrices {
  Mesh mesh;
  linalg::SymTridiag stiffness;       // int a phi_i' phi_j' w
  linalg::SymTridiag potential;       // <sigma, phi_i phi_j>
  linalg::SymTridiag flat_stiffness;  // int phi_i' phi_j' w
};

FormMatrices assemble(const Mesh& mesh, const EllipticCoeff& coeff,
                      const Potential& sigma, par::Exec ex = par::Exec::parallel);

/// Result of an extremal quotient computation <sigma, h^2> / int a|h'|^2 w.
struct FormBoundReport {
  double lambda = 0.0;          // the reported bound (see the estimators)
  double raw_eigenvalue = 0.0;  // signed extreme of the pencil S h = t K h
  Field extremal;               // K-normalized extremizer, zero-padded to the mesh
  std::size_t iterations = 0;
  double residual = 0.0;
  double mesh_h = 0.0;
  bool converged = false;

  nlohmann::json to_json() const;
};

/// lambda: the largest t with <sigma, h^2> <= t int a|h'|^2 w over the mesh's
/// P1 space. Coercivity of the pencil needs lambda < 1.
FormBoundReport estimate_upper_form_bound(const FormMatrices& fm);

/// Lambda: the smallest nonnegative t with <sigma, h^2> >= -t int a|h'|^2 w.
FormBoundReport estimate_lower_form_bound(const FormMatrices& fm);

/// Multiplier constant of the vector field Gamma = g(r) x/|x|: the least C1
/// with int g^2 h^2 w <= C1 int |h'|^2 w, reported in lambda. The divergence
/// potential div Gamma then carries the form bound 2 sqrt(C1).
FormBoundReport multiplier_norm(const std::function<double(double)>& g, const Mesh& mesh);

/// Hat-function residuals of the Riccati-type certificate identity
///   -div(a Gamma) - a|Gamma|^2 <= sigma  (Gamma = g x/|x|)
/// tested in the weak sense. All residuals should be >= -tol for a valid
/// certificate; equality cases sit at zero up to quadrature error.
struct CertificateReport {
  double min_residual = 0.0;  // most negative hat residual
  double max_abs_residual = 0.0;
  double scale = 1.0;  // max over hats of the term-magnitude sum
  bool holds = false;

  nlohmann::json to_json() const;
};

CertificateReport check_semibound_certificate(const std::function<double(double)>& g,
                                              const EllipticCoeff& coeff,
                                              const Potential& sigma, const Mesh& mesh,
                                              double tol = 1e-6);

/// Given a multiplier-norm budget C1 for Gamma, the divergence potential
/// div Gamma admits the form bound lambda = 2 sqrt(C1). Verifies that the
/// assembled bound for div Gamma does not exceed the implied one.
struct SufficiencyReport {
  double c1 = 0.0;
  double implied_lambda = 0.0;
  double measured_lambda = 0.0;
  bool consistent = false;

  nlohmann::json to_json() const;
};

SufficiencyReport verify_sufficiency_constant(const std::function<double(double)>& g,
                                              const Mesh& mesh);

}  // namespace formlab
