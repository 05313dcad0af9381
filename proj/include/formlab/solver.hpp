#pragma once

#include "formlab/diagnostics.hpp"

namespace formlab {

/// One Lax-Milgram level solve: (K - S) w = s with s_i = <sigma, phi_i>,
/// v = w + 1, u = v normalized to average-square 1 on the ball B.
struct LevelSolve {
  Field u;
  double measured_lambda = 0.0;      // upper form bound of sigma on this mesh
  double normalization_error = 0.0;  // |avg_B u^2 - 1|
  double min_u = 0.0;
  int linear_iterations = 0;
  bool used_direct_fallback = false;  // iterative solve stalled, LDL' finished it

  nlohmann::json to_json() const;
};

LevelSolve solve_level(const Mesh& mesh, const EllipticCoeff& coeff,
                       const Potential& sigma_pointwise, const Ball& ball);

/// Per-level mollifiers matching an exhaustion's radii.
std::vector<MollifierSpec> mollifier_family(const ExhaustionSpec& spec);

struct ExhaustionOptions {
  int elements_per_level = 1000;
  double grading_ratio = 1.0;  // > 1 grades toward the inner endpoint
  double drift_tolerance = 1e-4;
  double psi_fraction = 0.6;  // cutoff support as a fraction of the first level
  int scan_target = 48;
  Weight weight = Weight::flat();
};

struct ExhaustionSolveReport {
  struct Level {
    double a = 0.0, b = 0.0, eps = 0.0;
    double lambda = 0.0;
    double min_u = 0.0;
    double normalization_error = 0.0;
    double drift = 0.0;  // L2 distance to the previous level on its domain
    double caccioppoli = 0.0;
    double log_caccioppoli = 0.0;
    double doubling_u2 = 0.0;
  };
  std::vector<Level> levels;
  std::vector<Field> solutions;
  Field final_u;
  Ball ball;
  int converged_at = -1;       // first level whose drift met the tolerance
  bool drift_stalled = false;  // drift failed to decrease over 3 levels
  double final_weak_residual = 0.0;

  nlohmann::json to_json() const;
};

ExhaustionSolveReport solve_exhaustion(const ExhaustionSpec& spec,
                                       const EllipticCoeff& coeff, const Potential& sigma,
                                       const ExhaustionOptions& opt = {});

/// Nodal logarithm; requires min u > 0.
Field log_transform(const Field& u);

/// int_(lo,hi) (u'/u)^2 w, the gradient energy of log u.
double log_gradient_energy(const Field& u, double lo, double hi);

/// Weak residuals R_i = int a v' phi_i' w - int a v'^2 phi_i w - <sigma, phi_i>
/// of the gradient equation, element-midpoint rule for the quadratic term.
struct RiccatiReport {
  double max_abs_residual = 0.0;
  double scale = 1.0;
  double relative = 0.0;  // max_abs_residual / scale
  std::vector<double> profile;

  nlohmann::json to_json() const;
};

RiccatiReport riccati_residual(const Field& v, const EllipticCoeff& coeff,
                               const Potential& sigma, const Mesh& mesh);

/// Reconstructs sigma = -div(a v' x/|x|) - a v'^2 from a gradient-equation
/// solution and measures both form bounds; symmetric scalar case, so the
/// upper bound must come out <= 1 up to discretization.
struct RiccatiBounds {
  double lambda = 0.0;
  double lambda_tolerance = 0.0;  // 1 + 10 h admissibility threshold
  bool upper_within_tolerance = false;
  double Lambda = 0.0;
  double grad_multiplier = 0.0;  // multiplier constant of |v'|

  nlohmann::json to_json() const;
};

RiccatiBounds form_bounds_from_riccati(const Field& v, const EllipticCoeff& coeff,
                                       const Mesh& mesh);

struct SweepOptions {
  double inner_lo = 0.0, inner_hi = 0.0;  // fixed annulus for energies; defaults to
                                          // the inner tenth decade of the mesh
  int scan_target = 32;
};

/// Solves with potentials t*sigma for each factor t in lambdas, tracking how
/// the normalized solutions grow as the form bound approaches 1.
struct SweepReport {
  struct Row {
    double lambda_factor = 0.0;
    double effective_lambda = 0.0;
    double sup_u = 0.0;
    double min_u = 0.0;
    double inner_energy = 0.0;  // Dirichlet energy on the fixed annulus
    double doubling = 0.0;
  };
  std::vector<Row> rows;
  double base_lambda = 0.0;       // measured bound of sigma itself
  double reference_energy = 0.0;  // |S^(n-1)| ((n-2)/2)^2 log(hi/lo), 0 if flat
  int coercivity_lost_at = -1;    // index of the first factor that failed
  double inner_lo = 0.0, inner_hi = 0.0;

  nlohmann::json to_json() const;
};

SweepReport critical_sweep(const Potential& sigma, const EllipticCoeff& coeff,
                           const Mesh& mesh, const std::vector<double>& lambdas,
                           const SweepOptions& opt = {});

enum class GaugeMethod { fem, neumann_series, fixed_point };

/// Gauge problem on the unit interval: -u1'' = sigma u1, u1 = 1 on the
/// boundary, via the Green kernel G(x,y) = x(1-y) for x <= y. fixed_point and
/// neumann_series run the same iteration u <- 1 + G(sigma u); the two names
/// match the two classical readings of the series.
struct GaugeReport {
  std::string method;
  Field u;
  double min_u = 0.0;
  double measured_lambda = 0.0;
  double fixed_point_residual = 0.0;  // sup |u - 1 - G(sigma u)|
  std::vector<double> partial_sups;   // sup norms of the series iterates
  int iterations = 0;
  bool converged = false;  // false when the series diverges (lambda >= 1)

  nlohmann::json to_json() const;
};

GaugeReport solve_gauge(const Potential& sigma, GaugeMethod method, int elements = 1000,
                        int max_iterations = 10000);

/// Literal reading of the gauge finiteness functional
///   I = int m(x) exp(c (int m dsigma) / m(x)) dsigma(x),  m = min(1, G(., x0)):
/// the inner integral is a fixed mass J, and each point is weighted by
/// exp(c J / m(x)). The alternative grouping (J outside the exponent) is noted
/// in run metadata by the cli layer and never silently substituted. The value
/// may legitimately overflow to infinity when sigma charges the boundary.
double check_gauge_condition(const Potential& sigma, double c, double x0,
                             int elements = 2000);

}  // namespace formlab
