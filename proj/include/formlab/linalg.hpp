#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "formlab/common.hpp"

namespace formlab::linalg {

/// Symmetric tridiagonal matrix: diag[i] on the diagonal, off[i] couples i and i+1.
struct SymTridiag {
  std::vector<double> diag;
  std::vector<double> off;

  SymTridiag() = default;
  explicit SymTridiag(std::size_t n) : diag(n, 0.0), off(n > 0 ? n - 1 : 0, 0.0) {}

  std::size_t size() const { return diag.size(); }
  void matvec(std::span<const double> x, std::span<double> y) const;
  double quad_form(std::span<const double> x) const;  // x'Ax
  double bilinear(std::span<const double> x, std::span<const double> y) const;
  bool finite() const;
};

SymTridiag subtract(const SymTridiag& a, const SymTridiag& b);  // a - b

/// LDL' factorization of a symmetric positive definite tridiagonal matrix.
class TridiagLdlt {
 public:
  static TridiagLdlt factor(const SymTridiag& a);  // throws formlab::error if not SPD
  void solve(std::span<const double> b, std::span<double> x) const;
  std::size_t size() const { return d_.size(); }

 private:
  std::vector<double> d_, l_;
};

struct CgResult {
  bool converged = false;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients on an SPD matrix,
/// relative-residual stopping. max_iterations <= 0 picks 40n + 100.
CgResult pcg(const SymTridiag& a, std::span<const double> b, std::span<double> x,
             double tol = 1e-10, int max_iterations = 0);

struct PencilResult {
  double value = 0.0;
  std::vector<double> vector;
  int iterations = 0;
  double residual = 0.0;  // ||S x - value K x||_2 / ||K x||_2
  bool converged = false;
};

/// Extreme (largest or smallest) eigenvalue of the pencil S h = lambda K h,
/// K SPD, located by Sturm-sequence bisection on the inertia of S - tK, with
/// the extremal vector recovered by shifted inverse iteration. Deterministic
/// and insensitive to clustering at the opposite end of the spectrum.
PencilResult pencil_extreme(const SymTridiag& s, const SymTridiag& k, bool want_max,
                            double tol = 1e-8, int max_iterations = 10000);

struct DensePencil {
  double min_value = 0.0, max_value = 0.0;
  std::vector<double> min_vector, max_vector;
};

/// Dense reduction (Cholesky of K + cyclic Jacobi rotations). Oracle path for
/// small systems; independent of the power-iteration route.
DensePencil dense_pencil_extremes(const SymTridiag& s, const SymTridiag& k);

/// Dense Cholesky solve. Oracle path for small systems.
std::vector<double> dense_solve_spd(const SymTridiag& a, std::span<const double> b);

}  // namespace formlab::linalg
