#include "formlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace formlab::linalg {

void SymTridiag::matvec(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = size();
  if (x.size() != n || y.size() != n) throw std::invalid_argument("matvec: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    double v = diag[i] * x[i];
    if (i > 0) v += off[i - 1] * x[i - 1];
    if (i + 1 < n) v += off[i] * x[i + 1];
    y[i] = v;
  }
}

double SymTridiag::quad_form(std::span<const double> x) const {
  const std::size_t n = size();
  if (x.size() != n) throw std::invalid_argument("quad_form: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += diag[i] * x[i] * x[i];
  for (std::size_t i = 0; i + 1 < n; ++i) s += 2.0 * off[i] * x[i] * x[i + 1];
  return s;
}

double SymTridiag::bilinear(std::span<const double> x, std::span<const double> y) const {
  const std::size_t n = size();
  if (x.size() != n || y.size() != n) throw std::invalid_argument("bilinear: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += diag[i] * x[i] * y[i];
  for (std::size_t i = 0; i + 1 < n; ++i) s += off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
  return s;
}

bool SymTridiag::finite() const {
  for (double v : diag)
    if (!std::isfinite(v)) return false;
  for (double v : off)
    if (!std::isfinite(v)) return false;
  return true;
}

SymTridiag subtract(const SymTridiag& a, const SymTridiag& b) {
  if (a.size() != b.size()) throw std::invalid_argument("subtract: size mismatch");
  SymTridiag r(a.size());
  for (std::size_t i = 0; i < a.diag.size(); ++i) r.diag[i] = a.diag[i] - b.diag[i];
  for (std::size_t i = 0; i < a.off.size(); ++i) r.off[i] = a.off[i] - b.off[i];
  return r;
}

TridiagLdlt TridiagLdlt::factor(const SymTridiag& a) {
  const std::size_t n = a.size();
  TridiagLdlt f;
  f.d_.resize(n);
  f.l_.resize(n > 0 ? n - 1 : 0);
  double prev_d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = a.diag[i];
    if (i > 0) d -= f.l_[i - 1] * f.l_[i - 1] * prev_d;
    if (!(d > 0.0) || !std::isfinite(d)) throw error("tridiagonal factorization: matrix not positive definite");
    if (i + 1 < n) f.l_[i] = a.off[i] / d;
    f.d_[i] = d;
    prev_d = d;
  }
  return f;
}

void TridiagLdlt::solve(std::span<const double> b, std::span<double> x) const {
  const std::size_t n = d_.size();
  if (b.size() != n || x.size() != n) throw std::invalid_argument("solve: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    if (i > 0) v -= l_[i - 1] * x[i - 1];
    x[i] = v;
  }
  for (std::size_t i = 0; i < n; ++i) x[i] /= d_[i];
  for (std::size_t i = n; i-- > 1;) x[i - 1] -= l_[i - 1] * x[i];
}

CgResult pcg(const SymTridiag& a, std::span<const double> b, std::span<double> x,
             double tol, int max_iterations) {
  const std::size_t n = a.size();
  if (b.size() != n || x.size() != n) throw std::invalid_argument("pcg: size mismatch");
  if (max_iterations <= 0) max_iterations = static_cast<int>(40 * n + 100);

  double bnorm = 0.0;
  for (double v : b) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  std::fill(x.begin(), x.end(), 0.0);
  if (bnorm == 0.0) return {true, 0, 0.0};

  std::vector<double> r(b.begin(), b.end()), z(n), p(n), ap(n);
  auto precond = [&](const std::vector<double>& rr, std::vector<double>& zz) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = a.diag[i];
      zz[i] = (d != 0.0) ? rr[i] / d : rr[i];
    }
  };
  precond(r, z);
  p = z;
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

  CgResult res;
  double rnorm = bnorm;
  for (int it = 0; it < max_iterations; ++it) {
    a.matvec(p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (!(pap > 0.0) || !std::isfinite(pap)) {
      res.iterations = it;
      res.relative_residual = rnorm / bnorm;
      return res;  // breakdown: matrix not SPD along this direction
    }
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    rnorm = 0.0;
    for (double v : r) rnorm += v * v;
    rnorm = std::sqrt(rnorm);
    res.iterations = it + 1;
    if (rnorm <= tol * bnorm) {
      res.converged = true;
      break;
    }
    precond(r, z);
    double rz_next = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz_next += r[i] * z[i];
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  res.relative_residual = rnorm / bnorm;
  return res;
}

namespace {

/// Number of pencil eigenvalues of (S, K) strictly below t: the count of
/// negative pivots in the LDL' recursion for S - tK, with the classical
/// Sturm safeguard replacing near-zero pivots.
int inertia_below(const SymTridiag& s, const SymTridiag& k, double t) {
  const std::size_t n = s.size();
  double bmax = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double b = s.off[i] - t * k.off[i];
    bmax = std::max(bmax, b * b);
  }
  const double pivmin = 2.3e-308 * bmax;

  int count = 0;
  double d = s.diag[0] - t * k.diag[0];
  if (std::abs(d) < pivmin) d = -pivmin;
  if (d < 0.0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    const double b = s.off[i - 1] - t * k.off[i - 1];
    d = (s.diag[i] - t * k.diag[i]) - b * (b / d);
    if (std::abs(d) < pivmin) d = -pivmin;
    if (d < 0.0) ++count;
  }
  return count;
}

}  // namespace

PencilResult pencil_extreme(const SymTridiag& s, const SymTridiag& k, bool want_max,
                            double tol, int max_iterations) {
  if (s.size() != k.size()) throw std::invalid_argument("pencil_extreme: size mismatch");
  if (s.size() == 0) throw std::invalid_argument("pencil_extreme: empty system");
  if (!s.finite() || !k.finite()) throw error("pencil_extreme: non-finite matrix entries");
  const std::size_t n = s.size();
  const int nn = static_cast<int>(n);

  // Bracket the whole spectrum, growing outward from the Rayleigh quotient of
  // the all-ones vector.
  std::vector<double> ones(n, 1.0);
  const double kq = k.quad_form(ones);
  if (!(kq > 0.0)) throw error("pencil_extreme: K is not positive definite");
  const double rq0 = s.quad_form(ones) / kq;

  double lo = rq0, hi = rq0, step = 1.0 + std::abs(rq0);
  int iterations = 0;
  while (inertia_below(s, k, lo) > 0) {
    lo -= step;
    step *= 2.0;
    if (++iterations > 200) throw error("pencil_extreme: bracketing failed below");
  }
  step = 1.0 + std::abs(rq0);
  while (inertia_below(s, k, hi) < nn) {
    hi += step;
    step *= 2.0;
    if (++iterations > 400) throw error("pencil_extreme: bracketing failed above");
  }

  // Bisection on the requested end: deterministic, immune to clustering at
  // the opposite end of the spectrum.
  double a = lo, b = hi;
  while (true) {
    const double width = b - a;
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    if (width <= 1e-14 * scale || iterations >= std::max(200, max_iterations)) break;
    const double mid = 0.5 * (a + b);
    const int below = inertia_below(s, k, mid);
    ++iterations;
    if (want_max) {
      if (below >= nn)
        b = mid;
      else
        a = mid;
    } else {
      if (below == 0)
        a = mid;
      else
        b = mid;
    }
  }
  const double value = 0.5 * (a + b);

  // Extremal vector by inverse iteration shifted just outside the spectrum;
  // the shifted matrix is definite there, so the factorization is safe.
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  double delta = std::max(4.0 * (b - a), 1e-13 * scale);
  std::vector<double> x(n, 1.0), kx(n), y(n);
  const auto k_norm = [&](const std::vector<double>& v) {
    const double q = k.quad_form(v);
    return q > 0.0 ? std::sqrt(q) : 0.0;
  };
  for (auto& v : x) v /= k_norm(ones);

  for (int attempt = 0; attempt < 60; ++attempt) {
    const double mu = want_max ? value + delta : value - delta;
    SymTridiag shifted(n);
    for (std::size_t i = 0; i < n; ++i)
      shifted.diag[i] = want_max ? mu * k.diag[i] - s.diag[i] : s.diag[i] - mu * k.diag[i];
    for (std::size_t i = 0; i + 1 < n; ++i)
      shifted.off[i] = want_max ? mu * k.off[i] - s.off[i] : s.off[i] - mu * k.off[i];
    try {
      const TridiagLdlt f = TridiagLdlt::factor(shifted);
      double rq = s.quad_form(x) / k.quad_form(x);
      for (int it = 0; it < 50; ++it) {
        k.matvec(x, kx);
        f.solve(kx, y);
        const double ny = k_norm(y);
        ++iterations;
        if (!(ny > 1e-300)) break;
        for (auto& v : y) v /= ny;
        x.swap(y);
        const double rq_next = s.quad_form(x) / k.quad_form(x);
        const bool settled = std::abs(rq_next - rq) <= tol * std::max(1.0, std::abs(rq_next));
        rq = rq_next;
        if (settled) break;
      }
      break;
    } catch (const error&) {
      delta *= 8.0;  // shift landed inside the spectrum; back further out
    }
  }

  PencilResult out;
  out.value = value;
  out.vector = x;
  out.iterations = iterations;
  out.converged = true;

  std::vector<double> sx(n), kx2(n);
  s.matvec(out.vector, sx);
  k.matvec(out.vector, kx2);
  double rnum = 0.0, rden = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = sx[i] - out.value * kx2[i];
    rnum += d * d;
    rden += kx2[i] * kx2[i];
  }
  out.residual = rden > 0.0 ? std::sqrt(rnum / rden) : 0.0;
  return out;
}

namespace {

struct Dense {
  std::size_t n = 0;
  std::vector<double> a;  // row-major
  double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

Dense densify(const SymTridiag& t) {
  Dense d;
  d.n = t.size();
  d.a.assign(d.n * d.n, 0.0);
  for (std::size_t i = 0; i < d.n; ++i) d.at(i, i) = t.diag[i];
  for (std::size_t i = 0; i + 1 < d.n; ++i) {
    d.at(i, i + 1) = t.off[i];
    d.at(i + 1, i) = t.off[i];
  }
  return d;
}

// In-place lower Cholesky.
void cholesky(Dense& m) {
  const std::size_t n = m.n;
  for (std::size_t j = 0; j < n; ++j) {
    double d = m.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= m.at(j, k) * m.at(j, k);
    if (!(d > 0.0)) throw error("dense Cholesky: matrix not positive definite");
    d = std::sqrt(d);
    m.at(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = m.at(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= m.at(i, k) * m.at(j, k);
      m.at(i, j) = v / d;
    }
    for (std::size_t i = 0; i < j; ++i) m.at(i, j) = 0.0;
  }
}

void forward_solve(const Dense& l, std::span<double> x) {
  for (std::size_t i = 0; i < l.n; ++i) {
    double v = x[i];
    for (std::size_t k = 0; k < i; ++k) v -= l.at(i, k) * x[k];
    x[i] = v / l.at(i, i);
  }
}

void backward_solve_t(const Dense& l, std::span<double> x) {  // solves L' x = b
  for (std::size_t i = l.n; i-- > 0;) {
    double v = x[i];
    for (std::size_t k = i + 1; k < l.n; ++k) v -= l.at(k, i) * x[k];
    x[i] = v / l.at(i, i);
  }
}

// Cyclic Jacobi eigensolver for a dense symmetric matrix; returns eigenvalues
// in `vals` and accumulates rotations into `vecs` (columns are eigenvectors).
void jacobi_eigen(Dense& m, std::vector<double>& vals, Dense& vecs) {
  const std::size_t n = m.n;
  vecs.n = n;
  vecs.a.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vecs.at(i, i) = 1.0;

  double norm = 0.0;
  for (double v : m.a) norm += v * v;
  norm = std::sqrt(norm);
  const double stop = std::max(1e-300, 1e-14 * norm);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * m.at(i, j) * m.at(i, j);
    if (std::sqrt(off) <= stop) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0.0) continue;
        const double app = m.at(p, p), aqq = m.at(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double mip = m.at(i, p), miq = m.at(i, q);
          m.at(i, p) = c * mip - s * miq;
          m.at(i, q) = s * mip + c * miq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double mpi = m.at(p, i), mqi = m.at(q, i);
          m.at(p, i) = c * mpi - s * mqi;
          m.at(q, i) = s * mpi + c * mqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = vecs.at(i, p), viq = vecs.at(i, q);
          vecs.at(i, p) = c * vip - s * viq;
          vecs.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  vals.resize(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = m.at(i, i);
}

}  // namespace

DensePencil dense_pencil_extremes(const SymTridiag& s, const SymTridiag& k) {
  if (s.size() != k.size()) throw std::invalid_argument("dense_pencil_extremes: size mismatch");
  const std::size_t n = s.size();
  if (n == 0) throw std::invalid_argument("dense_pencil_extremes: empty system");

  Dense l = densify(k);
  cholesky(l);

  // C = L^{-1} S L^{-T}
  Dense c = densify(s);
  for (std::size_t col = 0; col < n; ++col) {  // L^{-1} applied to each column
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = c.at(i, col);
    forward_solve(l, v);
    for (std::size_t i = 0; i < n; ++i) c.at(i, col) = v[i];
  }
  for (std::size_t row = 0; row < n; ++row) {  // ... and to each row
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = c.at(row, j);
    forward_solve(l, v);
    for (std::size_t j = 0; j < n; ++j) c.at(row, j) = v[j];
  }

  std::vector<double> vals;
  Dense vecs;
  jacobi_eigen(c, vals, vecs);

  std::size_t imin = 0, imax = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (vals[i] < vals[imin]) imin = i;
    if (vals[i] > vals[imax]) imax = i;
  }

  auto back_map = [&](std::size_t idx) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = vecs.at(i, idx);
    backward_solve_t(l, y);  // x = L^{-T} y
    return y;
  };

  DensePencil out;
  out.min_value = vals[imin];
  out.max_value = vals[imax];
  out.min_vector = back_map(imin);
  out.max_vector = back_map(imax);
  return out;
}

std::vector<double> dense_solve_spd(const SymTridiag& a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dense_solve_spd: size mismatch");
  Dense l = densify(a);
  cholesky(l);
  std::vector<double> x(b.begin(), b.end());
  forward_solve(l, x);
  backward_solve_t(l, x);
  return x;
}

}  // namespace formlab::linalg
