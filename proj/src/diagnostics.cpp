#include "formlab/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace formlab {

namespace {

void require_same_mesh(const Field& u, const Field& psi) {
  if (!u.mesh.valid() || !psi.mesh.valid() || !u.mesh.same_nodes(psi.mesh))
    throw std::invalid_argument("fields must share one mesh");
}

void require_cutoff(const Field& psi) {
  double scale = std::max(psi.max_abs(), 1.0);
  if (std::abs(psi.values.front()) > 1e-12 * scale ||
      std::abs(psi.values.back()) > 1e-12 * scale)
    throw std::invalid_argument("cutoff must vanish at the boundary");
}

}  // namespace

double caccioppoli_ratio(const Field& u, const Field& psi, const EllipticCoeff& coeff) {
  require_same_mesh(u, psi);
  require_cutoff(psi);
  if (!(coeff.m > 0.0) || coeff.M < coeff.m)
    throw std::invalid_argument("ellipticity window must satisfy 0 < m <= M");
  const Mesh& m = u.mesh;
  double den = integrate(m, [&](double r) {
    double s = psi.slope_at(r), v = u.eval(r);
    return v * v * s * s;
  });
  if (den <= 0.0) throw std::invalid_argument("cutoff has no gradient mass");
  double num = integrate(m, [&](double r) {
    double s = u.slope_at(r), p = psi.eval(r);
    return s * s * p * p;
  });
  return num / den;
}

double log_caccioppoli_ratio(const Field& u, const Field& psi) {
  require_same_mesh(u, psi);
  require_cutoff(psi);
  const Mesh& m = u.mesh;
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    bool active = psi.values[e] != 0.0 || psi.values[e + 1] != 0.0;
    if (active && (u.values[e] <= 0.0 || u.values[e + 1] <= 0.0))
      throw std::invalid_argument("u must be positive on the support of the cutoff");
  }
  double den = integrate(m, [&](double r) {
    double s = psi.slope_at(r);
    return s * s;
  });
  if (den <= 0.0) throw std::invalid_argument("cutoff has no gradient mass");
  double num = integrate(m, [&](double r) {
    double p = psi.eval(r);
    if (p == 0.0) return 0.0;
    double v = u.eval(r);
    double s = u.slope_at(r);
    return (s * s) / (v * v) * p * p;
  });
  return num / den;
}

double ball_average(const Mesh& m, double lo, double hi,
                    const std::function<double(double)>& f) {
  double mass = integrate_interval(m, lo, hi, [](double) { return 1.0; });
  if (!(mass > 0.0)) throw formlab::error("ball carries no measure");
  return integrate_interval(m, lo, hi, f) / mass;
}

double wrh_ball_value(const Field& w, double q, const Ball& b) {
  const Mesh& m = w.mesh;
  double num = ball_average(m, b.lo(), b.hi(),
                            [&](double r) { return std::pow(w.eval(r), q); });
  double den = ball_average(m, b.center - 2.0 * b.radius, b.center + 2.0 * b.radius,
                            [&](double r) { return w.eval(r); });
  if (!(den > 0.0)) throw formlab::error("weight has no mass on the doubled ball");
  return std::pow(num, 1.0 / q) / den;
}

double bmo_ball_value(const Field& f, const Ball& b) {
  const Mesh& m = f.mesh;
  double mean = ball_average(m, b.lo(), b.hi(), [&](double r) { return f.eval(r); });
  return ball_average(m, b.lo(), b.hi(), [&](double r) {
    double d = f.eval(r) - mean;
    return d * d;
  });
}

double doubling_ball_value(const Field& w, const Ball& b) {
  const Mesh& m = w.mesh;
  double inner = ball_average(m, b.lo(), b.hi(), [&](double r) { return w.eval(r); });
  double outer = ball_average(m, b.center - 2.0 * b.radius, b.center + 2.0 * b.radius,
                              [&](double r) { return w.eval(r); });
  if (!(inner > 0.0)) throw formlab::error("weight has no mass on the inner ball");
  return outer / inner;
}

nlohmann::json ScanStat::to_json() const {
  return {{"constant", constant},
          {"witness",
           {{"center", witness.ball.center},
            {"radius", witness.ball.radius},
            {"value", witness.value}}}};
}

namespace {

template <typename BallFn>
ScanStat scan_max(const BallScan& scan, BallFn&& value_of) {
  if (scan.balls.empty()) throw std::invalid_argument("empty ball scan");
  auto vals = par::map<double>(par::Exec::parallel, scan.balls.size(),
                               [&](std::size_t i) -> double {
                                 try {
                                   return value_of(scan.balls[i]);
                                 } catch (...) {
                                   return std::numeric_limits<double>::quiet_NaN();
                                 }
                               });
  for (double v : vals)
    if (!std::isfinite(v)) throw formlab::error("non-finite ball statistic");
  std::size_t best = par::argmax(vals);
  ScanStat s;
  s.constant = vals[best];
  s.witness = {scan.balls[best], vals[best]};
  return s;
}

void require_weight(const Field& w) {
  if (!w.finite()) throw std::invalid_argument("weight field must be finite");
  if (w.min_value() < 0.0) throw std::invalid_argument("weight field must be nonnegative");
  if (w.max_abs() == 0.0) throw std::invalid_argument("weight field vanishes identically");
}

}  // namespace

ScanStat wrh_constant(const Field& w, double q, const BallScan& scan) {
  require_weight(w);
  if (!(q > 1.0)) throw std::invalid_argument("reverse Holder exponent must exceed 1");
  if (scan.enlargement < 2) throw std::invalid_argument("scan must keep 2B inside U");
  return scan_max(scan, [&](const Ball& b) { return wrh_ball_value(w, q, b); });
}

ScanStat bmo_constant(const Field& f, const BallScan& scan) {
  if (!f.finite()) throw std::invalid_argument("field must be finite");
  if (scan.enlargement < 2) throw std::invalid_argument("scan must keep 2B inside U");
  return scan_max(scan, [&](const Ball& b) { return bmo_ball_value(f, b); });
}

ScanStat doubling_constant(const Field& w, const BallScan& scan) {
  require_weight(w);
  if (scan.enlargement < 4) throw std::invalid_argument("scan must keep 4B inside U");
  ScanStat s = scan_max(scan, [&](const Ball& b) { return doubling_ball_value(w, b); });
  s.constant = std::max(s.constant, 1.0);
  return s;
}

nlohmann::json PipelineReport::to_json() const {
  return {{"lo", lo},   {"hi", hi},   {"q", q},
          {"wrh", wrh.to_json()},     {"bmo", bmo.to_json()},
          {"doubling", doubling.to_json()}};
}

PipelineReport wrh_bmo_implies_doubling_check(const Field& w, double lo, double hi,
                                              double q, int scan_target) {
  require_weight(w);
  const Mesh& m = w.mesh;
  BallScan scan2 = enumerate_balls(m, lo, hi, 2, scan_target);
  BallScan scan4 = enumerate_balls(m, lo, hi, 4, scan_target);

  PipelineReport rep;
  rep.lo = lo;
  rep.hi = hi;
  rep.q = q;
  rep.wrh = wrh_constant(w, q, scan2);

  std::vector<double> logs(w.values.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (!(w.values[i] > 0.0))
      throw std::invalid_argument("weight must be positive for the BMO leg");
    logs[i] = std::log(w.values[i]);
  }
  rep.bmo = bmo_constant(Field(m, std::move(logs)), scan2);
  rep.doubling = doubling_constant(w, scan4);
  return rep;
}

double pointwise_residual_3d(const Scalar3Fn& u, const Matrix3Fn& a,
                             const Scalar3Fn& sigma, std::span<const Point3> samples,
                             double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (samples.empty()) throw std::invalid_argument("no sample points");

  auto grad = [&](const Point3& y) {
    Point3 g;
    for (int j = 0; j < 3; ++j) {
      Point3 p = y, q = y;
      p[j] += step;
      q[j] -= step;
      g[j] = (u(p) - u(q)) / (2.0 * step);
    }
    return g;
  };
  auto flux = [&](const Point3& y) {
    Point3 g = grad(y);
    auto mat = a(y);
    Point3 f;
    for (int i = 0; i < 3; ++i)
      f[i] = mat[3 * i] * g[0] + mat[3 * i + 1] * g[1] + mat[3 * i + 2] * g[2];
    return f;
  };

  auto residuals =
      par::map<double>(par::Exec::parallel, samples.size(), [&](std::size_t k) -> double {
        try {
          const Point3& y = samples[k];
          double div = 0.0;
          for (int i = 0; i < 3; ++i) {
            Point3 p = y, q = y;
            p[i] += step;
            q[i] -= step;
            div += (flux(p)[i] - flux(q)[i]) / (2.0 * step);
          }
          return std::abs(-div - sigma(y) * u(y));
        } catch (...) {
          return std::numeric_limits<double>::quiet_NaN();
        }
      });
  for (double r : residuals)
    if (!std::isfinite(r)) throw formlab::error("residual stencil left the evaluable region");
  return residuals[par::argmax(residuals)];
}

Field tent(const Mesh& m, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("tent needs lo < hi");
  const double mid = 0.5 * (lo + hi);
  return Field::sample(m, [=](double r) {
    if (r <= lo || r >= hi) return 0.0;
    return r <= mid ? (r - lo) / (mid - lo) : (hi - r) / (hi - mid);
  });
}

std::vector<Point3> unit_ball_samples(std::size_t count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Point3> pts;
  pts.reserve(count);
  while (pts.size() < count) {
    Point3 p{dist(rng), dist(rng), dist(rng)};
    if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < 1.0) pts.push_back(p);
  }
  return pts;
}

}  // namespace formlab
