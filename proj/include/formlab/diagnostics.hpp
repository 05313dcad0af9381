#pragma once

#include <span>

#include "formlab/forms.hpp"

namespace formlab {

/// Local energy quotient int |u'|^2 psi^2 w / int u^2 |psi'|^2 w for a cutoff
/// psi vanishing at the mesh boundary. The coefficient shapes the constant a
/// solution must satisfy, not the measured ratio; it is validated only.
double caccioppoli_ratio(const Field& u, const Field& psi, const EllipticCoeff& coeff);

/// int (|u'|^2 / u^2) psi^2 w / int |psi'|^2 w; u must stay positive on the
/// support of psi.
double log_caccioppoli_ratio(const Field& u, const Field& psi);

/// Average of f against the mesh's weight measure over [lo, hi], computed as
/// a ratio of two like quadratures so constant fields average exactly.
double ball_average(const Mesh& m, double lo, double hi,
                    const std::function<double(double)>& f);

/// Single-ball values; the scan maxima below call exactly these, so a
/// reported witness reproduces its constant bit for bit.
double wrh_ball_value(const Field& w, double q, const Ball& b);
double bmo_ball_value(const Field& f, const Ball& b);
double doubling_ball_value(const Field& w, const Ball& b);

struct Witness {
  Ball ball;
  double value = 0.0;
};

struct ScanStat {
  double constant = 0.0;
  Witness witness;

  nlohmann::json to_json() const;
};

/// max over the scan of (avg_B w^q)^(1/q) / avg_2B w. Scan enlargement 2.
ScanStat wrh_constant(const Field& w, double q, const BallScan& scan);

/// max over the scan of avg_B |f - avg_B f|^2 (squared mean oscillation).
ScanStat bmo_constant(const Field& f, const BallScan& scan);

/// max over the scan of avg_2B w / avg_B w, floored at 1 (values below 1
/// leave the doubling inequality vacuous). Scan enlargement 4.
ScanStat doubling_constant(const Field& w, const BallScan& scan);

/// Computes the WRH constant of w, the BMO constant of log w, and the
/// doubling constant of w over freshly enumerated scans of the subdomain.
struct PipelineReport {
  double lo = 0.0, hi = 0.0;
  double q = 2.0;
  ScanStat wrh, bmo, doubling;

  nlohmann::json to_json() const;
};

PipelineReport wrh_bmo_implies_doubling_check(const Field& w, double lo, double hi,
                                              double q, int scan_target = 48);

/// Central finite-difference residual max over samples of
/// -div(A grad u) - sigma u for pointwise 3D data.
double pointwise_residual_3d(const Scalar3Fn& u, const Matrix3Fn& a,
                             const Scalar3Fn& sigma, std::span<const Point3> samples,
                             double step);

/// Deterministic sample cloud in the open unit ball (fixed-seed rejection).
std::vector<Point3> unit_ball_samples(std::size_t count, unsigned seed = 7u);

/// Tent cutoff on [lo, hi]: 0 outside, 1 at the midpoint, linear in between,
/// sampled onto the mesh.
Field tent(const Mesh& m, double lo, double hi);

}  // namespace formlab
