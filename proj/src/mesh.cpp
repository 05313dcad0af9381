#include "formlab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace formlab {

namespace {

constexpr double kG3 = 0.7745966692414834;  // sqrt(3/5)
constexpr double kGaussPoints[3] = {-kG3, 0.0, kG3};
constexpr double kGaussWeights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

}  // namespace

Weight Weight::radial(int n) {
  if (n < 2) throw std::invalid_argument("radial weight needs dimension >= 2");
  return {WeightKind::radial, n};
}

double Weight::sphere_factor() const {
  if (kind == WeightKind::flat) return 1.0;
  const double n = static_cast<double>(dim);
  return 2.0 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
}

double Weight::operator()(double r) const {
  if (kind == WeightKind::flat) return 1.0;
  return sphere_factor() * std::pow(r, dim - 1);
}

nlohmann::json Weight::to_json() const {
  if (kind == WeightKind::flat) return {{"kind", "flat"}};
  return {{"kind", "radial"}, {"n", dim}};
}

Weight Weight::from_json(const nlohmann::json& j) {
  const std::string k = j.at("kind").get<std::string>();
  if (k == "flat") return flat();
  if (k == "radial") return radial(j.at("n").get<int>());
  throw std::invalid_argument("unknown weight kind: " + k);
}

Mesh Mesh::from_nodes(std::vector<double> nodes, Weight w) {
  if (nodes.size() < 3) throw std::invalid_argument("mesh needs at least 2 elements");
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    if (!(nodes[i] < nodes[i + 1])) throw std::invalid_argument("mesh nodes must increase strictly");
  if (w.kind == WeightKind::radial && !(nodes.front() > 0.0))
    throw std::invalid_argument("radial mesh must exclude the origin");
  auto d = std::make_shared<Data>();
  d->max_h = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    d->max_h = std::max(d->max_h, nodes[i + 1] - nodes[i]);
  d->nodes = std::move(nodes);
  d->weight = w;
  Mesh m;
  m.d_ = std::move(d);
  return m;
}

Mesh Mesh::uniform(double a, double b, int elements, Weight w) {
  if (!(a < b)) throw std::invalid_argument("mesh extent must satisfy a < b");
  if (elements < 2) throw std::invalid_argument("mesh needs at least 2 elements");
  std::vector<double> nodes(static_cast<std::size_t>(elements) + 1);
  for (int i = 0; i <= elements; ++i)
    nodes[static_cast<std::size_t>(i)] = a + (b - a) * (static_cast<double>(i) / elements);
  nodes.front() = a;
  nodes.back() = b;
  return from_nodes(std::move(nodes), w);
}

Mesh Mesh::graded(double a, double b, int elements, Weight w, double ratio_cap) {
  if (!(a < b)) throw std::invalid_argument("mesh extent must satisfy a < b");
  if (elements < 2) throw std::invalid_argument("mesh needs at least 2 elements");
  if (ratio_cap <= 1.0) return uniform(a, b, elements, w);

  const std::size_t n = static_cast<std::size_t>(elements);
  std::vector<double> nodes(n + 1);
  const double pure = a > 0.0 ? std::pow(b / a, 1.0 / elements) : ratio_cap + 1.0;
  if (a > 0.0 && pure <= ratio_cap) {
    // Pure geometric node placement: adjacent element lengths grow by `pure`.
    for (std::size_t i = 0; i <= n; ++i)
      nodes[i] = a * std::pow(b / a, static_cast<double>(i) / elements);
  } else {
    // Element lengths grow geometrically by ratio_cap away from the inner end.
    const double q = ratio_cap;
    const double h0 = (b - a) * (q - 1.0) / (std::pow(q, elements) - 1.0);
    nodes[0] = a;
    double h = h0;
    for (std::size_t i = 1; i <= n; ++i) {
      nodes[i] = nodes[i - 1] + h;
      h *= q;
    }
  }
  nodes.front() = a;
  nodes.back() = b;
  return from_nodes(std::move(nodes), w);
}

std::span<const double> Mesh::nodes() const { return d_->nodes; }
std::size_t Mesh::node_count() const { return d_->nodes.size(); }
std::size_t Mesh::element_count() const { return d_->nodes.size() - 1; }
double Mesh::a() const { return d_->nodes.front(); }
double Mesh::b() const { return d_->nodes.back(); }
double Mesh::node(std::size_t i) const { return d_->nodes[i]; }
double Mesh::h(std::size_t element) const { return d_->nodes[element + 1] - d_->nodes[element]; }
double Mesh::max_h() const { return d_->max_h; }
const Weight& Mesh::weight() const { return d_->weight; }

std::size_t Mesh::element_of(double r) const {
  const auto& xs = d_->nodes;
  const double tol = 1e-9 * (xs.back() - xs.front());
  if (r < xs.front() - tol || r > xs.back() + tol)
    throw std::invalid_argument("point outside mesh extent");
  if (r <= xs.front()) return 0;
  if (r >= xs.back()) return xs.size() - 2;
  const auto it = std::upper_bound(xs.begin(), xs.end(), r);
  return static_cast<std::size_t>(it - xs.begin()) - 1;
}

bool Mesh::same_nodes(const Mesh& other) const {
  if (d_ == other.d_) return true;
  if (!d_ || !other.d_) return false;
  return d_->nodes == other.d_->nodes;
}

nlohmann::json Mesh::to_json() const {
  return {{"nodes", d_->nodes}, {"weight", d_->weight.to_json()}};
}

Mesh Mesh::from_json(const nlohmann::json& j) {
  return from_nodes(j.at("nodes").get<std::vector<double>>(),
                    Weight::from_json(j.at("weight")));
}

Field::Field(Mesh m, std::vector<double> v) : mesh(std::move(m)), values(std::move(v)) {
  if (!mesh.valid() || values.size() != mesh.node_count())
    throw std::invalid_argument("field size must match mesh nodes");
}

Field Field::sample(const Mesh& m, const std::function<double(double)>& f) {
  std::vector<double> v(m.node_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(m.node(i));
  return Field(m, std::move(v));
}

Field Field::constant(const Mesh& m, double c) {
  return Field(m, std::vector<double>(m.node_count(), c));
}

double Field::eval(double r) const {
  const std::size_t e = mesh.element_of(r);
  const double x0 = mesh.node(e), x1 = mesh.node(e + 1);
  const double t = (r - x0) / (x1 - x0);
  return values[e] * (1.0 - t) + values[e + 1] * t;
}

double Field::slope(std::size_t element) const {
  return (values[element + 1] - values[element]) / mesh.h(element);
}

double Field::slope_at(double r) const { return slope(mesh.element_of(r)); }

double Field::min_value() const {
  double m = values.front();
  for (double v : values) m = std::min(m, v);
  return m;
}

double Field::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

bool Field::finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

// 3-point Gauss on [lo, hi] of f(r) * weight(r).
template <typename F>
double gauss3_weighted(const Weight& w, double lo, double hi, F&& f) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  double s = 0.0;
  for (int g = 0; g < 3; ++g) {
    const double r = mid + half * kGaussPoints[g];
    s += kGaussWeights[g] * f(r) * w(r);
  }
  return s * half;
}

}  // namespace

double integrate(const Mesh& m, const std::function<double(double)>& f, par::Exec ex) {
  if (!m.valid()) throw std::invalid_argument("integrate: invalid mesh");
  const std::size_t n = m.element_count();
  const auto vals = par::map<double>(ex, n, [&](std::size_t e) {
    return gauss3_weighted(m.weight(), m.node(e), m.node(e + 1), f);
  });
  const double total = par::sum(vals);
  if (!std::isfinite(total)) throw error("integrate: non-finite integrand");
  return total;
}

double integrate(const Field& f, par::Exec ex) {
  const Mesh& m = f.mesh;
  const std::size_t n = m.element_count();
  const auto vals = par::map<double>(ex, n, [&](std::size_t e) {
    const double x0 = m.node(e), x1 = m.node(e + 1);
    const double v0 = f.values[e], v1 = f.values[e + 1];
    return gauss3_weighted(m.weight(), x0, x1, [&](double r) {
      const double t = (r - x0) / (x1 - x0);
      return v0 * (1.0 - t) + v1 * t;
    });
  });
  const double total = par::sum(vals);
  if (!std::isfinite(total)) throw error("integrate: non-finite field");
  return total;
}

double integrate_interval(const Mesh& m, double lo, double hi,
                          const std::function<double(double)>& f, par::Exec ex) {
  if (!m.valid()) throw std::invalid_argument("integrate_interval: invalid mesh");
  if (!(lo < hi)) throw std::invalid_argument("integrate_interval: lo must be < hi");
  const double tol = 1e-9 * (m.b() - m.a());
  if (lo < m.a() - tol || hi > m.b() + tol)
    throw std::invalid_argument("integrate_interval: interval outside mesh");
  lo = std::max(lo, m.a());
  hi = std::min(hi, m.b());
  const std::size_t e0 = m.element_of(lo);
  const std::size_t e1 = m.element_of(hi);
  const std::size_t n = e1 - e0 + 1;
  const auto vals = par::map<double>(ex, n, [&](std::size_t k) {
    const std::size_t e = e0 + k;
    const double plo = std::max(lo, m.node(e));
    const double phi = std::min(hi, m.node(e + 1));
    if (!(phi > plo)) return 0.0;
    return gauss3_weighted(m.weight(), plo, phi, f);
  });
  const double total = par::sum(vals);
  if (!std::isfinite(total)) throw error("integrate_interval: non-finite integrand");
  return total;
}

double weighted_average(const Mesh& m, double lo, double hi,
                        const std::function<double(double)>& f) {
  const double num = integrate_interval(m, lo, hi, f);
  const double den = integrate_interval(m, lo, hi, [](double) { return 1.0; });
  if (!(den > 0.0)) throw error("weighted_average: degenerate interval measure");
  return num / den;
}

BallScan enumerate_balls(const Mesh& m, double lo, double hi, int enlargement,
                         int target_count) {
  if (!m.valid()) throw std::invalid_argument("enumerate_balls: invalid mesh");
  if (!(lo < hi)) throw std::invalid_argument("enumerate_balls: lo must be < hi");
  const double tol = 1e-9 * (m.b() - m.a());
  if (lo < m.a() - tol || hi > m.b() + tol)
    throw std::invalid_argument("enumerate_balls: subdomain outside mesh");
  if (enlargement != 2 && enlargement != 4)
    throw std::invalid_argument("enumerate_balls: enlargement must be 2 or 4");
  if (target_count < 1) throw std::invalid_argument("enumerate_balls: target_count must be >= 1");

  // Radii stay at or above the coarsest element length inside the subdomain.
  double base = 0.0;
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    if (m.node(e + 1) <= lo || m.node(e) >= hi) continue;
    base = std::max(base, m.h(e));
  }

  const double span = hi - lo;
  std::vector<double> radii;
  for (double r = span / (2.0 * enlargement); r >= base * (1.0 - 1e-12); r *= 0.5)
    radii.push_back(r);
  if (radii.empty())
    throw error("enumerate_balls: subdomain too narrow for the mesh resolution");

  const int per_radius = (target_count + static_cast<int>(radii.size()) - 1) /
                         static_cast<int>(radii.size());
  int level = 0;
  while (level < 5 && (1 << level) + 1 < per_radius) ++level;

  BallScan scan;
  scan.lo = lo;
  scan.hi = hi;
  scan.enlargement = enlargement;
  for (double r : radii) {
    const double cmin = lo + enlargement * r;
    const double cmax = hi - enlargement * r;
    if (cmax - cmin <= tol) {
      scan.balls.push_back({0.5 * (lo + hi), r});
      continue;
    }
    const int steps = 1 << level;
    for (int i = 0; i <= steps; ++i) {
      const double c = cmin + (cmax - cmin) * (static_cast<double>(i) / steps);
      scan.balls.push_back({c, r});
    }
  }
  return scan;
}

ExhaustionSpec build_exhaustion(double a, double b, int levels) {
  if (!(a < b)) throw std::invalid_argument("build_exhaustion: a must be < b");
  if (levels < 1) throw std::invalid_argument("build_exhaustion: levels must be >= 1");

  const double span = b - a;
  ExhaustionSpec spec;
  spec.outer_a = a;
  spec.outer_b = b;
  double eps_prev = 1.0;
  for (int j = 1; j <= levels; ++j) {
    const double delta = span * std::pow(10.0, -(j + 1));
    const double delta_next = span * std::pow(10.0, -(j + 2));
    const double gap = (j < levels) ? delta - delta_next : delta;
    const double eps = std::min({eps_prev / 2.0, gap / 2.0, std::pow(2.0, -j)});
    spec.levels.push_back({a + delta, b - delta, eps});
    eps_prev = eps;
  }
  return spec;
}

}  // namespace formlab
