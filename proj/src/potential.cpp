#include "formlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "formlab/common.hpp"

namespace formlab {
namespace {

// Unit-mass normalization of exp(-1/(1-s^2)) on (-1,1), computed once with a
// fine midpoint rule. The integrand is smooth and flat at the endpoints, so
// this converges far past double precision at this panel count.
double bump_norm() {
  static const double c = [] {
    const int n = 20000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double t = -1.0 + (i + 0.5) * (2.0 / n);
      s += std::exp(-1.0 / (1.0 - t * t));
    }
    return s * (2.0 / n);
  }();
  return c;
}

}  // namespace

double MollifierSpec::profile(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s * s)) / bump_norm();
}

double MollifierSpec::profile_derivative(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  double d = 1.0 - s * s;
  return profile(s) * (-2.0 * s / (d * d));
}

double MollifierSpec::value(double t) const {
  if (radius <= 0.0) throw std::invalid_argument("mollifier radius must be positive");
  return profile(t / radius) / radius;
}

double MollifierSpec::derivative(double t) const {
  if (radius <= 0.0) throw std::invalid_argument("mollifier radius must be positive");
  return profile_derivative(t / radius) / (radius * radius);
}

Potential Potential::pointwise(std::function<double(double)> density, std::string label) {
  Potential p;
  p.kind_ = Kind::pointwise;
  p.label_ = std::move(label);
  p.density_ = std::move(density);
  return p;
}

Potential Potential::divergence(std::function<double(double)> radial_component,
                                std::string label) {
  Potential p;
  p.kind_ = Kind::divergence;
  p.label_ = std::move(label);
  p.g_ = std::move(radial_component);
  return p;
}

Potential Potential::atomic(std::vector<std::pair<double, double>> atoms) {
  Potential p;
  p.kind_ = Kind::atomic;
  p.label_ = "atomic";
  std::sort(atoms.begin(), atoms.end());
  p.atoms_ = std::move(atoms);
  return p;
}

Potential Potential::sum(std::vector<Potential> parts, std::string label) {
  Potential p;
  p.kind_ = Kind::sum;
  p.label_ = std::move(label);
  p.parts_ = std::move(parts);
  return p;
}

double Potential::density(double r) const {
  switch (kind_) {
    case Kind::pointwise:
      return density_(r);
    case Kind::sum: {
      double s = 0.0;
      for (const auto& part : parts_) s += part.density(r);
      return s;
    }
    default:
      throw formlab::error("potential has no pointwise density: " + label_);
  }
}

double Potential::radial_component(double r) const {
  if (kind_ != Kind::divergence)
    throw formlab::error("potential is not in divergence form: " + label_);
  return g_(r);
}

Potential Potential::scaled(double factor) const {
  switch (kind_) {
    case Kind::pointwise: {
      auto f = density_;
      return pointwise([f, factor](double r) { return factor * f(r); }, label_);
    }
    case Kind::divergence: {
      auto g = g_;
      return divergence([g, factor](double r) { return factor * g(r); }, label_);
    }
    case Kind::atomic: {
      auto atoms = atoms_;
      for (auto& [t, m] : atoms) m *= factor;
      return atomic(std::move(atoms));
    }
    case Kind::sum: {
      std::vector<Potential> parts;
      parts.reserve(parts_.size());
      for (const auto& part : parts_) parts.push_back(part.scaled(factor));
      return sum(std::move(parts), label_);
    }
  }
  throw formlab::error("unreachable");
}

nlohmann::json Potential::to_json() const {
  nlohmann::json j;
  j["label"] = label_;
  switch (kind_) {
    case Kind::pointwise:
      j["kind"] = "pointwise";
      break;
    case Kind::divergence:
      j["kind"] = "divergence";
      break;
    case Kind::atomic: {
      j["kind"] = "atomic";
      auto arr = nlohmann::json::array();
      for (const auto& [t, m] : atoms_) arr.push_back({{"at", t}, {"mass", m}});
      j["atoms"] = arr;
      break;
    }
    case Kind::sum: {
      j["kind"] = "sum";
      auto arr = nlohmann::json::array();
      for (const auto& part : parts_) arr.push_back(part.to_json());
      j["parts"] = arr;
      break;
    }
  }
  return j;
}

namespace {

// Gauss 3 on 96 panels across the bump's support. The bump is C^infinity but
// its mid-range derivatives are large, so the panel count matters; 96 panels
// keep the convolution error below 1e-9 relative.
constexpr int kPanels = 96;

template <typename F>
double convolve(const MollifierSpec& spec, double r, F&& f, bool with_derivative) {
  const double gx[3] = {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)};
  const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double eps = spec.radius;
  const double h = 2.0 * eps / kPanels;
  double acc = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    double lo = -eps + p * h;
    double mid = lo + 0.5 * h;
    for (int q = 0; q < 3; ++q) {
      double t = mid + 0.5 * h * gx[q];
      double k = with_derivative ? spec.derivative(t) : spec.value(t);
      acc += 0.5 * h * gw[q] * k * f(r - t);
    }
  }
  return acc;
}

Potential mollify_one(const Potential& sigma, const MollifierSpec& spec,
                      double extent_a, double extent_b, const Weight& w) {
  const double eps = spec.radius;
  switch (sigma.kind()) {
    case Potential::Kind::pointwise: {
      auto f = [sigma](double s) { return sigma.density(s); };
      return Potential::pointwise(
          [spec, f](double r) { return convolve(spec, r, f, false); },
          sigma.label() + "~eps");
    }
    case Potential::Kind::divergence: {
      // sigma = div(g x/|x|) distributionally; against radial tests with
      // weight r^{n-1} this is g' + (n-1) g / r, so the mollification is
      // phi_eps' * g plus (n-1) times phi_eps * (g/r).
      auto g = [sigma](double s) { return sigma.radial_component(s); };
      double nm1 = static_cast<double>(w.dim - 1);
      return Potential::pointwise(
          [spec, g, nm1](double r) {
            double dpart = convolve(spec, r, g, true);
            double rpart = 0.0;
            if (nm1 != 0.0) {
              auto gr = [g](double s) { return g(s) / s; };
              rpart = nm1 * convolve(spec, r, gr, false);
            }
            return dpart + rpart;
          },
          sigma.label() + "~eps");
    }
    case Potential::Kind::atomic: {
      auto atoms = sigma.atoms();
      for (const auto& [t, m] : atoms) {
        (void)m;
        if (t - eps <= extent_a || t + eps >= extent_b)
          throw formlab::error("mollifier support spills past the domain at an atom");
      }
      return Potential::pointwise(
          [spec, atoms](double r) {
            double s = 0.0;
            for (const auto& [t, m] : atoms) s += m * spec.value(r - t);
            return s;
          },
          "atomic~eps");
    }
    case Potential::Kind::sum: {
      std::vector<Potential> parts;
      parts.reserve(sigma.parts().size());
      for (const auto& part : sigma.parts())
        parts.push_back(mollify_one(part, spec, extent_a, extent_b, w));
      return Potential::sum(std::move(parts), sigma.label() + "~eps");
    }
  }
  throw formlab::error("unreachable");
}

}  // namespace

Potential mollify(const Potential& sigma, const MollifierSpec& spec,
                  double extent_a, double extent_b, const Weight& w) {
  if (spec.radius <= 0.0) throw std::invalid_argument("mollifier radius must be positive");
  if (2.0 * spec.radius >= extent_b - extent_a)
    throw std::invalid_argument("mollifier radius exceeds half the extent");
  return mollify_one(sigma, spec, extent_a, extent_b, w);
}

Potential mollify(const Potential& sigma, const MollifierSpec& spec, const Mesh& extent) {
  return mollify(sigma, spec, extent.a(), extent.b(), extent.weight());
}

double pair_with_square(const Potential& sigma, const Field& h, par::Exec ex) {
  const Mesh& m = h.mesh;
  double scale = h.max_abs();
  if (std::abs(h.values.front()) > 1e-12 * std::max(scale, 1.0) ||
      std::abs(h.values.back()) > 1e-12 * std::max(scale, 1.0))
    throw std::invalid_argument("pair_with_square needs a boundary-vanishing field");
  switch (sigma.kind()) {
    case Potential::Kind::pointwise:
      return integrate(
          m, [&](double r) { return sigma.density(r) * h.eval(r) * h.eval(r); }, ex);
    case Potential::Kind::divergence: {
      // <div(g x/|x|), h^2> = -int g (h^2)' w = -int 2 g h h' w
      return -integrate(
          m,
          [&](double r) {
            return 2.0 * sigma.radial_component(r) * h.eval(r) * h.slope_at(r);
          },
          ex);
    }
    case Potential::Kind::atomic: {
      double s = 0.0;
      for (const auto& [t, mass] : sigma.atoms()) {
        double v = h.eval(t);
        s += mass * v * v * m.weight()(t);
      }
      return s;
    }
    case Potential::Kind::sum: {
      double s = 0.0;
      for (const auto& part : sigma.parts()) s += pair_with_square(part, h, ex);
      return s;
    }
  }
  throw formlab::error("unreachable");
}

namespace {

// <sigma, phi_i> for the interior hat at node i, per representation. Hats and
// their slopes are exact, quadrature is Gauss 3 per element half.
double pair_hat(const Potential& sigma, const Mesh& m, std::size_t i) {
  const auto& x = m.nodes();
  const Weight& w = m.weight();
  double xl = x[i - 1], xc = x[i], xr = x[i + 1];
  auto hat = [&](double r) {
    if (r <= xl || r >= xr) return 0.0;
    return r <= xc ? (r - xl) / (xc - xl) : (xr - r) / (xr - xc);
  };
  switch (sigma.kind()) {
    case Potential::Kind::pointwise: {
      auto f = [&](double r) { return sigma.density(r) * hat(r); };
      return integrate_interval(m, xl, xc, f) + integrate_interval(m, xc, xr, f);
    }
    case Potential::Kind::divergence: {
      double sl = 1.0 / (xc - xl), sr = -1.0 / (xr - xc);
      auto fl = [&](double r) { return -sigma.radial_component(r) * sl; };
      auto fr = [&](double r) { return -sigma.radial_component(r) * sr; };
      return integrate_interval(m, xl, xc, fl) + integrate_interval(m, xc, xr, fr);
    }
    case Potential::Kind::atomic: {
      double s = 0.0;
      for (const auto& [t, mass] : sigma.atoms()) s += mass * hat(t) * w(t);
      return s;
    }
    case Potential::Kind::sum: {
      double s = 0.0;
      for (const auto& part : sigma.parts()) s += pair_hat(part, m, i);
      return s;
    }
  }
  throw formlab::error("unreachable");
}

}  // namespace

std::vector<double> pair_with_hats(const Potential& sigma, const Mesh& m, par::Exec ex) {
  std::size_t n = m.node_count();
  if (n < 3) throw std::invalid_argument("mesh has no interior nodes");
  std::vector<double> out(n - 2);
  par::fill(ex, out.size(), out.data(), [&](std::size_t k) -> double {
    try {
      return pair_hat(sigma, m, k + 1);
    } catch (...) {
      // exceptions must not cross the parallel region; surface as non-finite
      return std::numeric_limits<double>::quiet_NaN();
    }
  });
  for (double v : out)
    if (!std::isfinite(v)) throw formlab::error("non-finite pairing with a hat");
  return out;
}

namespace {

double param(const std::map<std::string, double>& params, const std::string& key,
             double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

ExampleSpec hardy_example(const std::map<std::string, double>& params) {
  ExampleSpec e;
  e.name = "hardy";
  int n = static_cast<int>(param(params, "n", 3));
  double c = param(params, "c", 0.1875);
  if (n < 2) throw std::invalid_argument("hardy: dimension must be at least 2");
  if (c < 0.0) throw std::invalid_argument("hardy: c must be nonnegative");
  e.dim = n;
  e.params = {{"n", static_cast<double>(n)}, {"c", c}};
  e.weight = Weight::radial(n);
  e.domain_a = 1e-3;
  e.domain_b = 1e3;
  e.potential = Potential::pointwise([c](double r) { return c / (r * r); }, "hardy");
  double crit = 0.25 * (n - 2) * (n - 2);
  e.supercritical = c > crit;
  if (c <= crit) {
    double root = std::sqrt(crit - c);
    double ap = 0.5 * (2.0 - n) + root;
    double am = 0.5 * (2.0 - n) - root;
    e.alpha_plus = ap;
    e.alpha_minus = am;
    // u = r^{alpha_+} solves the equation; its logarithmic derivative gives
    // the equality certificate g = -a u'/u = -alpha_+ / r (a == 1).
    e.closed_solution = [ap](double r) { return std::pow(r, ap); };
    e.certificate = [ap](double r) { return -ap / r; };
  }
  e.description =
      "inverse-square potential c/r^2 on an annulus, radial reduction; power "
      "solutions r^alpha with alpha+- = (2-n)/2 +- sqrt((n-2)^2/4 - c)";
  return e;
}

ExampleSpec radial_oscillating_example(const std::map<std::string, double>& params) {
  ExampleSpec e;
  e.name = "radial_oscillating";
  int n = static_cast<int>(param(params, "n", 3));
  if (n < 2) throw std::invalid_argument("radial_oscillating: dimension must be at least 2");
  e.dim = n;
  e.params = {{"n", static_cast<double>(n)}};
  e.weight = Weight::radial(n);
  e.domain_a = 0.05;
  e.domain_b = 20.0;
  // sigma = div(sin r x/r) - sin^2 r = cos r + (n-1) sin r / r - sin^2 r,
  // semibounded with certificate Gamma = sin r x/r and solution e^{cos r}.
  e.potential = Potential::sum(
      {Potential::divergence([](double r) { return std::sin(r); }, "oscillating-flux"),
       Potential::pointwise([](double r) { return -std::sin(r) * std::sin(r); },
                            "oscillating-absorption")},
      "radial_oscillating");
  e.closed_solution = [](double r) { return std::exp(std::cos(r)); };
  e.certificate = [](double r) { return std::sin(r); };
  e.description =
      "sigma = div(sin r x/|x|) - sin^2 r with certificate Gamma = sin r x/|x| "
      "and solution exp(cos r)";
  return e;
}

ExampleSpec oscillating_1d_example() {
  ExampleSpec e;
  e.name = "oscillating_1d";
  e.dim = 1;
  e.weight = Weight::flat();
  e.domain_a = 0.0;
  e.domain_b = 30.0;
  // sigma = (sin x)' - sin^2 x; u = e^{cos x} solves -u'' = sigma u.
  e.potential = Potential::sum(
      {Potential::divergence([](double x) { return std::sin(x); }, "oscillating-flux"),
       Potential::pointwise([](double x) { return -std::sin(x) * std::sin(x); },
                            "oscillating-absorption")},
      "oscillating_1d");
  e.closed_solution = [](double x) { return std::exp(std::cos(x)); };
  e.certificate = [](double x) { return std::sin(x); };
  e.description =
      "sigma = (sin x)' - sin^2 x on the line with certificate Gamma = sin x "
      "and solution exp(cos x)";
  return e;
}

ExampleSpec constant_example(const std::map<std::string, double>& params) {
  ExampleSpec e;
  e.name = "constant";
  double q = param(params, "q", 0.25 * M_PI * M_PI);
  if (q < 0.0) throw std::invalid_argument("constant: q must be nonnegative");
  e.dim = 1;
  e.params = {{"q", q}};
  e.weight = Weight::flat();
  e.domain_a = 0.0;
  e.domain_b = 1.0;
  e.potential = Potential::pointwise([q](double) { return q; }, "constant");
  double s = std::sqrt(q);
  e.supercritical = q >= M_PI * M_PI;
  if (!e.supercritical) {
    // -u'' = q u with u(0) = u(1) = 1: u = cos(sqrt q (x - 1/2)) / cos(sqrt q / 2),
    // valid up to the first Dirichlet eigenvalue pi^2.
    e.closed_solution = [s](double x) { return std::cos(s * (x - 0.5)) / std::cos(0.5 * s); };
    e.certificate = [s](double x) { return s * std::tan(s * (x - 0.5)); };
  }
  e.description =
      "constant potential q on the unit interval; gauge "
      "u1 = cos(sqrt(q)(x - 1/2))/cos(sqrt(q)/2) below the Dirichlet eigenvalue";
  return e;
}

ExampleSpec nonsym_3d_example(const std::map<std::string, double>& params) {
  ExampleSpec e;
  e.name = "nonsym_3d";
  double C = param(params, "C", 1.0);
  e.dim = 3;
  e.params = {{"C", C}};
  e.weight = Weight::flat();
  e.domain_a = -1.0;
  e.domain_b = 1.0;
  // A = I + B with an antisymmetric off-diagonal block driven by a(x1) = x1.
  // B drops out of the quadratic form, so A(xi) . xi = |xi|^2 identically
  // while sigma still feels the constant C.
  auto a = [](double t) { return t; };
  auto ap = [](double) { return 1.0; };
  Example3D ex;
  ex.matrix = [a, C](const Point3& x) {
    std::array<double, 9> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
    m[1] = -C * a(x[0]);  // row 1, col 2
    m[3] = C * a(x[0]);   // row 2, col 1
    return m;
  };
  ex.solution = [](const Point3& x) {
    return 1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
  };
  ex.sigma = [ap, C](const Point3& x) {
    double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return (-6.0 + 2.0 * x[1] * C * ap(x[0])) / (1.0 + r2);
  };
  e.example3d = ex;
  e.potential = Potential::pointwise(
      [ex](double r) { return ex.sigma({r, 0.0, 0.0}); }, "nonsym-axis-trace");
  e.description =
      "nonsymmetric A = I + B with b12 = -C a(x1), a(t) = t; exact solution "
      "1 + |x|^2, sigma = (-6 + 2 x2 C a'(x1))/(1 + |x|^2)";
  return e;
}

// Construction-time self check for the flat one-dimensional entries: the
// closed solution must satisfy int u' phi' = <sigma u, phi> against a spread
// of interior hats on a moderate mesh. Guards against sign slips in the
// hand-derived formulas; second-order interpolation error bounds the gate.
void self_check(const ExampleSpec& e) {
  if (!e.closed_solution || e.dim > 1) return;
  Mesh m = Mesh::uniform(e.domain_a, e.domain_b, 256, e.weight);
  Field u = Field::sample(m, e.closed_solution);
  const auto& x = m.nodes();
  for (std::size_t i = 1; i + 1 < m.node_count(); i += 37) {
    double xl = x[i - 1], xc = x[i], xr = x[i + 1];
    auto hat = [&](double r) {
      return r <= xc ? (r - xl) / (xc - xl) : (xr - r) / (xr - xc);
    };
    auto hat_slope = [&](double r) { return r <= xc ? 1.0 / (xc - xl) : -1.0 / (xr - xc); };
    auto lhs_f = [&](double r) { return u.slope_at(r) * hat_slope(r); };
    double lhs = integrate_interval(m, xl, xc, lhs_f) + integrate_interval(m, xc, xr, lhs_f);
    auto rhs_f = [&](double r) {
      double acc = 0.0;
      auto add = [&](const Potential& p) {
        if (p.kind() == Potential::Kind::pointwise) {
          acc += p.density(r) * u.eval(r) * hat(r);
        } else if (p.kind() == Potential::Kind::divergence) {
          acc += -p.radial_component(r) * (u.slope_at(r) * hat(r) + u.eval(r) * hat_slope(r));
        }
      };
      if (e.potential.kind() == Potential::Kind::sum) {
        for (const auto& part : e.potential.parts()) add(part);
      } else {
        add(e.potential);
      }
      return acc;
    };
    double rhs = integrate_interval(m, xl, xc, rhs_f) + integrate_interval(m, xc, xr, rhs_f);
    double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
    if (std::abs(lhs - rhs) > 0.05 * scale)
      throw formlab::error("catalog self-check failed for " + e.name);
  }
}

}  // namespace

ExampleSpec catalog(const std::string& name, const std::map<std::string, double>& params) {
  ExampleSpec e;
  if (name == "hardy") {
    e = hardy_example(params);
  } else if (name == "radial_oscillating") {
    e = radial_oscillating_example(params);
  } else if (name == "oscillating_1d") {
    e = oscillating_1d_example();
  } else if (name == "constant") {
    e = constant_example(params);
  } else if (name == "nonsym_3d") {
    e = nonsym_3d_example(params);
  } else {
    throw std::invalid_argument("unknown catalog example: " + name);
  }
  self_check(e);
  return e;
}

std::vector<std::string> catalog_names() {
  return {"constant", "hardy", "nonsym_3d", "oscillating_1d", "radial_oscillating"};
}

}  // namespace formlab
