#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "formlab/mesh.hpp"

namespace formlab {

/// Standard bump c * exp(-1/(1 - s^2)) on (-1, 1), unit mass, dilated to a
/// given radius.
struct MollifierSpec {
  double radius = 0.0;

  static double profile(double s);             // unscaled bump
  static double profile_derivative(double s);
  double value(double t) const;       // phi_eps(t)
  double derivative(double t) const;  // phi_eps'(t)
};

/// A potential in one of three distributional representations, or a finite
/// sum of them. Pointwise carries a density sigma(r); Divergence carries the
/// radial component g of Gamma = g(r) x/|x| and pairs through
/// <div Gamma, h> = -int g h' w dr; Atomic is a finite sum of point masses.
class Potential {
 public:
  enum class Kind { pointwise, divergence, atomic, sum };

  Potential() : label_("zero"), density_([](double) { return 0.0; }) {}

  static Potential pointwise(std::function<double(double)> density,
                             std::string label = "pointwise");
  static Potential divergence(std::function<double(double)> radial_component,
                              std::string label = "divergence");
  static Potential atomic(std::vector<std::pair<double, double>> atoms);
  static Potential sum(std::vector<Potential> parts, std::string label = "sum");

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  double density(double r) const;
  double radial_component(double r) const;
  const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }
  const std::vector<Potential>& parts() const { return parts_; }

  Potential scaled(double factor) const;

  nlohmann::json to_json() const;

 private:
  Kind kind_ = Kind::pointwise;
  std::string label_;
  std::function<double(double)> density_;
  std::function<double(double)> g_;
  std::vector<std::pair<double, double>> atoms_;
  std::vector<Potential> parts_;
};

/// Mollifies sigma into a Pointwise potential. The result is evaluable on
/// (extent_a + eps, extent_b - eps); sigma must be evaluable on the full
/// extent. The weight supplies the dimension for Divergence reduction.
Potential mollify(const Potential& sigma, const MollifierSpec& spec,
                  double extent_a, double extent_b, const Weight& w);
Potential mollify(const Potential& sigma, const MollifierSpec& spec, const Mesh& extent);

/// <sigma, h^2> for a nodal field vanishing at the mesh endpoints.
double pair_with_square(const Potential& sigma, const Field& h,
                        par::Exec ex = par::Exec::parallel);

/// <sigma, phi_i> against every interior hat of the mesh.
std::vector<double> pair_with_hats(const Potential& sigma, const Mesh& m,
                                   par::Exec ex = par::Exec::parallel);

using Point3 = std::array<double, 3>;
using Matrix3Fn = std::function<std::array<double, 9>(const Point3&)>;  // row-major
using Scalar3Fn = std::function<double(const Point3&)>;

/// Non-radial three-dimensional example data (matrix coefficient, exact
/// solution, matching potential) for the pointwise residual checker.
struct Example3D {
  Matrix3Fn matrix;
  Scalar3Fn solution;
  Scalar3Fn sigma;
};

/// Catalog entry: a named potential family with its canonical domain, weight,
/// and whatever closed forms it admits.
struct ExampleSpec {
  std::string name;
  int dim = 1;
  std::map<std::string, double> params;
  Weight weight;
  double domain_a = 0.0, domain_b = 1.0;
  Potential potential;
  std::function<double(double)> closed_solution;       // may be empty
  std::function<double(double)> certificate;           // radial component g, may be empty
  std::optional<double> alpha_plus, alpha_minus;
  bool supercritical = false;
  std::optional<Example3D> example3d;
  std::string description;
};

ExampleSpec catalog(const std::string& name,
                    const std::map<std::string, double>& params = {});
std::vector<std::string> catalog_names();

}  // namespace formlab
