#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"

#include "formlab/common.hpp"
#include "formlab/parallel.hpp"

namespace formlab {

enum class WeightKind { flat, radial };

/// Integration weight for the reduced one-dimensional problem: flat measure
/// dx, or the surface factor |S^{n-1}| r^{n-1} dr of an n-dimensional radial
/// reduction (the origin is never part of a radial mesh).
struct Weight {
  WeightKind kind = WeightKind::flat;
  int dim = 1;

  static Weight flat() { return {WeightKind::flat, 1}; }
  static Weight radial(int n);

  double sphere_factor() const;  // |S^{n-1}|, 1 for flat
  double operator()(double r) const;

  nlohmann::json to_json() const;
  static Weight from_json(const nlohmann::json& j);
};

/// Immutable 1D mesh (strictly increasing nodes) plus its weight.
class Mesh {
 public:
  Mesh() = default;

  static Mesh uniform(double a, double b, int elements, Weight w = Weight::flat());
  /// Geometrically graded toward the inner endpoint; adjacent element lengths
  /// never exceed ratio_cap. ratio_cap <= 1 yields a uniform mesh.
  static Mesh graded(double a, double b, int elements, Weight w, double ratio_cap = 1.05);
  static Mesh from_nodes(std::vector<double> nodes, Weight w);

  bool valid() const { return static_cast<bool>(d_); }
  std::span<const double> nodes() const;
  std::size_t node_count() const;
  std::size_t element_count() const;
  double a() const;
  double b() const;
  double node(std::size_t i) const;
  double h(std::size_t element) const;
  double max_h() const;
  const Weight& weight() const;

  /// Element containing r (clamped to the extent within a small tolerance).
  std::size_t element_of(double r) const;

  bool same_nodes(const Mesh& other) const;

  nlohmann::json to_json() const;
  static Mesh from_json(const nlohmann::json& j);

 private:
  struct Data {
    std::vector<double> nodes;
    Weight weight;
    double max_h = 0.0;
  };
  std::shared_ptr<const Data> d_;
};

/// Piecewise-linear nodal field on a mesh.
struct Field {
  Mesh mesh;
  std::vector<double> values;

  Field() = default;
  Field(Mesh m, std::vector<double> v);
  static Field sample(const Mesh& m, const std::function<double(double)>& f);
  static Field constant(const Mesh& m, double c);

  std::size_t size() const { return values.size(); }
  double eval(double r) const;               // P1 interpolation
  double slope(std::size_t element) const;   // elementwise gradient
  double slope_at(double r) const;           // gradient of the element containing r
  double min_value() const;
  double max_abs() const;
  bool finite() const;
};

/// Weighted integral over the whole mesh, 3-point Gauss per element
/// (exact for polynomials of degree <= 5 per element against a flat weight).
double integrate(const Mesh& m, const std::function<double(double)>& f,
                 par::Exec ex = par::Exec::parallel);
double integrate(const Field& f, par::Exec ex = par::Exec::parallel);

/// Weighted integral over [lo, hi]; elements are clipped at the endpoints so
/// piecewise-polynomial integrands stay exactly integrated.
double integrate_interval(const Mesh& m, double lo, double hi,
                          const std::function<double(double)>& f,
                          par::Exec ex = par::Exec::serial);

/// Weighted average over [lo, hi].
double weighted_average(const Mesh& m, double lo, double hi,
                        const std::function<double(double)>& f);

struct Ball {
  double center = 0.0;
  double radius = 0.0;
  double lo() const { return center - radius; }
  double hi() const { return center + radius; }
};

/// Deterministic ball lattice over a subdomain: dyadic radii descending from
/// the largest admissible one, centers on nested dyadic sub-lattices (at most
/// 64 per radius, ordered left to right). The enlarged ball
/// (center - enlargement*r, center + enlargement*r) always stays inside U.
struct BallScan {
  double lo = 0.0, hi = 0.0;
  int enlargement = 2;
  std::vector<Ball> balls;
};

BallScan enumerate_balls(const Mesh& m, double lo, double hi, int enlargement,
                         int target_count);

/// Nested interior subdomains exhausting (outer_a, outer_b), with the
/// per-level mollification radii eps_j = min(eps_{j-1}/2, d_j/2, 2^{-j})
/// where d_j is the gap to the next level (eps_0 = 1).
struct ExhaustionSpec {
  double outer_a = 0.0, outer_b = 0.0;
  struct Level {
    double a = 0.0, b = 0.0, eps = 0.0;
  };
  std::vector<Level> levels;
};

ExhaustionSpec build_exhaustion(double a, double b, int levels);

}  // namespace formlab
