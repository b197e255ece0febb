#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapeband/grid.hpp"

namespace shapeband {

enum class KernelId { iso_lower, iso_upper, cvx_lower, cvx_upper, custom };

enum class ShapeClass { isotonic, convex };

std::string to_string(KernelId id);
std::string to_string(ShapeClass cls);
ShapeClass parse_shape_class(std::string_view text);

enum class Support { negative_simplex, positive_simplex, unit_ball, cube };

using PointFunction = std::function<double(std::span<const double>)>;

/// Kernel function on R^d vanishing outside [-1,1]^d with positive mass.
///
/// The four built-in kernels satisfy the two-sided bias condition for their
/// class: the simplex kernels for coordinate-wise nondecreasing functions,
/// the radial kernels for convex functions. A custom kernel is accepted
/// behind the same interface but is flagged as unverified; bounded
/// Hardy-Krause variation is assumed, not checked.
class Kernel {
 public:
  Kernel(KernelId id, int d);
  static Kernel custom(int d, PointFunction fn, std::string name = "custom");

  KernelId id() const noexcept { return id_; }
  int dimension() const noexcept { return d_; }
  Support support() const noexcept;
  const std::string& name() const noexcept { return name_; }
  bool bias_condition_verified() const noexcept { return id_ != KernelId::custom; }

  double operator()(std::span<const double> x) const;
  double eval(std::span<const double> x) const { return (*this)(x); }

  /// psi as a function of |x| for the radial kernels.
  double radial(double r) const;

  /// Integral of psi^2 over R^d.
  double l2_norm_sq() const noexcept { return l2_norm_sq_; }
  /// Integral of psi over R^d; always > 0.
  double mean() const noexcept { return mean_; }

 private:
  Kernel(int d, PointFunction fn, std::string name);
  void compute_functionals();

  KernelId id_;
  int d_;
  std::string name_;
  PointFunction custom_;
  double l2_norm_sq_ = 0.0;
  double mean_ = 0.0;
};

struct KernelPair {
  ShapeClass cls;
  Kernel lower;
  Kernel upper;

  static KernelPair for_class(ShapeClass cls, int d);
};

/// Surface area of the unit sphere in R^d.
double unit_sphere_area(int d);

/// Integral of g(u) * psi(u) over the kernel support, by nested adaptive
/// Gauss-Kronrod quadrature in Cartesian coordinates. `breakpoints[i]` lists
/// values of u_i where g may jump; the axis integrals are split there.
double integrate_against(const Kernel& kernel, const PointFunction& g,
                         const std::vector<std::vector<double>>& breakpoints = {});

/// One-dimensional radial integral Vol(S^{d-1}) * int_0^1 q(r) r^{d-1} dr.
double radial_integral(int d, const std::function<double(double)>& q);

/// Discretised kernel weights of one window, aligned with `window.members`.
struct WindowWeights {
  std::vector<double> weights;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
  bool usable = false;
};

/// Windows with fewer members than this, or with non-positive mass, are
/// excluded from estimation.
std::size_t minimum_window_count(int d);

/// Weight of the grid point `offset` steps away from the centre for bandwidth
/// `steps`; i.e. psi(offset_i / steps_i).
double stencil_weight(const Kernel& kernel, std::span<const int> offset, std::span<const int> steps);

WindowWeights window_weights(const Kernel& kernel, const Window& window, const GridDesign& grid);

// ---------------------------------------------------------------------------
// Bias-condition checker

/// Closed-form test function with optional per-axis jump locations (in x-space).
struct AnalyticFunction {
  PointFunction eval;
  ShapeClass cls;
  std::vector<std::vector<double>> jumps;
};

struct BiasProbe {
  std::vector<double> t;
  std::vector<double> h;
};

struct BiasViolation {
  BiasProbe probe;
  double lower_margin;
  double upper_margin;
};

struct BiasReport {
  bool passed = true;
  double worst_lower_margin = 0.0;  // min over probes of f(t) - E f_l(t)
  double worst_upper_margin = 0.0;  // min over probes of E f_u(t) - f(t)
  std::vector<BiasViolation> violations;
};

inline constexpr double kBiasTolerance = 1e-6;

/// E f_h(t) = <f(t + h*.), psi> / <1, psi> by quadrature.
double smoothed_mean(const Kernel& kernel, const AnalyticFunction& f, const BiasProbe& probe);

/// Checks E f_l(t) <= f(t) <= E f_u(t) at every probe.
BiasReport check_bias_condition(const KernelPair& pair, const AnalyticFunction& f, std::span<const BiasProbe> probes);

}  // namespace shapeband
