#pragma once

#include <optional>
#include <span>
#include <vector>

#include "shapeband/kernels.hpp"

namespace shapeband {

/// Leading constants of the minimax band width for a shape class.
struct OptimalityConstants {
  ShapeClass cls = ShapeClass::isotonic;
  int d = 1;
  double rate_exponent = 0.0;  // 1/(2+d) isotonic, 2/(4+d) convex
  double delta_lower = 0.0;
  double delta_upper = 0.0;
  // Convex only: inflated constants for non-diagonal Hessians and alpha_d.
  double delta_lower_star = 0.0;
  double delta_upper_star = 0.0;
  double alpha_d = 0.0;
};

OptimalityConstants optimal_constants(ShapeClass cls, int d);

/// rho_n = (log(e n) / n)^exponent.
double rate_factor(double n, double exponent);

/// Local curvature at t0: L1 for isotonic, L2 and L2* for convex.
struct LocalCurvature {
  double l1 = 0.0;
  double l2 = 0.0;
  double l2_star = 0.0;
  bool diagonal_hessian = false;
};

/// Geometric mean of the gradient components.
double isotonic_curvature(std::span<const double> gradient);

/// det(H)^(1/d), geometric mean of diag(H), and whether H is diagonal. `hessian` is row-major d x d.
LocalCurvature convex_curvature(std::span<const double> hessian, int d);

struct WidthPrediction {
  double lower = 0.0;  // predicted (f - lower)(t0)
  double upper = 0.0;  // predicted (upper - f)(t0)
  bool diagonal_case = false;
  LocalCurvature curvature;
};

/// Leading-order one-sided deviations Delta * L^{power} * rho_n. Throws
/// ZeroCurvatureError when the relevant curvature vanishes.
WidthPrediction predicted_width_isotonic(std::span<const double> gradient, double n);
WidthPrediction predicted_width_convex(std::span<const double> hessian, int d, double n);

}  // namespace shapeband
