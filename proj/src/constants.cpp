#include "shapeband/constants.hpp"

#include <cmath>
#include <vector>

#include "shapeband/error.hpp"

namespace shapeband {

namespace {

// LU determinant with partial pivoting; d is at most a handful here.
double determinant(std::vector<double> a, int d) {
  double det = 1.0;
  const auto n = static_cast<std::size_t>(d);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (a[pivot * n + col] == 0.0) return 0.0;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      det = -det;
    }
    det *= a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
    }
  }
  return det;
}

}  // namespace

OptimalityConstants optimal_constants(ShapeClass cls, int d) {
  if (d < 1) throw ValidationError("d", "dimension must be positive");
  const auto pair = KernelPair::for_class(cls, d);
  const double dd = d;
  OptimalityConstants c;
  c.cls = cls;
  c.d = d;
  if (cls == ShapeClass::isotonic) {
    c.rate_exponent = 1.0 / (2.0 + dd);
    const double scale = (dd + 2.0) / (2.0 * dd);
    c.delta_lower = std::pow(scale * pair.lower.l2_norm_sq(), -c.rate_exponent);
    c.delta_upper = std::pow(scale * pair.upper.l2_norm_sq(), -c.rate_exponent);
    return c;
  }
  c.rate_exponent = 2.0 / (4.0 + dd);
  c.alpha_d = std::sqrt(2.0 * (dd + 3.0) / (dd + 1.0));
  const double scale = (dd + 4.0) / (2.0 * dd);
  c.delta_lower = std::pow(scale * std::pow(c.alpha_d, dd) * pair.lower.l2_norm_sq(), -c.rate_exponent);
  c.delta_upper = std::pow(scale * std::pow(std::sqrt(2.0), dd) * pair.upper.l2_norm_sq(), -c.rate_exponent);
  const double inflation = std::pow(dd, dd / (dd + 4.0));
  c.delta_lower_star = c.delta_lower * inflation;
  c.delta_upper_star = c.delta_upper * inflation;
  return c;
}

double rate_factor(double n, double exponent) { return std::pow(std::log(std::exp(1.0) * n) / n, exponent); }

double isotonic_curvature(std::span<const double> gradient) {
  if (gradient.empty()) throw ValidationError("gradient", "empty gradient");
  double log_sum = 0.0;
  for (double g : gradient) {
    if (!(g > 0.0)) throw ZeroCurvatureError("gradient component is not positive at t0");
    log_sum += std::log(g);
  }
  return std::exp(log_sum / static_cast<double>(gradient.size()));
}

LocalCurvature convex_curvature(std::span<const double> hessian, int d) {
  const auto n = static_cast<std::size_t>(d);
  if (hessian.size() != n * n) throw ValidationError("hessian", "expected a d x d matrix");
  LocalCurvature out;
  const double det = determinant(std::vector<double>(hessian.begin(), hessian.end()), d);
  out.l2 = det > 0.0 ? std::pow(det, 1.0 / d) : 0.0;
  double log_diag = 0.0;
  bool diag_positive = true;
  out.diagonal_hessian = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = hessian[i * n + i];
    if (!(h > 0.0)) diag_positive = false;
    else log_diag += std::log(h);
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && hessian[i * n + j] != 0.0) out.diagonal_hessian = false;
    }
  }
  out.l2_star = diag_positive ? std::exp(log_diag / d) : 0.0;
  return out;
}

WidthPrediction predicted_width_isotonic(std::span<const double> gradient, double n) {
  const int d = static_cast<int>(gradient.size());
  const auto c = optimal_constants(ShapeClass::isotonic, d);
  WidthPrediction p;
  p.curvature.l1 = isotonic_curvature(gradient);
  const double scale = std::pow(p.curvature.l1, d / (2.0 + d)) * rate_factor(n, c.rate_exponent);
  p.lower = c.delta_lower * scale;
  p.upper = c.delta_upper * scale;
  p.diagonal_case = true;
  return p;
}

WidthPrediction predicted_width_convex(std::span<const double> hessian, int d, double n) {
  const auto c = optimal_constants(ShapeClass::convex, d);
  WidthPrediction p;
  p.curvature = convex_curvature(hessian, d);
  p.diagonal_case = p.curvature.diagonal_hessian;
  const double power = d / (4.0 + d);
  const double rho = rate_factor(n, c.rate_exponent);
  if (p.diagonal_case) {
    if (!(p.curvature.l2 > 0.0)) throw ZeroCurvatureError("Hessian determinant vanishes at t0");
    const double scale = std::pow(p.curvature.l2, power) * rho;
    p.lower = c.delta_lower * scale;
    p.upper = c.delta_upper * scale;
  } else {
    if (!(p.curvature.l2 > 0.0) || !(p.curvature.l2_star > 0.0)) {
      throw ZeroCurvatureError("Hessian is singular at t0");
    }
    const double scale = std::pow(p.curvature.l2_star, power) * rho;
    p.lower = c.delta_lower_star * scale;
    p.upper = c.delta_upper_star * scale;
  }
  return p;
}

}  // namespace shapeband
