#include "shapeband/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "shapeband/error.hpp"

namespace shapeband {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr int kMaxDepth = 18;
// Absolute error target of each one-dimensional integral, shared out over
// subintervals in proportion to their length.
constexpr double kAbsTolerance = 1e-11;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

double bisect(const std::function<double(double)>& fn, double a, double b, double tol, int depth) {
  double err = 0.0;
  const double est = gauss_kronrod<double, 15>::integrate(fn, a, b, 0, 0.0, &err);
  // The floor keeps rounding noise in the error estimate from forcing splits.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(est);
  if (depth == 0 || err <= std::max(tol, floor)) return est;
  const double mid = 0.5 * (a + b);
  return bisect(fn, a, mid, 0.5 * tol, depth - 1) + bisect(fn, mid, b, 0.5 * tol, depth - 1);
}

double adaptive(const std::function<double(double)>& fn, double a, double b, std::span<const double> cuts) {
  if (!(b > a)) return 0.0;
  std::vector<double> edges{a};
  for (double c : cuts) {
    if (c > a && c < b) edges.push_back(c);
  }
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double share = kAbsTolerance * (edges[i + 1] - edges[i]) / (b - a);
    total += bisect(fn, edges[i], edges[i + 1], share, kMaxDepth);
  }
  return total;
}

struct NestedIntegrator {
  const Kernel& kernel;
  const PointFunction& g;
  const std::vector<std::vector<double>>& breakpoints;
  std::vector<double> u;

  std::pair<double, double> limits(std::size_t axis) const {
    double partial = 0.0;
    switch (kernel.support()) {
      case Support::positive_simplex:
        for (std::size_t k = 0; k < axis; ++k) partial += u[k];
        return {0.0, 1.0 - partial};
      case Support::negative_simplex:
        for (std::size_t k = 0; k < axis; ++k) partial += u[k];
        return {-1.0 - partial, 0.0};
      case Support::unit_ball: {
        for (std::size_t k = 0; k < axis; ++k) partial += u[k] * u[k];
        const double r = std::sqrt(std::max(0.0, 1.0 - partial));
        return {-r, r};
      }
      case Support::cube:
        break;
    }
    return {-1.0, 1.0};
  }

  double integrate(std::size_t axis) {
    const auto [a, b] = limits(axis);
    std::vector<double> cuts;
    if (axis < breakpoints.size()) cuts = breakpoints[axis];
    if (kernel.support() == Support::unit_ball || kernel.support() == Support::cube) cuts.push_back(0.0);
    // A jump on a later axis meets the slanted simplex face where the
    // current coordinate equals the remaining room; the outer integrand has a
    // kink there.
    if (kernel.support() == Support::positive_simplex || kernel.support() == Support::negative_simplex) {
      const double edge = kernel.support() == Support::positive_simplex ? 1.0 : -1.0;
      double partial = 0.0;
      for (std::size_t k = 0; k < axis; ++k) partial += u[k];
      for (std::size_t later = axis + 1; later < breakpoints.size(); ++later) {
        for (double c : breakpoints[later]) cuts.push_back(edge - partial - c);
      }
    }
    const bool innermost = axis + 1 == u.size();
    auto fn = [this, axis, innermost](double x) {
      u[axis] = x;
      if (innermost) return g(u) * kernel(u);
      return integrate(axis + 1);
    };
    return adaptive(fn, a, b, cuts);
  }
};

}  // namespace

std::string to_string(KernelId id) {
  switch (id) {
    case KernelId::iso_lower: return "iso_lower";
    case KernelId::iso_upper: return "iso_upper";
    case KernelId::cvx_lower: return "cvx_lower";
    case KernelId::cvx_upper: return "cvx_upper";
    case KernelId::custom: return "custom";
  }
  return "unknown";
}

std::string to_string(ShapeClass cls) { return cls == ShapeClass::isotonic ? "isotonic" : "convex"; }

ShapeClass parse_shape_class(std::string_view text) {
  if (text == "isotonic" || text == "iso" || text == "monotone") return ShapeClass::isotonic;
  if (text == "convex" || text == "cvx") return ShapeClass::convex;
  throw ValidationError("class", "expected 'isotonic' or 'convex', got '" + std::string(text) + "'");
}

double unit_sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

double radial_integral(int d, const std::function<double(double)>& q) {
  const auto integrand = [&](double r) { return q(r) * std::pow(r, d - 1); };
  return unit_sphere_area(d) * adaptive(integrand, 0.0, 1.0, {});
}

Kernel::Kernel(KernelId id, int d) : id_(id), d_(d), name_(to_string(id)) {
  if (id == KernelId::custom) throw ValidationError("kernel", "use Kernel::custom for user-supplied kernels");
  if (d < 1) throw ValidationError("d", "kernel dimension must be positive");
  compute_functionals();
}

Kernel::Kernel(int d, PointFunction fn, std::string name)
    : id_(KernelId::custom), d_(d), name_(std::move(name)), custom_(std::move(fn)) {
  if (d < 1) throw ValidationError("d", "kernel dimension must be positive");
  compute_functionals();
}

Kernel Kernel::custom(int d, PointFunction fn, std::string name) { return Kernel(d, std::move(fn), std::move(name)); }

Support Kernel::support() const noexcept {
  switch (id_) {
    case KernelId::iso_lower: return Support::negative_simplex;
    case KernelId::iso_upper: return Support::positive_simplex;
    case KernelId::cvx_lower:
    case KernelId::cvx_upper: return Support::unit_ball;
    case KernelId::custom: break;
  }
  return Support::cube;
}

double Kernel::radial(double r) const {
  if (r < 0.0 || r > 1.0) return 0.0;
  const double dd = d_;
  switch (id_) {
    case KernelId::cvx_upper: return 1.0 - r * r;
    case KernelId::cvx_lower: return 1.0 - (2.0 * dd + 4.0) / (dd + 1.0) * r + (dd + 3.0) / (dd + 1.0) * r * r;
    default: break;
  }
  throw ValidationError("kernel", name_ + " is not radial");
}

double Kernel::operator()(std::span<const double> x) const {
  switch (id_) {
    case KernelId::iso_upper: {
      double s = 0.0;
      for (double v : x) {
        if (v < 0.0) return 0.0;
        s += v;
      }
      return s <= 1.0 ? 1.0 - s : 0.0;
    }
    case KernelId::iso_lower: {
      double s = 0.0;
      for (double v : x) {
        if (v > 0.0) return 0.0;
        s += v;
      }
      return s >= -1.0 ? 1.0 + s : 0.0;
    }
    case KernelId::cvx_lower:
    case KernelId::cvx_upper: {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      if (r2 > 1.0) return 0.0;
      return radial(std::sqrt(r2));
    }
    case KernelId::custom:
      for (double v : x) {
        if (v < -1.0 || v > 1.0) return 0.0;
      }
      return custom_(x);
  }
  return 0.0;
}

void Kernel::compute_functionals() {
  switch (id_) {
    case KernelId::iso_lower:
    case KernelId::iso_upper:
      l2_norm_sq_ = 2.0 / factorial(d_ + 2);
      mean_ = 1.0 / factorial(d_ + 1);
      break;
    case KernelId::cvx_lower:
    case KernelId::cvx_upper:
      l2_norm_sq_ = radial_integral(d_, [this](double r) { return radial(r) * radial(r); });
      mean_ = radial_integral(d_, [this](double r) { return radial(r); });
      break;
    case KernelId::custom: {
      const PointFunction one = [](std::span<const double>) { return 1.0; };
      const PointFunction self = [this](std::span<const double> u) { return (*this)(u); };
      mean_ = integrate_against(*this, one);
      l2_norm_sq_ = integrate_against(*this, self);
      break;
    }
  }
  if (!(mean_ > 0.0) || !std::isfinite(mean_)) {
    throw KernelValidityError("kernel " + name_ + " has non-positive mass " + format_double(mean_));
  }
  if (!std::isfinite(l2_norm_sq_)) throw KernelValidityError("kernel " + name_ + " is not square integrable");
}

KernelPair KernelPair::for_class(ShapeClass cls, int d) {
  if (cls == ShapeClass::isotonic) {
    return {cls, Kernel(KernelId::iso_lower, d), Kernel(KernelId::iso_upper, d)};
  }
  return {cls, Kernel(KernelId::cvx_lower, d), Kernel(KernelId::cvx_upper, d)};
}

double integrate_against(const Kernel& kernel, const PointFunction& g, const std::vector<std::vector<double>>& breakpoints) {
  bool has_breaks = false;
  for (const auto& b : breakpoints) has_breaks = has_breaks || !b.empty();
  if (kernel.support() == Support::unit_ball && kernel.dimension() == 2 && !has_breaks) {
    // Polar coordinates: psi is a polynomial in r and smooth g gives a
    // smooth periodic integrand in the angle.
    std::vector<double> x(2);
    const auto ring = [&](double r) {
      const double k = kernel.radial(r) * r;
      if (k == 0.0) return 0.0;
      return k * adaptive(
                     [&](double theta) {
                       x[0] = r * std::cos(theta);
                       x[1] = r * std::sin(theta);
                       return g(x);
                     },
                     0.0, 2.0 * std::numbers::pi, {});
    };
    return adaptive(ring, 0.0, 1.0, {});
  }
  NestedIntegrator integrator{kernel, g, breakpoints, std::vector<double>(static_cast<std::size_t>(kernel.dimension()))};
  return integrator.integrate(0);
}

std::size_t minimum_window_count(int d) {
  std::size_t c = 1;
  for (int i = 0; i < d; ++i) c *= 3;
  return c;
}

double stencil_weight(const Kernel& kernel, std::span<const int> offset, std::span<const int> steps) {
  double u[8];
  std::vector<double> heap;
  double* p = u;
  if (offset.size() > 8) {
    heap.resize(offset.size());
    p = heap.data();
  }
  for (std::size_t i = 0; i < offset.size(); ++i) p[i] = static_cast<double>(offset[i]) / steps[i];
  return kernel(std::span<const double>(p, offset.size()));
}

WindowWeights window_weights(const Kernel& kernel, const Window& window, const GridDesign& grid) {
  WindowWeights out;
  const auto h = window.bandwidth.values(grid.m());
  const auto d = static_cast<std::size_t>(grid.d());
  std::vector<double> u(d);
  out.weights.reserve(window.members.size());
  for (std::size_t idx : window.members) {
    const auto x = grid.point(idx);
    for (std::size_t i = 0; i < d; ++i) u[i] = (x[i] - grid.coordinate(window.center[i])) / h[i];
    const double w = kernel(u);
    out.weights.push_back(w);
    out.sum += w;
    out.sum_sq += w * w;
  }
  out.count = window.members.size();
  out.usable = out.count >= minimum_window_count(grid.d()) && out.sum > 0.0;
  return out;
}

double smoothed_mean(const Kernel& kernel, const AnalyticFunction& f, const BiasProbe& probe) {
  const auto d = static_cast<std::size_t>(kernel.dimension());
  if (probe.t.size() != d || probe.h.size() != d) throw ValidationError("probe", "dimension mismatch");
  std::vector<std::vector<double>> cuts(d);
  for (std::size_t i = 0; i < d && i < f.jumps.size(); ++i) {
    for (double jump : f.jumps[i]) cuts[i].push_back((jump - probe.t[i]) / probe.h[i]);
  }
  std::vector<double> x(d);
  const PointFunction shifted = [&](std::span<const double> u) {
    for (std::size_t i = 0; i < d; ++i) x[i] = probe.t[i] + probe.h[i] * u[i];
    return f.eval(x);
  };
  return integrate_against(kernel, shifted, cuts) / kernel.mean();
}

BiasReport check_bias_condition(const KernelPair& pair, const AnalyticFunction& f, std::span<const BiasProbe> probes) {
  BiasReport report;
  bool first = true;
  for (const auto& probe : probes) {
    const double ft = f.eval(probe.t);
    const double lower_margin = ft - smoothed_mean(pair.lower, f, probe);
    const double upper_margin = smoothed_mean(pair.upper, f, probe) - ft;
    if (first) {
      report.worst_lower_margin = lower_margin;
      report.worst_upper_margin = upper_margin;
      first = false;
    } else {
      report.worst_lower_margin = std::min(report.worst_lower_margin, lower_margin);
      report.worst_upper_margin = std::min(report.worst_upper_margin, upper_margin);
    }
    if (lower_margin < -kBiasTolerance || upper_margin < -kBiasTolerance) {
      report.passed = false;
      report.violations.push_back({probe, lower_margin, upper_margin});
    }
  }
  return report;
}

}  // namespace shapeband
