#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracle.hpp"
#include "shapeband/bands.hpp"
#include "shapeband/error.hpp"

using namespace shapeband;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> noisy(const GridDesign& g, const std::function<double(std::span<const double>)>& f,
                          std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nrm;
  std::vector<double> y(g.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(g.point(i)) + sigma * nrm(rng);
  return y;
}

Calibration fake_calibration(const GridDesign& g, ShapeClass cls, BandwidthPolicy policy, double kappa) {
  Calibration cal;
  cal.alpha = 0.05;
  cal.kappa = kappa;
  cal.nsim = 1000;
  cal.m = g.m();
  cal.d = g.d();
  cal.kernel_pair = cls;
  cal.policy = policy;
  return cal;
}

}  // namespace

TEST_CASE("bands equal a brute-force evaluation") {
  struct Case {
    int m, d;
    ShapeClass cls;
    oracle::K lo, up;
  };
  const Case cases[] = {{6, 1, ShapeClass::isotonic, oracle::K::iso_lower, oracle::K::iso_upper},
                        {6, 1, ShapeClass::convex, oracle::K::cvx_lower, oracle::K::cvx_upper},
                        {9, 1, ShapeClass::convex, oracle::K::cvx_lower, oracle::K::cvx_upper},
                        {6, 2, ShapeClass::isotonic, oracle::K::iso_lower, oracle::K::iso_upper},
                        {7, 2, ShapeClass::convex, oracle::K::cvx_lower, oracle::K::cvx_upper}};
  for (const auto& c : cases) {
    const GridDesign g(c.m, c.d);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto y = noisy(g, [](std::span<const double> x) { return x[0]; }, seed);
      const double kappa = 1.3, sigma = 0.8;
      const BandBuilder builder(g, KernelPair::for_class(c.cls, c.d), BandwidthPolicy::full);
      const auto band = builder.build(Field(g, y), kappa, sigma);
      const auto ref = oracle::bands(y, c.m, c.d, false, c.lo, c.up, kappa, sigma);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (band.vacuous[i]) {
          CHECK(band.lower[i] == -kInf);
          CHECK(band.upper[i] == kInf);
          CHECK(ref.lower[i] == -kInf);
          continue;
        }
        CHECK(std::abs(band.lower[i] - ref.lower[i]) < 1e-10);
        CHECK(std::abs(band.upper[i] - ref.upper[i]) < 1e-10);
      }
    }
  }
}

TEST_CASE("vacuous points are the outer ring") {
  const GridDesign g(6, 2);
  const BandBuilder builder(g, KernelPair::for_class(ShapeClass::isotonic, 2), BandwidthPolicy::full);
  const auto band = builder.build(Field::constant(g, 0.0), 2.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto k = g.tuple(i);
    const bool edge = k[0] == 1 || k[0] == 6 || k[1] == 1 || k[1] == 6;
    CHECK(static_cast<bool>(band.vacuous[i]) == edge);
    if (!edge) {
      CHECK(std::isfinite(band.lower[i]));
      CHECK(std::isfinite(band.upper[i]));
      CHECK(band.lower_bandwidth[i].steps.size() == 2);
      CHECK(admissible(g, k, band.lower_bandwidth[i]));
      CHECK(admissible(g, k, band.upper_bandwidth[i]));
    }
  }
  CHECK(band.vacuous_count() == 20);
}

TEST_CASE("zero-noise data is covered") {
  for (auto cls : {ShapeClass::isotonic, ShapeClass::convex}) {
    const GridDesign g(10, 2);
    const BandBuilder builder(g, KernelPair::for_class(cls, 2), BandwidthPolicy::full);
    const auto zero = Field::constant(g, 0.0);
    const auto band = builder.build(zero, 1.5);
    CHECK(check_coverage(band, zero).covered);
    const auto w = width_profile(band, [](std::span<const double>) { return true; });
    CHECK(w.min > 0.0);
    CHECK(w.max >= w.median);
  }
}

TEST_CASE("per-window bounds never beat the optimised band") {
  const GridDesign g(7, 2);
  const auto y = noisy(g, [](std::span<const double> x) { return x[0] * x[1]; }, 12);
  const Field f(g, y);
  const double kappa = 1.1;
  for (auto cls : {ShapeClass::isotonic, ShapeClass::convex}) {
    const auto pair = KernelPair::for_class(cls, 2);
    const BandBuilder builder(g, pair, BandwidthPolicy::full);
    const auto band = builder.build(f, kappa);
    enumerate_windows(g, BandwidthPolicy::full, [&](const Window& w) {
      const auto c = g.flat(w.center);
      const double pen = window_penalty(w.count(), g.size());
      for (int side = 0; side < 2; ++side) {
        const auto ww = window_weights(side == 0 ? pair.lower : pair.upper, w, g);
        if (!ww.usable) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < w.members.size(); ++j) s += y[w.members[j]] * ww.weights[j];
        const double half = (kappa + pen) * std::sqrt(ww.sum_sq) / ww.sum;
        if (side == 0) CHECK(s / ww.sum - half <= band.lower[c] + 1e-12);
        else CHECK(s / ww.sum + half >= band.upper[c] - 1e-12);
      }
    });
  }
}

TEST_CASE("larger kappa never shrinks the band") {
  const GridDesign g(12, 2);
  const Field y(g, noisy(g, [](std::span<const double> x) { return x[0] + x[1]; }, 3));
  const BandBuilder builder(g, KernelPair::for_class(ShapeClass::isotonic, 2), BandwidthPolicy::full);
  const auto a = builder.build(y, 1.0);
  const auto b = builder.build(y, 1.8);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(b.lower[i] <= a.lower[i]);
    CHECK(b.upper[i] >= a.upper[i]);
  }
}

TEST_CASE("sigma scaling") {
  const GridDesign g(10, 2);
  const auto y = noisy(g, [](std::span<const double> x) { return x[0]; }, 21);
  std::vector<double> y2(y);
  for (auto& v : y2) v *= 2.0;
  const BandBuilder builder(g, KernelPair::for_class(ShapeClass::convex, 2), BandwidthPolicy::full);
  const auto a = builder.build(Field(g, y), 1.4, 1.0);
  const auto b = builder.build(Field(g, y2), 1.4, 2.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (a.vacuous[i]) continue;
    CHECK(b.lower[i] == doctest::Approx(2.0 * a.lower[i]).epsilon(1e-12));
    CHECK(b.upper[i] - b.lower[i] == doctest::Approx(2.0 * (a.upper[i] - a.lower[i])).epsilon(1e-12));
  }
  CHECK_THROWS_AS(builder.build(Field(g, y), 1.4, 0.0), ValidationError);
}

TEST_CASE("coverage check") {
  const GridDesign g(8, 2);
  const Field y(g, noisy(g, [](std::span<const double>) { return 0.0; }, 1));
  const BandBuilder builder(g, KernelPair::for_class(ShapeClass::isotonic, 2), BandwidthPolicy::full);
  const auto band = builder.build(y, 2.0);
  double hi = -kInf, lo = kInf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (band.vacuous[i]) continue;
    hi = std::max(hi, band.upper[i]);
    lo = std::min(lo, band.lower[i]);
  }
  const auto shifted = Field::constant(g, 10.0 * (hi - lo) + hi);
  const auto check = check_coverage(band, shifted);
  CHECK_FALSE(check.covered);
  CHECK(check.violations.size() == g.size() - band.vacuous_count());
  for (const auto& v : check.violations) CHECK(v.upper_margin < 0.0);
}

TEST_CASE("calibration context is enforced") {
  const GridDesign g(8, 2);
  const BandBuilder builder(g, KernelPair::for_class(ShapeClass::isotonic, 2), BandwidthPolicy::full);
  const auto y = Field::constant(g, 0.0);
  CHECK_NOTHROW(builder.build(y, fake_calibration(g, ShapeClass::isotonic, BandwidthPolicy::full, 2.0)));
  CHECK_THROWS_AS(builder.build(y, fake_calibration(g, ShapeClass::convex, BandwidthPolicy::full, 2.0)),
                  ContextMismatchError);
  CHECK_THROWS_AS(builder.build(y, fake_calibration(g, ShapeClass::isotonic, BandwidthPolicy::dyadic, 2.0)),
                  ContextMismatchError);
  CHECK_THROWS_AS(builder.build(y, fake_calibration(GridDesign(9, 2), ShapeClass::isotonic, BandwidthPolicy::full, 2.0)),
                  ContextMismatchError);
  CHECK_THROWS_AS(build_bands(y, KernelPair::for_class(ShapeClass::isotonic, 2),
                              fake_calibration(g, ShapeClass::isotonic, BandwidthPolicy::full, 2.0),
                              BandwidthPolicy::dyadic),
                  ContextMismatchError);
}

TEST_CASE("interior points without usable windows are data errors") {
  const GridDesign g(6, 1);
  // Zero at every lattice offset u in {-1, -1/2, 0, 1/2, 1, ...}.
  const auto hollow = Kernel::custom(1, [](std::span<const double> x) {
    const double a = std::abs(x[0]);
    return a > 0.05 && a < 0.3 ? 1.0 : 0.0;
  });
  const KernelPair pair{ShapeClass::isotonic, hollow, hollow};
  const BandBuilder builder(g, pair, BandwidthPolicy::full);
  CHECK_THROWS_AS(builder.build(Field::constant(g, 0.0), 1.0), DataError);
}

TEST_CASE("width profile") {
  const GridDesign g(10, 2);
  const Field y(g, noisy(g, [](std::span<const double> x) { return x[0]; }, 5));
  const BandBuilder builder(g, KernelPair::for_class(ShapeClass::isotonic, 2), BandwidthPolicy::full);
  const auto band = builder.build(y, 2.0);
  const auto left = [](std::span<const double> x) { return x[0] <= 0.5; };
  const auto right = [](std::span<const double> x) { return x[0] > 0.5; };
  const auto all = [](std::span<const double>) { return true; };
  const auto a = width_profile(band, left), b = width_profile(band, right), u = width_profile(band, all);
  CHECK(std::max(a.max, b.max) == u.max);
  CHECK(std::min(a.min, b.min) == u.min);
  CHECK(a.points + b.points == u.points);
  CHECK_THROWS_AS(width_profile(band, [](std::span<const double> x) { return x[0] < 0.1; }), EmptyRegionError);
}

TEST_CASE("band csv round trip") {
  const GridDesign g(6, 2);
  const Field y(g, noisy(g, [](std::span<const double> x) { return x[1]; }, 2));
  const BandBuilder builder(g, KernelPair::for_class(ShapeClass::convex, 2), BandwidthPolicy::full);
  const auto band = builder.build(y, 1.7);
  std::stringstream ss;
  write_band_csv(ss, band);
  const auto text = ss.str();
  CHECK(text.rfind("x1,x2,lower,upper,width,argmax_h1_lower,argmax_h2_lower,argmin_h1_upper,argmin_h2_upper\n", 0) == 0);
  CHECK(text.find("\n0.16666666666666666,0.16666666666666666,-inf,inf,inf,nan,nan,nan,nan\n") != std::string::npos);
  const auto back = read_band_csv(ss, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(back.lower[i] == band.lower[i]);
    CHECK(back.upper[i] == band.upper[i]);
    CHECK(back.vacuous[i] == band.vacuous[i]);
    CHECK(back.lower_bandwidth[i] == band.lower_bandwidth[i]);
    CHECK(back.upper_bandwidth[i] == band.upper_bandwidth[i]);
  }
  std::ostringstream plot;
  write_plot_data(plot, band, &y);
  CHECK(plot.str().rfind("x1,x2,lower,upper,truth\n", 0) == 0);
}

TEST_CASE("difference-based sigma estimate") {
  const GridDesign g(50, 2);
  const Field y(g, noisy(g, [](std::span<const double> x) { return x[0] + x[1]; }, 9, 2.0));
  CHECK(estimate_sigma_differences(y) == doctest::Approx(2.0).epsilon(0.05));
}
