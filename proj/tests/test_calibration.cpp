#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "shapeband/calibration.hpp"
#include "shapeband/error.hpp"
#include "shapeband/scan.hpp"

using namespace shapeband;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "shapeband_test_calibration";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("calibration is deterministic and thread-count independent") {
  const GridDesign g(10, 2);
  const auto a = calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 200, 17, 1);
  const auto b = calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 200, 17, 1);
  const auto c = calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 200, 17, 3);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(std::isfinite(a.kappa));
  CHECK(a.std_error > 0.0);
  const auto other = calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 200, 18, 1);
  CHECK(other.kappa != a.kappa);
}

TEST_CASE("kappa is monotone in alpha on the same replicates") {
  const GridDesign g(8, 2);
  const auto stats = null_statistics(g, ShapeClass::convex, BandwidthPolicy::full, 300, 5);
  double prev = 1e300;
  for (double alpha : {0.01, 0.05, 0.1, 0.2, 0.5}) {
    const double k = upper_order_statistic(stats, alpha);
    CHECK(k <= prev);
    prev = k;
  }
  const auto k05 = calibrate(g, ShapeClass::convex, BandwidthPolicy::full, 0.05, 300, 5);
  const auto k10 = calibrate(g, ShapeClass::convex, BandwidthPolicy::full, 0.10, 300, 5);
  CHECK(k05.kappa >= k10.kappa);
}

TEST_CASE("order statistic rank") {
  std::vector<double> v(2000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
  std::shuffle(v.begin(), v.end(), std::mt19937_64(1));
  CHECK(upper_order_statistic(v, 0.05) == 1900.0);
  CHECK(upper_order_statistic(v, 0.1) == 1800.0);
  std::vector<double> w(101);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i + 1);
  // ceil(0.95 * 101) = 96
  CHECK(upper_order_statistic(w, 0.05) == 96.0);
}

TEST_CASE("independent replicate loop reproduces kappa") {
  // Regenerates each replicate straight from the counter-based stream and
  // evaluates T* with per-call scans, then sorts.
  const GridDesign g(20, 2);
  const std::size_t nsim = 2000;
  const std::uint64_t seed = 42;
  const auto pair = KernelPair::for_class(ShapeClass::isotonic, 2);
  std::vector<double> stats(nsim);
  for (std::size_t r = 0; r < nsim; ++r) {
    Philox4x32 rng(seed, 1, static_cast<std::uint32_t>(r));
    std::normal_distribution<double> nrm(0.0, 1.0);
    std::vector<double> eps(g.size());
    for (auto& e : eps) e = nrm(rng);
    const Field f(g, eps);
    stats[r] = std::max(multiscale_statistic(f, pair.lower, 1, BandwidthPolicy::full).statistic,
                        multiscale_statistic(f, pair.upper, -1, BandwidthPolicy::full).statistic);
  }
  std::sort(stats.begin(), stats.end());
  const double expected = stats[1900 - 1];
  const auto cal = calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, nsim, seed);
  CHECK(cal.kappa > 0.0);
  CHECK(std::abs(cal.kappa - expected) < 1e-10);
}

TEST_CASE("preconditions") {
  const GridDesign g(6, 1);
  CHECK_THROWS_AS(calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 99, 1), ValidationError);
  CHECK_THROWS_AS(calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.7, 100, 1), ValidationError);
  CHECK_THROWS_AS(calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.001, 100, 1), ValidationError);
  std::vector<double> bad(150, 1.0);
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(calibration_from_statistics(bad, g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 1), DataError);
}

TEST_CASE("save and load") {
  const GridDesign g(20, 1);
  const auto cal = calibrate(g, ShapeClass::convex, BandwidthPolicy::dyadic, 0.1, 150, 99);
  const auto path = scratch("roundtrip.kv");
  save_calibration(cal, path);
  const auto back = load_calibration(path);
  CHECK(back == cal);
  CHECK(load_calibration(path, cal.context()) == cal);

  auto expected = cal.context();
  expected.m = 40;
  try {
    load_calibration(path, expected);
    FAIL("expected a context mismatch");
  } catch (const ContextMismatchError& e) {
    CHECK(e.field() == "m");
    CHECK(std::string(e.what()).find("mismatch(m)") != std::string::npos);
  }
  expected = cal.context();
  expected.policy = BandwidthPolicy::full;
  CHECK_THROWS_AS(load_calibration(path, expected), ContextMismatchError);
  expected = cal.context();
  expected.alpha = 0.05;
  CHECK_THROWS_AS(load_calibration(path, expected), ContextMismatchError);
}

TEST_CASE("tampered files are refused") {
  const GridDesign g(8, 1);
  const auto cal = calibrate(g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 100, 3);
  auto text = serialize_calibration(cal);
  CHECK(parse_calibration(text) == cal);

  auto edited = text;
  const auto pos = edited.find("nsim=100");
  REQUIRE(pos != std::string::npos);
  edited.replace(pos, 8, "nsim=900");
  CHECK_THROWS_AS(parse_calibration(edited), IntegrityError);
  CHECK_THROWS_AS(parse_calibration(text.substr(0, text.size() / 2)), IntegrityError);
  CHECK_THROWS_AS(parse_calibration("garbage"), IntegrityError);

  const auto path = scratch("tampered.kv");
  {
    std::ofstream out(path, std::ios::binary);
    out << edited;
  }
  CHECK_THROWS_AS(load_calibration(path), IntegrityError);
}

TEST_CASE("kappa survives the text form bit for bit") {
  const GridDesign g(8, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto cal = calibrate(g, ShapeClass::convex, BandwidthPolicy::full, 0.05, 100, seed);
    const auto back = parse_calibration(serialize_calibration(cal));
    CHECK(std::memcmp(&back.kappa, &cal.kappa, sizeof(double)) == 0);
    CHECK(std::memcmp(&back.std_error, &cal.std_error, sizeof(double)) == 0);
  }
}

TEST_CASE("cached calibration reuses the stored record") {
  const auto dir = scratch("cache");
  fs::remove_all(dir);
  const GridDesign g(8, 2);
  const auto a = cached_calibration(dir, g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 120, 4);
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 1);
  const auto b = cached_calibration(dir, g, ShapeClass::isotonic, BandwidthPolicy::full, 0.05, 120, 4);
  CHECK(a == b);
}

TEST_CASE("half-sample estimates agree within their bootstrap error") {
  const GridDesign g(8, 2);
  int agree = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto stats = null_statistics(g, ShapeClass::isotonic, BandwidthPolicy::full, 4000, 1000 + t);
    const std::span<const double> all(stats);
    const auto first = all.subspan(0, 2000), second = all.subspan(2000);
    const double k1 = upper_order_statistic(first, 0.05), k2 = upper_order_statistic(second, 0.05);
    const double s1 = bootstrap_quantile_se(first, 0.05, t), s2 = bootstrap_quantile_se(second, 0.05, t + 500);
    if (std::abs(k1 - k2) < 4.0 * std::sqrt(s1 * s1 + s2 * s2)) ++agree;
  }
  CHECK(agree >= 19);
}

TEST_CASE("null statistics ignore any mean shift") {
  // The calibration path consumes pure noise only: scanning (c + eps) - c
  // reproduces the stored replicate exactly.
  const GridDesign g(7, 2);
  const auto pair = KernelPair::for_class(ShapeClass::isotonic, 2);
  const auto stats = null_statistics(g, ShapeClass::isotonic, BandwidthPolicy::full, 100, 8);
  const ScanPlan plan(g, {pair.lower, pair.upper}, BandwidthPolicy::full);
  for (std::uint32_t r = 0; r < 5; ++r) {
    auto eps = standard_normal_noise(g.size(), 8, StreamPurpose::calibration, r);
    std::vector<double> shifted(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) shifted[i] = (eps[i] + 3.25) - 3.25;
    CHECK(std::abs(tstar_components(plan, shifted).value() - stats[r]) < 1e-12);
  }
}
