#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapeband/bands.hpp"
#include "shapeband/calibration.hpp"
#include "shapeband/grid.hpp"
#include "shapeband/kernels.hpp"

namespace shapeband {

using VectorFunction = std::function<std::vector<double>(std::span<const double>)>;

/// Closed-form regression function used in simulations. Functions are defined
/// for every d; those written in x1, x2 generalise by summing over all axes.
struct TestFunction {
  std::string id;
  std::string formula;
  PointFunction eval;
  bool isotonic = false;
  bool convex = false;
  VectorFunction gradient;  // may be empty
  VectorFunction hessian;   // row-major d x d; may be empty
  std::function<int(int)> intrinsic_dimension;
  std::function<std::vector<std::vector<double>>(int)> jumps;  // per-axis discontinuities

  bool has_class(ShapeClass cls) const { return cls == ShapeClass::isotonic ? isotonic : convex; }
  AnalyticFunction analytic(ShapeClass cls, int d) const;
};

/// The eight functions of the reference simulation study.
const std::vector<TestFunction>& builtin_functions();
const TestFunction& find_function(std::string_view id);

/// Checks the class tags on a grid: isotonic means nondecreasing along every
/// axis, convex means midpoint convexity along every grid line.
bool satisfies_isotonic(const Field& values, double tol = 1e-12);
bool satisfies_convex(const Field& values, double tol = 1e-12);

/// Y_i = f(x_i) + sigma * eps_i with eps from the data substream of (seed, replicate).
Field generate_data(const TestFunction& fn, const GridDesign& grid, double sigma, std::uint64_t seed,
                    std::uint32_t replicate = 0);

/// Axis-aligned box; unspecified axes are unbounded. Bounds are inclusive.
struct RegionBox {
  std::vector<double> lo;
  std::vector<double> hi;

  bool contains(std::span<const double> x) const;
  RegionPredicate predicate() const;
  std::string to_string() const;
};

/// Parses conjunctions such as "x1<=0.3", "0.45<=x1<=0.55&x2>=0.2" or "all".
RegionBox parse_region(std::string_view text);
/// [lo, hi]^d.
RegionBox central_box(int d, double lo, double hi);

struct CoverageReport {
  std::string function;
  ShapeClass cls = ShapeClass::isotonic;
  int m = 0;
  int d = 0;
  double alpha = 0.05;
  double kappa = 0.0;
  std::size_t replicates = 0;
  std::size_t covered = 0;
  double coverage = 0.0;
  double std_error = 0.0;
  double mean_width = 0.0;    // replicate mean of the mean non-vacuous width
  double median_width = 0.0;  // replicate mean of the median non-vacuous width
};

struct StudyOptions {
  int threads = 1;
  double sigma = 1.0;
};

/// Fresh noise per replicate, bands at `cal`, coverage against f on the grid.
CoverageReport coverage_study(const TestFunction& fn, ShapeClass cls, const GridDesign& grid, std::size_t replicates,
                              const Calibration& cal, std::uint64_t seed, const StudyOptions& options = {});

using CalibrationProvider = std::function<Calibration(const GridDesign&)>;

struct RateRow {
  int m = 0;
  std::size_t n = 0;
  double median_width = 0.0;
};

struct RateReport {
  std::string function;
  ShapeClass cls = ShapeClass::isotonic;
  std::vector<RateRow> rows;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Median width over `region` per grid size (averaged over replicates) and
/// the least-squares slope of log(width) on log(n).
RateReport rate_diagnostic(const TestFunction& fn, ShapeClass cls, std::span<const int> grids, int d,
                           const RegionBox& region, std::uint64_t seed, const CalibrationProvider& calibration,
                           std::size_t replicates = 3, const StudyOptions& options = {});

/// Least-squares slope and intercept of y on x.
std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y);

struct DeviationMedians {
  double upper_gap = 0.0;  // median of (upper - f)
  double lower_gap = 0.0;  // median of (f - lower)
};
DeviationMedians deviation_medians(const BandResult& band, const Field& truth, const RegionPredicate& region);

/// A row of the reference coverage table.
struct StudyRow {
  std::string function;
  ShapeClass cls;
  int m;
};
std::vector<StudyRow> reference_table_rows();

// Key-value report records: "[coverage]" / "[rates]" sections of key=value lines.
void write_report(std::ostream& out, const CoverageReport& report);
void write_report(std::ostream& out, const RateReport& report);
std::vector<CoverageReport> read_coverage_reports(std::istream& in);
void print_coverage_table(std::ostream& out, std::span<const CoverageReport> reports);
void print_rate_table(std::ostream& out, const RateReport& report);

}  // namespace shapeband
