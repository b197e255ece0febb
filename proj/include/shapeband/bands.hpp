#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "shapeband/calibration.hpp"
#include "shapeband/grid.hpp"
#include "shapeband/kernels.hpp"
#include "shapeband/scan.hpp"

namespace shapeband {

/// Lower/upper band fields. Points without any admissible window are vacuous
/// and carry (-inf, +inf).
struct BandResult {
  Field lower;
  Field upper;
  std::vector<Bandwidth> lower_bandwidth;  // maximiser per point; empty steps when vacuous
  std::vector<Bandwidth> upper_bandwidth;  // minimiser per point
  std::vector<char> vacuous;

  const GridDesign& grid() const noexcept { return lower.grid(); }
  std::size_t vacuous_count() const;
};

/// Reusable band constructor for one grid, kernel pair and bandwidth policy.
class BandBuilder {
 public:
  BandBuilder(const GridDesign& grid, const KernelPair& pair, BandwidthPolicy policy,
              std::size_t fft_crossover = ScanOptions{}.fft_crossover);

  const ScanPlan& plan() const noexcept { return plan_; }
  ShapeClass shape_class() const noexcept { return cls_; }

  /// Bands at critical value `kappa` with known noise level `sigma`.
  BandResult build(const Field& values, double kappa, double sigma = 1.0) const;
  BandResult build(const Field& values, const Calibration& cal, double sigma = 1.0) const;

 private:
  ShapeClass cls_;
  ScanPlan plan_;
};

BandResult build_bands(const Field& values, const KernelPair& pair, const Calibration& cal, BandwidthPolicy policy,
                       double sigma = 1.0);

struct CoverageViolation {
  std::size_t point;       // flat index
  double lower_margin;     // f - lower
  double upper_margin;     // upper - f
};

struct CoverageCheck {
  bool covered = true;
  std::vector<CoverageViolation> violations;
};

/// Covered iff lower <= f <= upper at every non-vacuous point.
CoverageCheck check_coverage(const BandResult& band, const Field& truth);

using RegionPredicate = std::function<bool(std::span<const double>)>;

struct WidthSummary {
  std::size_t points = 0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
};

/// Summaries of upper - lower over non-vacuous points in `region`.
WidthSummary width_profile(const BandResult& band, const RegionPredicate& region);

/// Noise level from first-order differences along the last axis. A
/// convenience only; coverage guarantees assume sigma is known.
double estimate_sigma_differences(const Field& values);

/// CSV: x1..xd, lower, upper, width, argmax_h1..hd_lower, argmin_h1..hd_upper.
void write_band_csv(std::ostream& out, const BandResult& band);
BandResult read_band_csv(std::istream& in, const GridDesign& grid);

/// Plot grid: x1..xd, lower, upper[, truth].
void write_plot_data(std::ostream& out, const BandResult& band, const Field* truth = nullptr);

}  // namespace shapeband
