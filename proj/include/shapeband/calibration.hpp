#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapeband/grid.hpp"
#include "shapeband/kernels.hpp"
#include "shapeband/rng.hpp"

namespace shapeband {

/// The settings a critical value is valid for.
struct CalibrationContext {
  int m = 0;
  int d = 0;
  ShapeClass kernel_pair = ShapeClass::isotonic;
  BandwidthPolicy policy = BandwidthPolicy::full;
  double alpha = 0.05;
};

/// Monte Carlo estimate of the (1 - alpha) quantile of T* under pure noise.
struct Calibration {
  double alpha = 0.05;
  double kappa = 0.0;
  std::size_t nsim = 0;
  std::uint64_t seed = 0;
  int m = 0;
  int d = 0;
  ShapeClass kernel_pair = ShapeClass::isotonic;
  BandwidthPolicy policy = BandwidthPolicy::full;
  double std_error = 0.0;

  CalibrationContext context() const { return {m, d, kernel_pair, policy, alpha}; }
  bool operator==(const Calibration&) const = default;
};

inline constexpr std::size_t kMinReplicates = 100;

/// 2000 replicates up to m = 30, 1000 above.
std::size_t default_nsim(int m);

void validate_alpha(double alpha);

/// Standard normal field for replicate `replicate` of the given purpose.
std::vector<double> standard_normal_noise(std::size_t n, std::uint64_t seed, StreamPurpose purpose,
                                          std::uint32_t replicate);

/// T* of nsim independent pure-noise fields; element r uses calibration substream r.
std::vector<double> null_statistics(const GridDesign& grid, ShapeClass pair, BandwidthPolicy policy, std::size_t nsim,
                                    std::uint64_t seed, int threads = 1);

/// Order statistic at 1-based rank ceil((1 - alpha) * n) of `values`.
double upper_order_statistic(std::span<const double> values, double alpha);

/// Bootstrap standard error of upper_order_statistic.
double bootstrap_quantile_se(std::span<const double> values, double alpha, std::uint64_t seed,
                             std::size_t resamples = 200);

Calibration calibrate(const GridDesign& grid, ShapeClass pair, BandwidthPolicy policy, double alpha, std::size_t nsim,
                      std::uint64_t seed, int threads = 1);

/// Builds the record from already simulated null statistics.
Calibration calibration_from_statistics(std::span<const double> statistics, const GridDesign& grid, ShapeClass pair,
                                        BandwidthPolicy policy, double alpha, std::uint64_t seed);

/// Throws ContextMismatchError naming the first differing field.
void check_context(const Calibration& cal, const CalibrationContext& expected);

std::string serialize_calibration(const Calibration& cal);
Calibration parse_calibration(std::string_view text);

void save_calibration(const Calibration& cal, const std::filesystem::path& path);
Calibration load_calibration(const std::filesystem::path& path);
Calibration load_calibration(const std::filesystem::path& path, const CalibrationContext& expected);

/// Loads a matching calibration from `dir` if one exists (same context, nsim
/// and seed), otherwise computes and stores it.
Calibration cached_calibration(const std::filesystem::path& dir, const GridDesign& grid, ShapeClass pair,
                               BandwidthPolicy policy, double alpha, std::size_t nsim, std::uint64_t seed,
                               int threads = 1);

}  // namespace shapeband
