#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "shapeband/grid.hpp"
#include "shapeband/kernels.hpp"

namespace shapeband {

/// Gamma(r) = sqrt(2 log(e / r)), defined for r in (0, e].
double penalty(double r);

/// Penalty of a window with `count` points on a grid of `n` points: Gamma(count / n).
double window_penalty(std::size_t count, std::size_t n);

/// sum_i Y_i w_i / sqrt(sum_i w_i^2) over the window members.
double standardized_average(const Field& values, const Kernel& kernel, const Window& window);

struct WindowScore {
  std::vector<int> steps;
  std::vector<int> center;
  std::size_t count = 0;
  double standardized = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

struct ScanResult {
  double statistic = 0.0;
  Bandwidth argmax_bandwidth;
  std::vector<int> argmax_center;  // 1-based tuple
  std::size_t windows_scanned = 0;
  std::vector<WindowScore> trace;  // filled only on request
};

struct ScanOptions {
  /// Windows whose box volume exceeds this use frequency-domain correlation.
  std::size_t fft_crossover = 256;
  bool keep_trace = false;
};

/// Reference path: enumerates every window explicitly and evaluates the kernel
/// at each member. Quadratic cost; intended for small grids and testing.
ScanResult multiscale_statistic_bruteforce(const Field& values, const Kernel& kernel, int sign,
                                           BandwidthPolicy policy, bool keep_trace = false);

/// Nonzero taps of one kernel at one bandwidth, shared by every centre.
struct Stencil {
  std::vector<std::ptrdiff_t> offsets;  // flat offsets from the centre
  std::vector<double> weights;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;  // box volume prod(2 s_i + 1)
  bool usable = false;
  bool use_fft = false;
};

/// Precomputed per-bandwidth stencils (and their spectra) for one or more
/// kernels on a fixed grid. Immutable after construction and safe to share.
class ScanPlan {
 public:
  ScanPlan(const GridDesign& grid, std::vector<Kernel> kernels, BandwidthPolicy policy,
           std::size_t fft_crossover = ScanOptions{}.fft_crossover);
  ~ScanPlan();
  ScanPlan(const ScanPlan&) = delete;
  ScanPlan& operator=(const ScanPlan&) = delete;

  const GridDesign& grid() const noexcept { return grid_; }
  BandwidthPolicy policy() const noexcept { return policy_; }
  std::span<const Bandwidth> bandwidths() const noexcept { return bandwidths_; }
  std::span<const Kernel> kernels() const noexcept { return kernels_; }
  const Stencil& stencil(std::size_t bandwidth, std::size_t kernel) const {
    return stencils_[bandwidth * kernels_.size() + kernel];
  }
  /// Penalty Gamma(N/n) of the windows at this bandwidth.
  double penalty(std::size_t bandwidth) const { return penalties_[bandwidth]; }

  /// Visitor receives (bandwidth index, kernel index, sums) where sums[flat] is
  /// sum_i Y_i w_i for the window centred at `flat`. Entries at centres that
  /// are not admissible for the bandwidth are unspecified. Only usable
  /// (bandwidth, kernel) pairs are visited, in (bandwidth, kernel) order.
  using SumsVisitor = std::function<void(std::size_t, std::size_t, std::span<const double>)>;
  void window_sums(std::span<const double> values, const SumsVisitor& visit) const;

 private:
  struct Spectra;

  GridDesign grid_;
  std::vector<Kernel> kernels_;
  BandwidthPolicy policy_;
  std::vector<Bandwidth> bandwidths_;
  std::vector<double> penalties_;
  std::vector<Stencil> stencils_;
  std::unique_ptr<Spectra> spectra_;
};

/// Penalised multiscale statistic max over windows of (sign * Psi(t,h) - Gamma(N/n)).
ScanResult multiscale_statistic(const Field& values, const Kernel& kernel, int sign, BandwidthPolicy policy,
                                const ScanOptions& options = {});
ScanResult multiscale_statistic(const ScanPlan& plan, std::size_t kernel_index, std::span<const double> values,
                                int sign, bool keep_trace = false);

/// max of the signed statistic over both signs; exploratory only.
double two_sided_statistic(const Field& values, const Kernel& kernel, BandwidthPolicy policy,
                           const ScanOptions& options = {});

struct TStar {
  double lower = 0.0;  // T(psi_l)
  double upper = 0.0;  // T(-psi_u)
  double value() const noexcept { return lower > upper ? lower : upper; }
};

/// T(psi_l) and T(-psi_u) from one pass; `plan` must hold (lower, upper) in that order.
TStar tstar_components(const ScanPlan& plan, std::span<const double> values);
double tstar(const Field& values, const Kernel& lower, const Kernel& upper, BandwidthPolicy policy,
             const ScanOptions& options = {});

/// CSV with columns h1..hd, t1..td, count, standardized_value, penalty, score.
void write_scan_trace(std::ostream& out, const GridDesign& grid, const ScanResult& result);

}  // namespace shapeband
