#include "shapeband/scan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>

#include <fftw3.h>

#include "center_runs.hpp"
#include "shapeband/error.hpp"

namespace shapeband {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

// Spectra above this many bytes are recomputed per call instead of cached.
constexpr std::size_t kSpectraBudgetBytes = std::size_t{1} << 30;

template <typename T>
struct FftwDeleter {
  void operator()(T* p) const noexcept { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

FftwBuffer<double> alloc_real(std::size_t n) { return FftwBuffer<double>(fftw_alloc_real(n)); }
FftwBuffer<fftw_complex> alloc_complex(std::size_t n) { return FftwBuffer<fftw_complex>(fftw_alloc_complex(n)); }

void check_sign(int sign) {
  if (sign != 1 && sign != -1) throw ValidationError("sign", "must be +1 or -1");
}

void check_grid(const GridDesign& grid) {
  if (grid.m() < 4) throw ValidationError("m", "window scans need m >= 4, got " + std::to_string(grid.m()));
}

}  // namespace

double penalty(double r) {
  if (!(r > 0.0) || r > std::numbers::e) throw ValidationError("r", "penalty argument must lie in (0, e]");
  return std::sqrt(std::max(0.0, 2.0 * (1.0 - std::log(r))));
}

double window_penalty(std::size_t count, std::size_t n) {
  return penalty(static_cast<double>(count) / static_cast<double>(n));
}

double standardized_average(const Field& values, const Kernel& kernel, const Window& window) {
  const auto w = window_weights(kernel, window, values.grid());
  if (!(w.sum_sq > 0.0)) throw DegenerateWindowError("window has zero kernel energy");
  double s = 0.0;
  for (std::size_t i = 0; i < w.weights.size(); ++i) s += values[window.members[i]] * w.weights[i];
  return s / std::sqrt(w.sum_sq);
}

ScanResult multiscale_statistic_bruteforce(const Field& values, const Kernel& kernel, int sign,
                                           BandwidthPolicy policy, bool keep_trace) {
  check_sign(sign);
  const auto& grid = values.grid();
  check_grid(grid);
  ScanResult result;
  result.statistic = -std::numeric_limits<double>::infinity();
  enumerate_windows(grid, policy, [&](const Window& window) {
    const auto w = window_weights(kernel, window, grid);
    if (!w.usable) return;
    double s = 0.0;
    for (std::size_t i = 0; i < w.weights.size(); ++i) s += values[window.members[i]] * w.weights[i];
    const double z = s / std::sqrt(w.sum_sq);
    const double pen = window_penalty(w.count, grid.size());
    const double score = sign * z - pen;
    ++result.windows_scanned;
    if (score > result.statistic) {
      result.statistic = score;
      result.argmax_bandwidth = window.bandwidth;
      result.argmax_center = window.center;
    }
    if (keep_trace) result.trace.push_back({window.bandwidth.steps, window.center, w.count, z, pen, score});
  });
  return result;
}

struct ScanPlan::Spectra {
  std::size_t real_size = 0;
  std::size_t complex_size = 0;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  bool cached = false;
  std::vector<FftwBuffer<fftw_complex>> per_stencil;  // conj spectrum / n, empty if not FFT

  ~Spectra() {
    std::lock_guard lock(fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }

  void transform_stencil(const GridDesign& grid, const Bandwidth& bw, const Stencil& st, fftw_complex* out) const {
    auto placed = alloc_real(real_size);
    std::fill(placed.get(), placed.get() + real_size, 0.0);
    const auto d = static_cast<std::size_t>(grid.d());
    const auto m = grid.m();
    // Wrap each tap's offset vector onto the periodic grid.
    std::vector<int> off(d);
    std::size_t tap = 0;
    std::vector<int> odo(d);
    for (std::size_t i = 0; i < d; ++i) odo[i] = -bw.steps[i];
    std::ptrdiff_t flat_off = 0;
    while (true) {
      flat_off = 0;
      std::size_t wrapped = 0;
      for (std::size_t i = 0; i < d; ++i) {
        flat_off += odo[i] * static_cast<std::ptrdiff_t>(grid.stride(static_cast<int>(i)));
        wrapped += static_cast<std::size_t>((odo[i] + m) % m) * grid.stride(static_cast<int>(i));
      }
      if (tap < st.offsets.size() && st.offsets[tap] == flat_off) {
        placed[wrapped] = st.weights[tap];
        ++tap;
      }
      std::size_t axis = d;
      bool done = true;
      while (axis > 0) {
        --axis;
        if (++odo[axis] <= bw.steps[axis]) {
          done = false;
          break;
        }
        odo[axis] = -bw.steps[axis];
      }
      if (done) break;
    }
    fftw_execute_dft_r2c(forward, placed.get(), out);
    const double scale = 1.0 / static_cast<double>(real_size);
    for (std::size_t i = 0; i < complex_size; ++i) {
      out[i][0] *= scale;
      out[i][1] *= -scale;
    }
  }
};

ScanPlan::ScanPlan(const GridDesign& grid, std::vector<Kernel> kernels, BandwidthPolicy policy, std::size_t fft_crossover)
    : grid_(grid), kernels_(std::move(kernels)), policy_(policy) {
  check_grid(grid_);
  if (kernels_.empty()) throw ValidationError("kernels", "at least one kernel is required");
  for (const auto& k : kernels_) {
    if (k.dimension() != grid_.d()) throw ValidationError("kernel", "kernel dimension differs from grid dimension");
  }
  for (auto& bw : bandwidth_set(grid_, policy_)) {
    if (window_count(grid_, bw) > 0) bandwidths_.push_back(std::move(bw));
  }
  const auto d = static_cast<std::size_t>(grid_.d());
  const auto min_count = minimum_window_count(grid_.d());
  bool any_fft = false;
  stencils_.reserve(bandwidths_.size() * kernels_.size());
  for (const auto& bw : bandwidths_) {
    const auto volume = window_volume(bw);
    penalties_.push_back(window_penalty(volume, grid_.size()));
    for (const auto& kernel : kernels_) {
      Stencil st;
      st.count = volume;
      std::vector<int> odo(d);
      for (std::size_t i = 0; i < d; ++i) odo[i] = -bw.steps[i];
      while (true) {
        const double w = stencil_weight(kernel, odo, bw.steps);
        if (w != 0.0) {
          std::ptrdiff_t off = 0;
          for (std::size_t i = 0; i < d; ++i) off += odo[i] * static_cast<std::ptrdiff_t>(grid_.stride(static_cast<int>(i)));
          st.offsets.push_back(off);
          st.weights.push_back(w);
          st.sum += w;
          st.sum_sq += w * w;
        }
        std::size_t axis = d;
        bool done = true;
        while (axis > 0) {
          --axis;
          if (++odo[axis] <= bw.steps[axis]) {
            done = false;
            break;
          }
          odo[axis] = -bw.steps[axis];
        }
        if (done) break;
      }
      st.usable = st.count >= min_count && st.sum > 0.0;
      st.use_fft = st.usable && volume > fft_crossover;
      any_fft = any_fft || st.use_fft;
      stencils_.push_back(std::move(st));
    }
  }

  if (!any_fft) return;
  spectra_ = std::make_unique<Spectra>();
  auto& sp = *spectra_;
  sp.real_size = grid_.size();
  sp.complex_size = grid_.size() / static_cast<std::size_t>(grid_.m()) * static_cast<std::size_t>(grid_.m() / 2 + 1);
  std::vector<int> dims(d, grid_.m());
  {
    auto real = alloc_real(sp.real_size);
    auto cplx = alloc_complex(sp.complex_size);
    std::lock_guard lock(fftw_planner_mutex());
    sp.forward = fftw_plan_dft_r2c(grid_.d(), dims.data(), real.get(), cplx.get(), FFTW_ESTIMATE);
    sp.inverse = fftw_plan_dft_c2r(grid_.d(), dims.data(), cplx.get(), real.get(), FFTW_ESTIMATE);
  }
  std::size_t fft_count = 0;
  for (const auto& st : stencils_) fft_count += st.use_fft ? 1 : 0;
  sp.cached = fft_count * sp.complex_size * sizeof(fftw_complex) <= kSpectraBudgetBytes;
  sp.per_stencil.resize(stencils_.size());
  if (!sp.cached) return;
  for (std::size_t b = 0; b < bandwidths_.size(); ++b) {
    for (std::size_t k = 0; k < kernels_.size(); ++k) {
      const auto idx = b * kernels_.size() + k;
      if (!stencils_[idx].use_fft) continue;
      sp.per_stencil[idx] = alloc_complex(sp.complex_size);
      sp.transform_stencil(grid_, bandwidths_[b], stencils_[idx], sp.per_stencil[idx].get());
    }
  }
}

ScanPlan::~ScanPlan() = default;

void ScanPlan::window_sums(std::span<const double> values, const SumsVisitor& visit) const {
  if (values.size() != grid_.size()) throw ValidationError("values", "field does not match the plan's grid");
  const std::size_t n = grid_.size();
  FftwBuffer<double> sums = alloc_real(n);
  FftwBuffer<fftw_complex> values_hat;
  FftwBuffer<fftw_complex> product;
  FftwBuffer<fftw_complex> scratch_spectrum;
  if (spectra_) {
    const auto& sp = *spectra_;
    auto real = alloc_real(n);
    std::copy(values.begin(), values.end(), real.get());
    values_hat = alloc_complex(sp.complex_size);
    product = alloc_complex(sp.complex_size);
    if (!sp.cached) scratch_spectrum = alloc_complex(sp.complex_size);
    fftw_execute_dft_r2c(sp.forward, real.get(), values_hat.get());
  }
  const double* y = values.data();
  double* out = sums.get();
  for (std::size_t b = 0; b < bandwidths_.size(); ++b) {
    for (std::size_t k = 0; k < kernels_.size(); ++k) {
      const auto idx = b * kernels_.size() + k;
      const auto& st = stencils_[idx];
      if (!st.usable) continue;
      if (st.use_fft) {
        const auto& sp = *spectra_;
        const fftw_complex* spec = sp.per_stencil[idx].get();
        if (!sp.cached) {
          sp.transform_stencil(grid_, bandwidths_[b], st, scratch_spectrum.get());
          spec = scratch_spectrum.get();
        }
        for (std::size_t i = 0; i < sp.complex_size; ++i) {
          const double ar = values_hat[i][0], ai = values_hat[i][1];
          const double br = spec[i][0], bi = spec[i][1];
          product[i][0] = ar * br - ai * bi;
          product[i][1] = ar * bi + ai * br;
        }
        fftw_execute_dft_c2r(sp.inverse, product.get(), out);
      } else {
        const std::size_t taps = st.weights.size();
        detail::for_each_center_run(grid_, bandwidths_[b].steps, [&](std::size_t first, std::size_t len) {
          double* dst = out + first;
          std::fill(dst, dst + len, 0.0);
          for (std::size_t t = 0; t < taps; ++t) {
            const double w = st.weights[t];
            const double* src = y + static_cast<std::ptrdiff_t>(first) + st.offsets[t];
            for (std::size_t c = 0; c < len; ++c) dst[c] += w * src[c];
          }
        });
      }
      visit(b, k, std::span<const double>(out, n));
    }
  }
}

ScanResult multiscale_statistic(const ScanPlan& plan, std::size_t kernel_index, std::span<const double> values, int sign,
                                bool keep_trace) {
  check_sign(sign);
  const auto& grid = plan.grid();
  ScanResult result;
  result.statistic = -std::numeric_limits<double>::infinity();
  std::size_t best_b = 0, best_flat = 0;
  bool found = false;
  plan.window_sums(values, [&](std::size_t b, std::size_t k, std::span<const double> sums) {
    if (k != kernel_index) return;
    const auto& st = plan.stencil(b, k);
    const double inv = 1.0 / std::sqrt(st.sum_sq);
    const double pen = plan.penalty(b);
    const auto& steps = plan.bandwidths()[b].steps;
    detail::for_each_center_run(grid, steps, [&](std::size_t first, std::size_t len) {
      for (std::size_t c = first; c < first + len; ++c) {
        const double z = sums[c] * inv;
        const double score = sign * z - pen;
        if (score > result.statistic) {
          result.statistic = score;
          best_b = b;
          best_flat = c;
          found = true;
        }
        if (keep_trace) result.trace.push_back({steps, grid.tuple(c), st.count, z, pen, score});
      }
      result.windows_scanned += len;
    });
  });
  if (found) {
    result.argmax_bandwidth = plan.bandwidths()[best_b];
    result.argmax_center = grid.tuple(best_flat);
  }
  return result;
}

ScanResult multiscale_statistic(const Field& values, const Kernel& kernel, int sign, BandwidthPolicy policy,
                                const ScanOptions& options) {
  const ScanPlan plan(values.grid(), {kernel}, policy, options.fft_crossover);
  return multiscale_statistic(plan, 0, values.values(), sign, options.keep_trace);
}

double two_sided_statistic(const Field& values, const Kernel& kernel, BandwidthPolicy policy, const ScanOptions& options) {
  const ScanPlan plan(values.grid(), {kernel}, policy, options.fft_crossover);
  return std::max(multiscale_statistic(plan, 0, values.values(), +1).statistic,
                  multiscale_statistic(plan, 0, values.values(), -1).statistic);
}

TStar tstar_components(const ScanPlan& plan, std::span<const double> values) {
  if (plan.kernels().size() != 2) throw ValidationError("plan", "T* needs a (lower, upper) kernel plan");
  const auto& grid = plan.grid();
  TStar out{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  plan.window_sums(values, [&](std::size_t b, std::size_t k, std::span<const double> sums) {
    const auto& st = plan.stencil(b, k);
    const double inv = 1.0 / std::sqrt(st.sum_sq);
    const double pen = plan.penalty(b);
    double best = -std::numeric_limits<double>::infinity();
    if (k == 0) {
      detail::for_each_center_run(grid, plan.bandwidths()[b].steps, [&](std::size_t first, std::size_t len) {
        for (std::size_t c = first; c < first + len; ++c) best = std::max(best, sums[c]);
      });
      out.lower = std::max(out.lower, best * inv - pen);
    } else {
      detail::for_each_center_run(grid, plan.bandwidths()[b].steps, [&](std::size_t first, std::size_t len) {
        for (std::size_t c = first; c < first + len; ++c) best = std::max(best, -sums[c]);
      });
      out.upper = std::max(out.upper, best * inv - pen);
    }
  });
  return out;
}

double tstar(const Field& values, const Kernel& lower, const Kernel& upper, BandwidthPolicy policy,
             const ScanOptions& options) {
  const ScanPlan plan(values.grid(), {lower, upper}, policy, options.fft_crossover);
  return tstar_components(plan, values.values()).value();
}

void write_scan_trace(std::ostream& out, const GridDesign& grid, const ScanResult& result) {
  for (int i = 1; i <= grid.d(); ++i) out << 'h' << i << ',';
  for (int i = 1; i <= grid.d(); ++i) out << 't' << i << ',';
  out << "count,standardized_value,penalty,score\n";
  for (const auto& w : result.trace) {
    for (int s : w.steps) out << format_double(static_cast<double>(s) / grid.m()) << ',';
    for (int c : w.center) out << format_double(grid.coordinate(c)) << ',';
    out << w.count << ',' << format_double(w.standardized) << ',' << format_double(w.penalty) << ','
        << format_double(w.score) << '\n';
  }
}

}  // namespace shapeband
