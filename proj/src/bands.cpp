#include "shapeband/bands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "center_runs.hpp"
#include "shapeband/error.hpp"

namespace shapeband {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cell_number(const std::string& text, std::size_t row) {
  if (text == "inf") return kInf;
  if (text == "-inf") return -kInf;
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("row " + std::to_string(row) + ": cannot parse number '" + text + "'");
  }
  return v;
}

}  // namespace

std::size_t BandResult::vacuous_count() const {
  return static_cast<std::size_t>(std::count(vacuous.begin(), vacuous.end(), 1));
}

BandBuilder::BandBuilder(const GridDesign& grid, const KernelPair& pair, BandwidthPolicy policy, std::size_t fft_crossover)
    : cls_(pair.cls), plan_(grid, {pair.lower, pair.upper}, policy, fft_crossover) {}

BandResult BandBuilder::build(const Field& values, const Calibration& cal, double sigma) const {
  const auto& grid = plan_.grid();
  check_context(cal, {grid.m(), grid.d(), cls_, plan_.policy(), cal.alpha});
  return build(values, cal.kappa, sigma);
}

BandResult BandBuilder::build(const Field& values, double kappa, double sigma) const {
  const auto& grid = plan_.grid();
  if (!(values.grid() == grid)) throw ValidationError("values", "data grid differs from the band grid");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma", "must be positive and finite");
  if (!std::isfinite(kappa)) throw ValidationError("kappa", "must be finite");
  const std::size_t n = grid.size();
  std::vector<double> lower(n, -kInf), upper(n, kInf);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> lower_arg(n, kNone), upper_arg(n, kNone);

  plan_.window_sums(values.values(), [&](std::size_t b, std::size_t k, std::span<const double> sums) {
    const auto& st = plan_.stencil(b, k);
    const double inv_mass = 1.0 / st.sum;
    const double half = sigma * (kappa + plan_.penalty(b)) * std::sqrt(st.sum_sq) * inv_mass;
    const auto& steps = plan_.bandwidths()[b].steps;
    if (k == 0) {
      detail::for_each_center_run(grid, steps, [&](std::size_t first, std::size_t len) {
        for (std::size_t c = first; c < first + len; ++c) {
          const double cand = sums[c] * inv_mass - half;
          if (cand > lower[c]) {
            lower[c] = cand;
            lower_arg[c] = b;
          }
        }
      });
    } else {
      detail::for_each_center_run(grid, steps, [&](std::size_t first, std::size_t len) {
        for (std::size_t c = first; c < first + len; ++c) {
          const double cand = sums[c] * inv_mass + half;
          if (cand < upper[c]) {
            upper[c] = cand;
            upper_arg[c] = b;
          }
        }
      });
    }
  });

  // Every policy contains the unit bandwidth, whose centres cover all points
  // that have any admissible window.
  std::vector<char> vacuous(n, 1);
  detail::for_each_center_run(grid, std::vector<int>(static_cast<std::size_t>(grid.d()), 1),
                              [&](std::size_t first, std::size_t len) {
                                std::fill(vacuous.begin() + static_cast<std::ptrdiff_t>(first),
                                          vacuous.begin() + static_cast<std::ptrdiff_t>(first + len), 0);
                              });
  std::vector<Bandwidth> lower_bw(n), upper_bw(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (vacuous[i]) {
      lower[i] = -kInf;
      upper[i] = kInf;
      continue;
    }
    if (lower_arg[i] == kNone || upper_arg[i] == kNone) {
      const auto x = grid.point(i);
      std::string where;
      for (double v : x) where += (where.empty() ? "" : ",") + format_double(v);
      throw DataError("every window at interior point (" + where + ") is unusable");
    }
    lower_bw[i] = plan_.bandwidths()[lower_arg[i]];
    upper_bw[i] = plan_.bandwidths()[upper_arg[i]];
  }
  return BandResult{Field(grid, std::move(lower), Field::Infinite::allow),
                    Field(grid, std::move(upper), Field::Infinite::allow), std::move(lower_bw), std::move(upper_bw),
                    std::move(vacuous)};
}

BandResult build_bands(const Field& values, const KernelPair& pair, const Calibration& cal, BandwidthPolicy policy,
                       double sigma) {
  const auto& grid = values.grid();
  check_context(cal, {grid.m(), grid.d(), pair.cls, policy, cal.alpha});
  const BandBuilder builder(grid, pair, policy);
  return builder.build(values, cal.kappa, sigma);
}

CoverageCheck check_coverage(const BandResult& band, const Field& truth) {
  if (!(truth.grid() == band.grid())) throw ValidationError("truth", "grid differs from the band grid");
  CoverageCheck out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (band.vacuous[i]) continue;
    const double lo = truth[i] - band.lower[i];
    const double hi = band.upper[i] - truth[i];
    if (lo < 0.0 || hi < 0.0) {
      out.covered = false;
      out.violations.push_back({i, lo, hi});
    }
  }
  return out;
}

WidthSummary width_profile(const BandResult& band, const RegionPredicate& region) {
  const auto& grid = band.grid();
  std::vector<double> widths;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (band.vacuous[i]) continue;
    if (!region(grid.point(i))) continue;
    widths.push_back(band.upper[i] - band.lower[i]);
  }
  if (widths.empty()) throw EmptyRegionError("region contains no non-vacuous grid points");
  WidthSummary s;
  s.points = widths.size();
  double total = 0.0;
  for (double w : widths) total += w;
  s.mean = total / static_cast<double>(widths.size());
  std::sort(widths.begin(), widths.end());
  const auto mid = widths.size() / 2;
  s.median = widths.size() % 2 == 1 ? widths[mid] : 0.5 * (widths[mid - 1] + widths[mid]);
  s.min = widths.front();
  s.max = widths.back();
  return s;
}

double estimate_sigma_differences(const Field& values) {
  const auto& grid = values.grid();
  const auto m = static_cast<std::size_t>(grid.m());
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if ((i + 1) % m == 0) continue;
    const double diff = values[i + 1] - values[i];
    ss += diff * diff;
    ++count;
  }
  if (count == 0) throw DataError("not enough points to estimate sigma");
  return std::sqrt(ss / (2.0 * static_cast<double>(count)));
}

void write_band_csv(std::ostream& out, const BandResult& band) {
  const auto& grid = band.grid();
  const int d = grid.d();
  for (int i = 1; i <= d; ++i) out << 'x' << i << ',';
  out << "lower,upper,width";
  for (int i = 1; i <= d; ++i) out << ",argmax_h" << i << "_lower";
  for (int i = 1; i <= d; ++i) out << ",argmin_h" << i << "_upper";
  out << '\n';
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (double x : grid.point(p)) out << format_double(x) << ',';
    const double width = band.vacuous[p] ? kInf : band.upper[p] - band.lower[p];
    out << format_double(band.lower[p]) << ',' << format_double(band.upper[p]) << ',' << format_double(width);
    for (const auto* bw : {&band.lower_bandwidth[p], &band.upper_bandwidth[p]}) {
      for (int i = 0; i < d; ++i) {
        out << ',';
        if (bw->steps.empty()) {
          out << "nan";
        } else {
          out << format_double(static_cast<double>(bw->steps[static_cast<std::size_t>(i)]) / grid.m());
        }
      }
    }
    out << '\n';
  }
}

BandResult read_band_csv(std::istream& in, const GridDesign& grid) {
  const auto d = static_cast<std::size_t>(grid.d());
  const std::size_t columns = d + 3 + 2 * d;
  const std::size_t n = grid.size();
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty band CSV");
  std::vector<double> lower(n, -kInf), upper(n, kInf);
  std::vector<Bandwidth> lower_bw(n), upper_bw(n);
  std::vector<char> vacuous(n, 1), seen(n, 0);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) throw DataError("row " + std::to_string(row) + ": wrong column count");
    std::vector<double> x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = cell_number(cells[i], row);
    const auto idx = grid.locate(x);
    if (!idx) throw DataError("row " + std::to_string(row) + ": coordinate is not a grid point");
    seen[*idx] = 1;
    lower[*idx] = cell_number(cells[d], row);
    upper[*idx] = cell_number(cells[d + 1], row);
    const double h0 = cell_number(cells[d + 3], row);
    if (std::isnan(h0)) continue;
    vacuous[*idx] = 0;
    for (std::size_t i = 0; i < d; ++i) {
      lower_bw[*idx].steps.push_back(static_cast<int>(std::lround(cell_number(cells[d + 3 + i], row) * grid.m())));
      upper_bw[*idx].steps.push_back(static_cast<int>(std::lround(cell_number(cells[d + 3 + d + i], row) * grid.m())));
    }
  }
  if (std::count(seen.begin(), seen.end(), 0) != 0) throw DataError("band CSV does not cover the grid");
  return BandResult{Field(grid, std::move(lower), Field::Infinite::allow), Field(grid, std::move(upper), Field::Infinite::allow),
                    std::move(lower_bw), std::move(upper_bw), std::move(vacuous)};
}

void write_plot_data(std::ostream& out, const BandResult& band, const Field* truth) {
  const auto& grid = band.grid();
  for (int i = 1; i <= grid.d(); ++i) out << 'x' << i << ',';
  out << "lower,upper" << (truth ? ",truth" : "") << '\n';
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (double x : grid.point(p)) out << format_double(x) << ',';
    out << format_double(band.lower[p]) << ',' << format_double(band.upper[p]);
    if (truth) out << ',' << format_double((*truth)[p]);
    out << '\n';
  }
}

}  // namespace shapeband
