#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shapeband {

inline constexpr std::size_t kDefaultPointBudget = 10'000'000;

/// Uniform design {1/m, 2/m, ..., 1}^d. Points are addressed either by a
/// flat index (row-major, axis 0 slowest) or by a 1-based index tuple.
class GridDesign {
 public:
  GridDesign(int m, int d, std::size_t point_budget = kDefaultPointBudget);

  int m() const noexcept { return m_; }
  int d() const noexcept { return d_; }
  std::size_t size() const noexcept { return n_; }
  std::size_t stride(int axis) const { return strides_.at(static_cast<std::size_t>(axis)); }

  double coordinate(int k) const noexcept { return static_cast<double>(k) / m_; }

  std::vector<int> tuple(std::size_t flat) const;
  std::size_t flat(std::span<const int> tuple) const;
  std::vector<double> point(std::size_t flat) const;

  /// Grid point matching `x` per axis within `tol`, if any.
  std::optional<std::size_t> locate(std::span<const double> x, double tol = 1e-9) const;

  bool operator==(const GridDesign& other) const noexcept { return m_ == other.m_ && d_ == other.d_; }

 private:
  int m_;
  int d_;
  std::size_t n_;
  std::vector<std::size_t> strides_;
};

GridDesign make_grid(int m, int d, std::size_t point_budget = kDefaultPointBudget);

/// A real value per grid point. Non-finite values are rejected unless the
/// field is a band field, where +-inf marks points without any admissible window.
class Field {
 public:
  enum class Infinite { reject, allow };

  Field(GridDesign grid, std::vector<double> values, Infinite infinite = Infinite::reject);

  static Field constant(const GridDesign& grid, double value);
  static Field from_function(const GridDesign& grid,
                             const std::function<double(std::span<const double>)>& fn);

  const GridDesign& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t flat) const { return values_[flat]; }
  double at(std::span<const int> tuple) const { return values_[grid_.flat(tuple)]; }

 private:
  GridDesign grid_;
  std::vector<double> values_;
};

/// Bandwidth in grid steps: h_i = steps[i] / m.
struct Bandwidth {
  std::vector<int> steps;

  std::vector<double> values(int m) const;
  double product(int m) const;
  auto operator<=>(const Bandwidth&) const = default;
};

enum class BandwidthPolicy { full, dyadic };

BandwidthPolicy default_policy(int m, int d);
std::string to_string(BandwidthPolicy policy);
BandwidthPolicy parse_policy(std::string_view text);

/// Per-axis step counts allowed by the policy: {1..floor(m/2)} or powers of two.
std::vector<int> axis_steps(int m, BandwidthPolicy policy);

/// All bandwidth vectors under the policy in lexicographic order.
std::vector<Bandwidth> bandwidth_set(const GridDesign& grid, BandwidthPolicy policy);

/// Admissible window B_inf(t, h) restricted to the grid; t - h and t + h are grid points.
struct Window {
  std::vector<int> center;  // 1-based index tuple
  Bandwidth bandwidth;
  std::vector<std::size_t> members;  // flat indices, increasing

  std::size_t count() const noexcept { return members.size(); }
};

/// True iff the window centred at `center` (1-based tuple) with `bw` is admissible.
bool admissible(const GridDesign& grid, std::span<const int> center, const Bandwidth& bw);

/// Inclusive 1-based range of admissible centre indices along one axis.
struct CenterRange {
  int lo;
  int hi;
  bool empty() const noexcept { return lo > hi; }
};
CenterRange center_range(int m, int steps);

/// Calls `fn(flat)` for every admissible centre of `bw`, in increasing flat order.
void for_each_center(const GridDesign& grid, const Bandwidth& bw,
                     const std::function<void(std::size_t)>& fn);

std::size_t window_count(const GridDesign& grid, const Bandwidth& bw);
std::size_t window_volume(const Bandwidth& bw);

Window make_window(const GridDesign& grid, std::span<const int> center, const Bandwidth& bw);

/// Streams every admissible window, lexicographic in (h, t).
void enumerate_windows(const GridDesign& grid, BandwidthPolicy policy,
                       const std::function<void(const Window&)>& visit);

std::size_t total_windows(const GridDesign& grid, BandwidthPolicy policy);

/// Field CSV: header `x1,...,xd,y`, one row per grid point in any order.
Field read_field_csv(std::istream& in, const GridDesign& grid);
/// As above, inferring m and d from the file contents.
Field read_field_csv(std::istream& in);
void write_field_csv(std::ostream& out, const Field& field);

/// Shortest round-trip decimal text for a double; +-inf as "inf"/"-inf".
std::string format_double(double value);

}  // namespace shapeband
