#include "shapeband/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "shapeband/error.hpp"

namespace shapeband {

GridDesign::GridDesign(int m, int d, std::size_t point_budget) : m_(m), d_(d), n_(1) {
  if (m < 1) throw ValidationError("m", "points per axis must be positive, got " + std::to_string(m));
  if (d < 1) throw ValidationError("d", "dimension must be positive, got " + std::to_string(d));
  for (int i = 0; i < d; ++i) {
    if (n_ > point_budget / static_cast<std::size_t>(m)) {
      throw CapacityError("grid m=" + std::to_string(m) + ", d=" + std::to_string(d) +
                          " exceeds the point budget of " + std::to_string(point_budget));
    }
    n_ *= static_cast<std::size_t>(m);
  }
  strides_.assign(static_cast<std::size_t>(d), 1);
  for (int i = d - 2; i >= 0; --i) {
    strides_[static_cast<std::size_t>(i)] = strides_[static_cast<std::size_t>(i) + 1] * static_cast<std::size_t>(m);
  }
}

std::vector<int> GridDesign::tuple(std::size_t flat) const {
  std::vector<int> k(static_cast<std::size_t>(d_));
  for (std::size_t i = 0; i < k.size(); ++i) {
    k[i] = static_cast<int>(flat / strides_[i]) + 1;
    flat %= strides_[i];
  }
  return k;
}

std::size_t GridDesign::flat(std::span<const int> tuple) const {
  if (tuple.size() != static_cast<std::size_t>(d_)) throw ValidationError("index", "tuple length differs from d");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (tuple[i] < 1 || tuple[i] > m_) throw ValidationError("index", "grid index out of range");
    idx += static_cast<std::size_t>(tuple[i] - 1) * strides_[i];
  }
  return idx;
}

std::vector<double> GridDesign::point(std::size_t flat) const {
  std::vector<double> x(static_cast<std::size_t>(d_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = coordinate(static_cast<int>(flat / strides_[i]) + 1);
    flat %= strides_[i];
  }
  return x;
}

std::optional<std::size_t> GridDesign::locate(std::span<const double> x, double tol) const {
  if (x.size() != static_cast<std::size_t>(d_)) return std::nullopt;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double k = std::round(x[i] * m_);
    if (k < 1 || k > m_ || std::abs(x[i] - k / m_) > tol) return std::nullopt;
    idx += static_cast<std::size_t>(k - 1) * strides_[i];
  }
  return idx;
}

GridDesign make_grid(int m, int d, std::size_t point_budget) { return GridDesign(m, d, point_budget); }

Field::Field(GridDesign grid, std::vector<double> values, Infinite infinite)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw ValidationError("values", "expected " + std::to_string(grid_.size()) + " values, got " +
                                        std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (std::isnan(v) || (std::isinf(v) && infinite == Infinite::reject)) {
      throw DataError("field contains a non-finite value");
    }
  }
}

Field Field::constant(const GridDesign& grid, double value) {
  return Field(grid, std::vector<double>(grid.size(), value));
}

Field Field::from_function(const GridDesign& grid, const std::function<double(std::span<const double>)>& fn) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid.point(i));
  return Field(grid, std::move(v));
}

std::vector<double> Bandwidth::values(int m) const {
  std::vector<double> h(steps.size());
  std::transform(steps.begin(), steps.end(), h.begin(), [m](int s) { return static_cast<double>(s) / m; });
  return h;
}

double Bandwidth::product(int m) const {
  double p = 1.0;
  for (int s : steps) p *= static_cast<double>(s) / m;
  return p;
}

BandwidthPolicy default_policy(int m, int d) {
  return (m <= 64 && d <= 2) ? BandwidthPolicy::full : BandwidthPolicy::dyadic;
}

std::string to_string(BandwidthPolicy policy) { return policy == BandwidthPolicy::full ? "full" : "dyadic"; }

BandwidthPolicy parse_policy(std::string_view text) {
  if (text == "full" || text == "FULL") return BandwidthPolicy::full;
  if (text == "dyadic" || text == "DYADIC") return BandwidthPolicy::dyadic;
  throw ValidationError("policy", "expected 'full' or 'dyadic', got '" + std::string(text) + "'");
}

std::vector<int> axis_steps(int m, BandwidthPolicy policy) {
  std::vector<int> out;
  const int max_steps = m / 2;
  if (policy == BandwidthPolicy::full) {
    for (int s = 1; s <= max_steps; ++s) out.push_back(s);
  } else {
    for (int s = 1; s <= max_steps; s *= 2) out.push_back(s);
  }
  return out;
}

std::vector<Bandwidth> bandwidth_set(const GridDesign& grid, BandwidthPolicy policy) {
  const auto steps = axis_steps(grid.m(), policy);
  std::vector<Bandwidth> out;
  if (steps.empty()) return out;
  const auto d = static_cast<std::size_t>(grid.d());
  std::vector<std::size_t> odo(d, 0);
  while (true) {
    Bandwidth bw;
    bw.steps.resize(d);
    for (std::size_t i = 0; i < d; ++i) bw.steps[i] = steps[odo[i]];
    out.push_back(std::move(bw));
    std::size_t axis = d;
    while (axis > 0) {
      --axis;
      if (++odo[axis] < steps.size()) break;
      odo[axis] = 0;
      if (axis == 0) return out;
    }
  }
}

CenterRange center_range(int m, int steps) { return {steps + 1, m - steps}; }

bool admissible(const GridDesign& grid, std::span<const int> center, const Bandwidth& bw) {
  if (center.size() != static_cast<std::size_t>(grid.d()) || bw.steps.size() != center.size()) return false;
  for (std::size_t i = 0; i < center.size(); ++i) {
    if (bw.steps[i] < 1) return false;
    const auto r = center_range(grid.m(), bw.steps[i]);
    if (center[i] < r.lo || center[i] > r.hi) return false;
  }
  return true;
}

void for_each_center(const GridDesign& grid, const Bandwidth& bw, const std::function<void(std::size_t)>& fn) {
  const auto d = static_cast<std::size_t>(grid.d());
  std::vector<CenterRange> ranges(d);
  for (std::size_t i = 0; i < d; ++i) {
    ranges[i] = center_range(grid.m(), bw.steps[i]);
    if (ranges[i].empty()) return;
  }
  std::vector<int> k(d);
  for (std::size_t i = 0; i < d; ++i) k[i] = ranges[i].lo;
  const std::size_t last = d - 1;
  while (true) {
    std::size_t base = 0;
    for (std::size_t i = 0; i < last; ++i) base += static_cast<std::size_t>(k[i] - 1) * grid.stride(static_cast<int>(i));
    for (int j = ranges[last].lo; j <= ranges[last].hi; ++j) fn(base + static_cast<std::size_t>(j - 1));
    std::size_t axis = last;
    while (axis > 0) {
      --axis;
      if (++k[axis] <= ranges[axis].hi) break;
      k[axis] = ranges[axis].lo;
      if (axis == 0) return;
    }
    if (last == 0) return;
  }
}

std::size_t window_count(const GridDesign& grid, const Bandwidth& bw) {
  std::size_t total = 1;
  for (int s : bw.steps) {
    const auto r = center_range(grid.m(), s);
    if (r.empty()) return 0;
    total *= static_cast<std::size_t>(r.hi - r.lo + 1);
  }
  return total;
}

std::size_t window_volume(const Bandwidth& bw) {
  std::size_t v = 1;
  for (int s : bw.steps) v *= static_cast<std::size_t>(2 * s + 1);
  return v;
}

Window make_window(const GridDesign& grid, std::span<const int> center, const Bandwidth& bw) {
  if (!admissible(grid, center, bw)) throw ValidationError("window", "centre/bandwidth pair is not admissible");
  Window w;
  w.center.assign(center.begin(), center.end());
  w.bandwidth = bw;
  const auto d = static_cast<std::size_t>(grid.d());
  const double tol = 1e-12;
  const auto h = bw.values(grid.m());
  // Membership straight from the definition |x_i - t_i| <= h_i.
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const auto x = grid.point(idx);
    bool inside = true;
    for (std::size_t i = 0; i < d && inside; ++i) {
      inside = std::abs(x[i] - grid.coordinate(center[i])) <= h[i] + tol;
    }
    if (inside) w.members.push_back(idx);
  }
  return w;
}

void enumerate_windows(const GridDesign& grid, BandwidthPolicy policy, const std::function<void(const Window&)>& visit) {
  for (const auto& bw : bandwidth_set(grid, policy)) {
    for_each_center(grid, bw, [&](std::size_t flat) {
      const auto t = grid.tuple(flat);
      visit(make_window(grid, t, bw));
    });
  }
}

std::size_t total_windows(const GridDesign& grid, BandwidthPolicy policy) {
  std::size_t total = 0;
  for (const auto& bw : bandwidth_set(grid, policy)) total += window_count(grid, bw);
  return total;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, std::size_t row) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError("row " + std::to_string(row) + ": cannot parse number '" + text + "'");
  }
  return v;
}

struct CsvRows {
  int d = 0;
  std::vector<std::vector<double>> coords;
  std::vector<double> y;
  std::vector<std::size_t> line_numbers;
};

CsvRows parse_rows(std::istream& in) {
  CsvRows rows;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("empty CSV input");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "y") throw DataError("row 1: header must be x1,...,xd,y");
  rows.d = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < rows.d; ++i) {
    if (header[static_cast<std::size_t>(i)] != "x" + std::to_string(i + 1)) {
      throw DataError("row 1: header column " + std::to_string(i + 1) + " must be x" + std::to_string(i + 1));
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " columns");
    }
    std::vector<double> x(static_cast<std::size_t>(rows.d));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = parse_number(cells[i], line_no);
    rows.coords.push_back(std::move(x));
    rows.y.push_back(parse_number(cells.back(), line_no));
    rows.line_numbers.push_back(line_no);
  }
  return rows;
}

Field assemble(const CsvRows& rows, const GridDesign& grid) {
  if (rows.d != grid.d()) {
    throw DataError("CSV has " + std::to_string(rows.d) + " coordinates, grid expects " + std::to_string(grid.d()));
  }
  std::vector<double> values(grid.size(), 0.0);
  std::vector<std::size_t> seen(grid.size(), 0);
  for (std::size_t r = 0; r < rows.y.size(); ++r) {
    const auto idx = grid.locate(rows.coords[r]);
    if (!idx) throw DataError("row " + std::to_string(rows.line_numbers[r]) + ": coordinate is not a grid point");
    if (seen[*idx] != 0) {
      throw DataError("row " + std::to_string(rows.line_numbers[r]) + ": duplicate grid point (first at row " +
                      std::to_string(seen[*idx]) + ")");
    }
    if (!std::isfinite(rows.y[r])) throw DataError("row " + std::to_string(rows.line_numbers[r]) + ": non-finite y");
    seen[*idx] = rows.line_numbers[r];
    values[*idx] = rows.y[r];
  }
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    if (seen[idx] == 0) {
      const auto x = grid.point(idx);
      std::string where = "(";
      for (std::size_t i = 0; i < x.size(); ++i) where += (i ? "," : "") + format_double(x[i]);
      throw DataError("missing grid row for coordinate " + where + ")");
    }
  }
  return Field(grid, std::move(values));
}

}  // namespace

Field read_field_csv(std::istream& in, const GridDesign& grid) { return assemble(parse_rows(in), grid); }

Field read_field_csv(std::istream& in) {
  const auto rows = parse_rows(in);
  if (rows.y.empty()) throw DataError("CSV has no data rows");
  double largest_m = 0.0;
  for (const auto& x : rows.coords) {
    for (double v : x) {
      if (v > 0.0) largest_m = std::max(largest_m, 1.0 / v);
    }
  }
  const int m = static_cast<int>(std::lround(largest_m));
  if (m < 1) throw DataError("cannot infer grid size from coordinates");
  return assemble(rows, GridDesign(m, rows.d));
}

void write_field_csv(std::ostream& out, const Field& field) {
  const auto& grid = field.grid();
  for (int i = 0; i < grid.d(); ++i) out << 'x' << (i + 1) << ',';
  out << "y\n";
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    for (double x : grid.point(idx)) out << format_double(x) << ',';
    out << format_double(field[idx]) << '\n';
  }
}

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace shapeband
