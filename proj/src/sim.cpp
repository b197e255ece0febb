#include "shapeband/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "shapeband/error.hpp"
#include "shapeband/parallel.hpp"

namespace shapeband {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TestFunction affine(std::string id, std::string formula, double scale) {
  TestFunction f;
  f.id = std::move(id);
  f.formula = std::move(formula);
  f.eval = [scale](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return scale * s;
  };
  f.isotonic = scale >= 0.0;
  f.convex = true;
  f.gradient = [scale](std::span<const double> x) { return std::vector<double>(x.size(), scale); };
  f.hessian = [](std::span<const double> x) { return std::vector<double>(x.size() * x.size(), 0.0); };
  f.intrinsic_dimension = [scale](int d) { return scale == 0.0 ? 0 : d; };
  f.jumps = [](int d) { return std::vector<std::vector<double>>(static_cast<std::size_t>(d)); };
  return f;
}

TestFunction quadratic(std::string id, std::string formula, double scale) {
  TestFunction f;
  f.id = std::move(id);
  f.formula = std::move(formula);
  f.eval = [scale](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += (v - 0.5) * (v - 0.5);
    return scale * s;
  };
  f.convex = true;
  f.gradient = [scale](std::span<const double> x) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * scale * (x[i] - 0.5);
    return g;
  };
  f.hessian = [scale](std::span<const double> x) {
    std::vector<double> h(x.size() * x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) h[i * x.size() + i] = 2.0 * scale;
    return h;
  };
  f.intrinsic_dimension = [](int d) { return d; };
  f.jumps = [](int d) { return std::vector<std::vector<double>>(static_cast<std::size_t>(d)); };
  return f;
}

std::vector<TestFunction> make_builtins() {
  std::vector<TestFunction> out;
  out.push_back(affine("zero", "0", 0.0));
  out.push_back(affine("sum", "x1+x2", 1.0));
  out.push_back(affine("sum20", "20(x1+x2)", 20.0));

  TestFunction indicator;
  indicator.id = "indicator";
  indicator.formula = "I(x1>=0.5)";
  indicator.eval = [](std::span<const double> x) { return x[0] >= 0.5 ? 1.0 : 0.0; };
  indicator.isotonic = true;
  indicator.intrinsic_dimension = [](int) { return 1; };
  indicator.jumps = [](int d) {
    std::vector<std::vector<double>> j(static_cast<std::size_t>(d));
    j[0] = {0.5};
    return j;
  };
  out.push_back(std::move(indicator));

  out.push_back(affine("sum10", "10(x1+x2)", 10.0));
  out.push_back(quadratic("quad", "(x1-0.5)^2+(x2-0.5)^2", 1.0));

  TestFunction abs_fn;
  abs_fn.id = "abs";
  abs_fn.formula = "|x1-0.5|";
  abs_fn.eval = [](std::span<const double> x) { return std::abs(x[0] - 0.5); };
  abs_fn.convex = true;
  abs_fn.gradient = [](std::span<const double> x) {
    std::vector<double> g(x.size(), 0.0);
    g[0] = x[0] > 0.5 ? 1.0 : (x[0] < 0.5 ? -1.0 : 0.0);
    return g;
  };
  abs_fn.hessian = [](std::span<const double> x) { return std::vector<double>(x.size() * x.size(), 0.0); };
  abs_fn.intrinsic_dimension = [](int) { return 1; };
  abs_fn.jumps = [](int d) { return std::vector<std::vector<double>>(static_cast<std::size_t>(d)); };
  out.push_back(std::move(abs_fn));

  out.push_back(quadratic("quad40", "40((x1-0.5)^2+(x2-0.5)^2)", 40.0));
  return out;
}

double to_number(const std::string& text) {
  if (text == "inf") return kInf;
  if (text == "-inf") return -kInf;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("region", "cannot parse number '" + text + "'");
  }
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw EmptyRegionError("region contains no non-vacuous grid points");
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

AnalyticFunction TestFunction::analytic(ShapeClass cls, int d) const {
  return AnalyticFunction{eval, cls, jumps ? jumps(d) : std::vector<std::vector<double>>{}};
}

const std::vector<TestFunction>& builtin_functions() {
  static const std::vector<TestFunction> functions = make_builtins();
  return functions;
}

const TestFunction& find_function(std::string_view id) {
  static const std::map<std::string, std::string, std::less<>> aliases = {
      {"0", "zero"}, {"constant", "zero"}, {"x1+x2", "sum"}, {"linear", "sum"},
      {"step", "indicator"}, {"quadratic", "quad"}, {"kink", "abs"}};
  std::string key(id);
  if (const auto it = aliases.find(key); it != aliases.end()) key = it->second;
  for (const auto& f : builtin_functions()) {
    if (f.id == key) return f;
  }
  throw ValidationError("function", "unknown built-in function '" + std::string(id) + "'");
}

bool satisfies_isotonic(const Field& values, double tol) {
  const auto& grid = values.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto k = grid.tuple(i);
    for (int axis = 0; axis < grid.d(); ++axis) {
      if (k[static_cast<std::size_t>(axis)] == grid.m()) continue;
      if (values[i + grid.stride(axis)] < values[i] - tol) return false;
    }
  }
  return true;
}

bool satisfies_convex(const Field& values, double tol) {
  const auto& grid = values.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto k = grid.tuple(i);
    for (int axis = 0; axis < grid.d(); ++axis) {
      const int ki = k[static_cast<std::size_t>(axis)];
      if (ki == 1 || ki == grid.m()) continue;
      const auto s = grid.stride(axis);
      if (values[i - s] + values[i + s] < 2.0 * values[i] - tol) return false;
    }
  }
  return true;
}

Field generate_data(const TestFunction& fn, const GridDesign& grid, double sigma, std::uint64_t seed,
                    std::uint32_t replicate) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma", "must be a finite value >= 0");
  std::vector<double> y(grid.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fn.eval(grid.point(i));
  if (sigma > 0.0) {
    const auto eps = standard_normal_noise(grid.size(), seed, StreamPurpose::data, replicate);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += sigma * eps[i];
  }
  return Field(grid, std::move(y));
}

bool RegionBox::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i < lo.size() && x[i] < lo[i] - 1e-12) return false;
    if (i < hi.size() && x[i] > hi[i] + 1e-12) return false;
  }
  return true;
}

RegionPredicate RegionBox::predicate() const {
  return [box = *this](std::span<const double> x) { return box.contains(x); };
}

std::string RegionBox::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < std::max(lo.size(), hi.size()); ++i) {
    const double l = i < lo.size() ? lo[i] : -kInf;
    const double h = i < hi.size() ? hi[i] : kInf;
    if (std::isinf(l) && std::isinf(h)) continue;
    if (!out.empty()) out += '&';
    const std::string var = "x" + std::to_string(i + 1);
    if (!std::isinf(l) && !std::isinf(h)) out += format_double(l) + "<=" + var + "<=" + format_double(h);
    else if (!std::isinf(l)) out += var + ">=" + format_double(l);
    else out += var + "<=" + format_double(h);
  }
  return out.empty() ? "all" : out;
}

RegionBox parse_region(std::string_view text) {
  RegionBox box;
  auto bound = [&](std::size_t axis, double lo, double hi) {
    if (box.lo.size() <= axis) {
      box.lo.resize(axis + 1, -kInf);
      box.hi.resize(axis + 1, kInf);
    }
    box.lo[axis] = std::max(box.lo[axis], lo);
    box.hi[axis] = std::min(box.hi[axis], hi);
  };
  const auto whole = trim(text);
  if (whole.empty() || whole == "all") return box;
  std::string normalized = whole;
  std::replace(normalized.begin(), normalized.end(), ';', '&');
  std::replace(normalized.begin(), normalized.end(), ',', '&');
  std::istringstream parts(normalized);
  std::string clause;
  while (std::getline(parts, clause, '&')) {
    clause = trim(clause);
    if (clause.empty()) continue;
    // Tokens split on comparison operators: [num <=] xK (<=|>=) num
    std::vector<std::string> tokens;
    std::vector<std::string> ops;
    std::size_t pos = 0;
    while (pos <= clause.size()) {
      const auto next = clause.find_first_of("<>", pos);
      tokens.push_back(trim(clause.substr(pos, next == std::string::npos ? std::string::npos : next - pos)));
      if (next == std::string::npos) break;
      std::size_t op_len = (next + 1 < clause.size() && clause[next + 1] == '=') ? 2 : 1;
      ops.push_back(clause.substr(next, op_len));
      pos = next + op_len;
    }
    auto axis_of = [&](const std::string& tok) -> std::optional<std::size_t> {
      if (tok.size() < 2 || tok[0] != 'x') return std::nullopt;
      int k = 0;
      auto [ptr, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), k);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || k < 1) return std::nullopt;
      return static_cast<std::size_t>(k - 1);
    };
    auto apply = [&](const std::string& left, const std::string& op, const std::string& right) {
      const bool less = op[0] == '<';
      if (const auto ax = axis_of(left)) {
        const double v = to_number(right);
        less ? bound(*ax, -kInf, v) : bound(*ax, v, kInf);
      } else if (const auto ax2 = axis_of(right)) {
        const double v = to_number(left);
        less ? bound(*ax2, v, kInf) : bound(*ax2, -kInf, v);
      } else {
        throw ValidationError("region", "clause '" + clause + "' names no coordinate");
      }
    };
    if (ops.size() == 1 && tokens.size() == 2) {
      apply(tokens[0], ops[0], tokens[1]);
    } else if (ops.size() == 2 && tokens.size() == 3) {
      apply(tokens[0], ops[0], tokens[1]);
      apply(tokens[1], ops[1], tokens[2]);
    } else {
      throw ValidationError("region", "cannot parse clause '" + clause + "'");
    }
  }
  return box;
}

RegionBox central_box(int d, double lo, double hi) {
  return RegionBox{std::vector<double>(static_cast<std::size_t>(d), lo), std::vector<double>(static_cast<std::size_t>(d), hi)};
}

CoverageReport coverage_study(const TestFunction& fn, ShapeClass cls, const GridDesign& grid, std::size_t replicates,
                              const Calibration& cal, std::uint64_t seed, const StudyOptions& options) {
  if (!fn.has_class(cls)) {
    throw ValidationError("class", fn.id + " is not " + to_string(cls));
  }
  if (replicates < kMinReplicates) {
    throw ValidationError("replicates", "at least " + std::to_string(kMinReplicates) + " replicates are required");
  }
  check_context(cal, {grid.m(), grid.d(), cls, cal.policy, cal.alpha});
  const BandBuilder builder(grid, KernelPair::for_class(cls, grid.d()), cal.policy);
  const auto truth = Field::from_function(grid, fn.eval);
  std::vector<char> covered(replicates, 0);
  std::vector<double> mean_w(replicates), median_w(replicates);
  const auto everywhere = [](std::span<const double>) { return true; };
  parallel_for(replicates, options.threads, [&](std::size_t r) {
    const auto y = generate_data(fn, grid, options.sigma, seed, static_cast<std::uint32_t>(r));
    const auto band = builder.build(y, cal.kappa, options.sigma);
    covered[r] = check_coverage(band, truth).covered ? 1 : 0;
    const auto w = width_profile(band, everywhere);
    mean_w[r] = w.mean;
    median_w[r] = w.median;
  });
  CoverageReport rep;
  rep.function = fn.id;
  rep.cls = cls;
  rep.m = grid.m();
  rep.d = grid.d();
  rep.alpha = cal.alpha;
  rep.kappa = cal.kappa;
  rep.replicates = replicates;
  rep.covered = static_cast<std::size_t>(std::count(covered.begin(), covered.end(), 1));
  const double reps = static_cast<double>(replicates);
  rep.coverage = static_cast<double>(rep.covered) / reps;
  rep.std_error = std::sqrt(rep.coverage * (1.0 - rep.coverage) / reps);
  for (std::size_t r = 0; r < replicates; ++r) {
    rep.mean_width += mean_w[r] / reps;
    rep.median_width += median_w[r] / reps;
  }
  return rep;
}

std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit", "need at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ValidationError("fit", "x values are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

RateReport rate_diagnostic(const TestFunction& fn, ShapeClass cls, std::span<const int> grids, int d,
                           const RegionBox& region, std::uint64_t seed, const CalibrationProvider& calibration,
                           std::size_t replicates, const StudyOptions& options) {
  if (grids.size() < 3) throw ValidationError("grids", "at least three grid sizes are required");
  if (replicates < 1) throw ValidationError("replicates", "must be positive");
  if (!fn.has_class(cls)) throw ValidationError("class", fn.id + " is not " + to_string(cls));
  RateReport report;
  report.function = fn.id;
  report.cls = cls;
  const auto pred = region.predicate();
  std::vector<double> log_n, log_w;
  for (int m : grids) {
    const GridDesign grid(m, d);
    const auto cal = calibration(grid);
    check_context(cal, {m, d, cls, cal.policy, cal.alpha});
    const BandBuilder builder(grid, KernelPair::for_class(cls, d), cal.policy);
    std::vector<double> medians(replicates);
    parallel_for(replicates, options.threads, [&](std::size_t r) {
      const auto y = generate_data(fn, grid, options.sigma, seed, static_cast<std::uint32_t>(r));
      medians[r] = width_profile(builder.build(y, cal.kappa, options.sigma), pred).median;
    });
    double avg = 0.0;
    for (double v : medians) avg += v / static_cast<double>(replicates);
    report.rows.push_back({m, grid.size(), avg});
    log_n.push_back(std::log(static_cast<double>(grid.size())));
    log_w.push_back(std::log(avg));
  }
  std::tie(report.slope, report.intercept) = fit_line(log_n, log_w);
  return report;
}

DeviationMedians deviation_medians(const BandResult& band, const Field& truth, const RegionPredicate& region) {
  const auto& grid = band.grid();
  std::vector<double> up, down;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (band.vacuous[i] || !region(grid.point(i))) continue;
    up.push_back(band.upper[i] - truth[i]);
    down.push_back(truth[i] - band.lower[i]);
  }
  return {median_of(std::move(up)), median_of(std::move(down))};
}

std::vector<StudyRow> reference_table_rows() {
  return {{"zero", ShapeClass::isotonic, 50}, {"sum", ShapeClass::isotonic, 50},
          {"sum20", ShapeClass::isotonic, 50}, {"indicator", ShapeClass::isotonic, 50},
          {"zero", ShapeClass::convex, 50},    {"sum", ShapeClass::convex, 50},
          {"sum10", ShapeClass::convex, 50},   {"quad", ShapeClass::convex, 40}};
}

void write_report(std::ostream& out, const CoverageReport& r) {
  out << "[coverage]\n"
      << "function=" << r.function << '\n'
      << "class=" << to_string(r.cls) << '\n'
      << "m=" << r.m << '\n'
      << "d=" << r.d << '\n'
      << "alpha=" << format_double(r.alpha) << '\n'
      << "kappa=" << format_double(r.kappa) << '\n'
      << "replicates=" << r.replicates << '\n'
      << "covered=" << r.covered << '\n'
      << "coverage=" << format_double(r.coverage) << '\n'
      << "se=" << format_double(r.std_error) << '\n'
      << "mean_width=" << format_double(r.mean_width) << '\n'
      << "median_width=" << format_double(r.median_width) << '\n';
}

void write_report(std::ostream& out, const RateReport& r) {
  out << "[rates]\n"
      << "function=" << r.function << '\n'
      << "class=" << to_string(r.cls) << '\n';
  for (const auto& row : r.rows) {
    out << "row=m:" << row.m << ",n:" << row.n << ",median_width:" << format_double(row.median_width) << '\n';
  }
  out << "slope=" << format_double(r.slope) << '\n' << "intercept=" << format_double(r.intercept) << '\n';
}

std::vector<CoverageReport> read_coverage_reports(std::istream& in) {
  std::vector<CoverageReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "[coverage]") {
      out.emplace_back();
      continue;
    }
    if (out.empty()) throw DataError("report line outside a [coverage] section");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed report line '" + line + "'");
    const auto key = line.substr(0, eq);
    const auto val = line.substr(eq + 1);
    auto& r = out.back();
    if (key == "function") r.function = val;
    else if (key == "class") r.cls = parse_shape_class(val);
    else if (key == "m") r.m = std::stoi(val);
    else if (key == "d") r.d = std::stoi(val);
    else if (key == "alpha") r.alpha = to_number(val);
    else if (key == "kappa") r.kappa = to_number(val);
    else if (key == "replicates") r.replicates = std::stoull(val);
    else if (key == "covered") r.covered = std::stoull(val);
    else if (key == "coverage") r.coverage = to_number(val);
    else if (key == "se") r.std_error = to_number(val);
    else if (key == "mean_width") r.mean_width = to_number(val);
    else if (key == "median_width") r.median_width = to_number(val);
    else throw DataError("unknown report key '" + key + "'");
  }
  return out;
}

void print_coverage_table(std::ostream& out, std::span<const CoverageReport> reports) {
  std::size_t fw = 6;
  for (const auto& r : reports) fw = std::max(fw, find_function(r.function).formula.size());
  const auto saved = out.flags();
  out << std::left << std::setw(static_cast<int>(fw)) << "f(x)" << "  " << std::setw(9) << "class" << "  "
      << std::right << std::setw(4) << "m" << "  " << std::setw(8) << "coverage" << "  " << std::setw(6) << "se"
      << "  " << std::setw(5) << "reps" << "  " << std::setw(8) << "kappa" << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(fw)) << find_function(r.function).formula << "  " << std::setw(9)
        << to_string(r.cls) << "  " << std::right << std::setw(4) << r.m << "  " << std::fixed << std::setprecision(3)
        << std::setw(8) << r.coverage << "  " << std::setw(6) << r.std_error << "  " << std::setw(5) << r.replicates
        << "  " << std::setw(8) << r.kappa << '\n';
  }
  out.flags(saved);
}

void print_rate_table(std::ostream& out, const RateReport& r) {
  const auto saved = out.flags();
  out << "function " << r.function << " (" << to_string(r.cls) << ")\n";
  out << std::right << std::setw(5) << "m" << "  " << std::setw(8) << "n" << "  " << std::setw(12) << "median_width"
      << '\n';
  for (const auto& row : r.rows) {
    out << std::setw(5) << row.m << "  " << std::setw(8) << row.n << "  " << std::fixed << std::setprecision(6)
        << std::setw(12) << row.median_width << '\n';
  }
  out << std::fixed << std::setprecision(4) << "slope of log(width) on log(n): " << r.slope << '\n';
  out.flags(saved);
}

}  // namespace shapeband
