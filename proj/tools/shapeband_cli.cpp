// shapeband: confidence bands for monotone and convex regression on grids.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shapeband/bands.hpp"
#include "shapeband/calibration.hpp"
#include "shapeband/config.hpp"
#include "shapeband/constants.hpp"
#include "shapeband/error.hpp"
#include "shapeband/parallel.hpp"
#include "shapeband/sim.hpp"

namespace sb = shapeband;

namespace {

struct Options {
  sb::RunConfig cfg;
  std::string cls;
  std::string truth;
  std::string plot_path;
  std::string cache_dir;
  std::string config_out;
  std::string grids = "16,24,32,48";
  bool all_builtins = false;
  bool m_given = false;
  std::uint32_t replicate = 0;
  std::vector<int> dims;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sb::Error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sb::Error("cannot open '" + path + "'");
  return in;
}

sb::Calibration obtain_calibration(const Options& o, const sb::GridDesign& grid, sb::ShapeClass cls) {
  const auto& c = o.cfg;
  const auto policy = c.policy.empty() ? sb::default_policy(grid.m(), grid.d()) : sb::parse_policy(c.policy);
  const auto nsim = c.nsim == 0 ? sb::default_nsim(grid.m()) : c.nsim;
  if (!o.cache_dir.empty()) {
    return sb::cached_calibration(o.cache_dir, grid, cls, policy, c.alpha, nsim, c.seed, c.threads);
  }
  return sb::calibrate(grid, cls, policy, c.alpha, nsim, c.seed, c.threads);
}

int cmd_calibrate(const Options& o) {
  const auto& c = o.cfg;
  const sb::GridDesign grid(c.m, c.d);
  const auto cal = sb::calibrate(grid, c.cls, c.resolved_policy(), c.alpha, c.resolved_nsim(), c.seed, c.threads);
  sb::save_calibration(cal, c.out_path);
  std::cout << "kappa=" << sb::format_double(cal.kappa) << " se=" << sb::format_double(cal.std_error)
            << " nsim=" << cal.nsim << " policy=" << sb::to_string(cal.policy) << '\n';
  return 0;
}

int cmd_simulate(const Options& o) {
  const auto& c = o.cfg;
  const auto& fn = sb::find_function(c.function);
  const sb::GridDesign grid(c.m, c.d);
  const auto y = sb::generate_data(fn, grid, c.sigma, c.seed, o.replicate);
  auto out = open_out(c.out_path);
  sb::write_field_csv(out, y);
  return 0;
}

int cmd_band(const Options& o) {
  const auto& c = o.cfg;
  const auto cal = sb::load_calibration(c.cal_path);
  const sb::GridDesign grid(cal.m, cal.d);
  auto in = open_in(c.data_path);
  const auto y = sb::read_field_csv(in, grid);
  const sb::BandBuilder builder(grid, sb::KernelPair::for_class(cal.kernel_pair, cal.d), cal.policy);
  const auto band = builder.build(y, cal, c.sigma);
  {
    auto out = open_out(c.out_path);
    sb::write_band_csv(out, band);
  }
  std::optional<sb::Field> truth;
  if (!o.truth.empty()) truth = sb::Field::from_function(grid, sb::find_function(o.truth).eval);
  if (!o.plot_path.empty()) {
    auto out = open_out(o.plot_path);
    sb::write_plot_data(out, band, truth ? &*truth : nullptr);
  }
  const auto w = sb::width_profile(band, [](std::span<const double>) { return true; });
  std::cout << "width min=" << sb::format_double(w.min) << " median=" << sb::format_double(w.median)
            << " max=" << sb::format_double(w.max) << " points=" << w.points << " vacuous=" << band.vacuous_count()
            << '\n';
  if (truth) std::cout << "covered=" << (sb::check_coverage(band, *truth).covered ? "yes" : "no") << '\n';
  return 0;
}

int cmd_coverage(const Options& o) {
  const auto& c = o.cfg;
  std::vector<sb::StudyRow> rows;
  if (o.all_builtins) {
    rows = sb::reference_table_rows();
    if (o.m_given) {
      for (auto& r : rows) r.m = c.m;
    }
  } else {
    if (c.function.empty()) throw sb::ValidationError("function", "give --function or --all-builtins");
    if (o.cls.empty()) throw sb::ValidationError("class", "--class is required with --function");
    rows.push_back({sb::find_function(c.function).id, c.cls, c.m});
  }
  if (!c.cal_path.empty() && rows.size() != 1) {
    throw sb::ValidationError("cal", "a calibration file applies to a single study");
  }
  std::vector<sb::CoverageReport> reports;
  for (const auto& row : rows) {
    const sb::GridDesign grid(row.m, c.d);
    const auto cal = c.cal_path.empty() ? obtain_calibration(o, grid, row.cls) : sb::load_calibration(c.cal_path);
    reports.push_back(sb::coverage_study(sb::find_function(row.function), row.cls, grid, c.replicates, cal, c.seed,
                                         {c.threads, c.sigma}));
  }
  sb::print_coverage_table(std::cout, reports);
  if (!c.out_path.empty()) {
    auto out = open_out(c.out_path);
    for (const auto& r : reports) sb::write_report(out, r);
  }
  return 0;
}

int cmd_rates(const Options& o) {
  const auto& c = o.cfg;
  const auto& fn = sb::find_function(c.function);
  const auto regions = c.regions.empty() ? std::vector<std::string>{"0.25<=x1<=0.75"} : c.regions;
  std::ofstream out;
  if (!c.out_path.empty()) out = open_out(c.out_path);
  const sb::CalibrationProvider provider = [&](const sb::GridDesign& g) { return obtain_calibration(o, g, c.cls); };
  for (const auto& text : regions) {
    auto region = sb::parse_region(text);
    if (c.regions.empty()) region = sb::central_box(c.d, 0.25, 0.75);
    const auto report = sb::rate_diagnostic(fn, c.cls, c.grids, c.d, region, c.seed, provider,
                                            c.replicates, {c.threads, c.sigma});
    std::cout << "region " << region.to_string() << '\n';
    sb::print_rate_table(std::cout, report);
    if (out.is_open()) sb::write_report(out, report);
  }
  return 0;
}

int cmd_constants(const Options& o) {
  std::vector<sb::ShapeClass> classes;
  if (o.cls.empty()) classes = {sb::ShapeClass::isotonic, sb::ShapeClass::convex};
  else classes = {sb::parse_shape_class(o.cls)};
  std::vector<sb::OptimalityConstants> rows;
  for (auto cls : classes) {
    for (int d : o.dims) rows.push_back(sb::optimal_constants(cls, d));
  }
  std::cout << std::left << std::setw(9) << "class" << std::right << std::setw(3) << "d" << std::setw(10)
            << "exponent" << std::setw(12) << "delta_l" << std::setw(12) << "delta_u" << std::setw(12) << "delta_l*"
            << std::setw(12) << "delta_u*" << '\n';
  for (const auto& r : rows) {
    std::ostringstream line;
    line << std::left << std::setw(9) << sb::to_string(r.cls) << std::right << std::setw(3) << r.d << std::fixed
         << std::setprecision(5) << std::setw(10) << r.rate_exponent << std::setw(12) << r.delta_lower
         << std::setw(12) << r.delta_upper;
    if (r.cls == sb::ShapeClass::convex) line << std::setw(12) << r.delta_lower_star << std::setw(12) << r.delta_upper_star;
    else line << std::setw(12) << "-" << std::setw(12) << "-";
    std::cout << line.str() << '\n';
  }
  std::cout << '\n';
  for (const auto& r : rows) {
    std::cout << "class=" << sb::to_string(r.cls) << " d=" << r.d << " exponent=" << sb::format_double(r.rate_exponent)
              << " delta_lower=" << sb::format_double(r.delta_lower)
              << " delta_upper=" << sb::format_double(r.delta_upper);
    if (r.cls == sb::ShapeClass::convex) {
      std::cout << " delta_lower_star=" << sb::format_double(r.delta_lower_star)
                << " delta_upper_star=" << sb::format_double(r.delta_upper_star)
                << " alpha_d=" << sb::format_double(r.alpha_d);
    }
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Honest confidence bands for isotonic and convex regression on grids"};
  app.require_subcommand(1);
  Options o;
  auto& c = o.cfg;
  c.threads = sb::default_thread_count();
  app.add_option("--threads", c.threads, "Worker threads (default: SHAPEBAND_THREADS or 1)");
  app.add_option("--config-out", o.config_out, "Write the resolved run configuration to this file");

  auto grid_opts = [&](CLI::App* sub) {
    sub->add_option("--m", c.m, "Grid points per axis")->each([&](const std::string&) { o.m_given = true; });
    sub->add_option("--d", c.d, "Dimension");
  };
  auto cal_opts = [&](CLI::App* sub) {
    sub->add_option("--alpha", c.alpha, "Significance level");
    sub->add_option("--nsim", c.nsim, "Monte Carlo replicates for the critical value");
    sub->add_option("--policy", c.policy, "Bandwidth policy: full or dyadic");
    sub->add_option("--cache-dir", o.cache_dir, "Directory for reusable calibration files");
  };

  auto* calibrate = app.add_subcommand("calibrate", "Simulate the critical value and store it");
  calibrate->add_option("--class", o.cls, "isotonic or convex")->required();
  grid_opts(calibrate);
  cal_opts(calibrate);
  calibrate->add_option("--seed", c.seed, "Random seed");
  calibrate->add_option("--out", c.out_path, "Calibration file")->required();

  auto* simulate = app.add_subcommand("simulate", "Write noisy observations of a built-in function");
  simulate->add_option("--function", c.function, "Built-in function id")->required();
  grid_opts(simulate);
  simulate->add_option("--sigma", c.sigma, "Noise level");
  simulate->add_option("--seed", c.seed, "Random seed");
  simulate->add_option("--replicate", o.replicate, "Replicate index");
  simulate->add_option("--out", c.out_path, "Output CSV")->required();

  auto* band = app.add_subcommand("band", "Compute a confidence band from data and a calibration");
  band->add_option("--data", c.data_path, "Data CSV (x1..xd,y)")->required();
  band->add_option("--cal", c.cal_path, "Calibration file")->required();
  band->add_option("--out", c.out_path, "Band CSV")->required();
  band->add_option("--sigma", c.sigma, "Known noise level");
  band->add_option("--plot-data", o.plot_path, "Plot grid CSV");
  band->add_option("--truth", o.truth, "Built-in function to include in plot data and check coverage of");

  auto* coverage = app.add_subcommand("coverage", "Coverage study");
  coverage->add_option("--function", c.function, "Built-in function id");
  coverage->add_option("--class", o.cls, "isotonic or convex");
  coverage->add_flag("--all-builtins", o.all_builtins, "Run the eight reference rows");
  grid_opts(coverage);
  cal_opts(coverage);
  coverage->add_option("--cal", c.cal_path, "Use this calibration instead of simulating one");
  coverage->add_option("--reps", c.replicates, "Replicates");
  coverage->add_option("--sigma", c.sigma, "Noise level");
  coverage->add_option("--seed", c.seed, "Random seed");
  coverage->add_option("--out", c.out_path, "Report file");

  auto* rates = app.add_subcommand("rates", "Width versus n on a region");
  rates->add_option("--function", c.function, "Built-in function id")->required();
  rates->add_option("--class", o.cls, "isotonic or convex")->required();
  rates->add_option("--grids", o.grids, "Comma-separated grid sizes");
  rates->add_option("--region", c.regions, "Region such as \"x1<=0.3\" (repeatable)");
  rates->add_option("--d", c.d, "Dimension");
  cal_opts(rates);
  rates->add_option("--reps", c.replicates, "Replicates per grid")->default_val(3);
  rates->add_option("--sigma", c.sigma, "Noise level");
  rates->add_option("--seed", c.seed, "Random seed");
  rates->add_option("--out", c.out_path, "Report file");

  auto* constants = app.add_subcommand("constants", "Print optimality constants");
  constants->add_option("--class", o.cls, "isotonic or convex (default: both)");
  constants->add_option("--d", o.dims, "Dimension(s)")->default_val(std::vector<int>{2});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto* sub = app.get_subcommands().front();
  c.subcommand = sub->get_name();
  try {
    if (sub != constants) {
      if (!o.cls.empty()) c.cls = sb::parse_shape_class(o.cls);
      c.grids = sb::parse_int_list(o.grids);
      if (sub != band) c.validate();
      else if (!(c.sigma > 0.0)) throw sb::ValidationError("sigma", "must be positive and finite");
    } else {
      if (o.dims.empty()) throw sb::ValidationError("d", "at least one dimension is required");
      for (int d : o.dims) {
        if (d < 1) throw sb::ValidationError("d", "must be at least 1");
      }
    }
    if (sub == coverage && c.replicates < sb::kMinReplicates) {
      throw sb::ValidationError("reps", "at least " + std::to_string(sb::kMinReplicates) + " replicates are required");
    }
    if (sub == rates && c.replicates < 1) throw sb::ValidationError("reps", "must be positive");
    if (!o.config_out.empty()) {
      auto out = open_out(o.config_out);
      out << sb::serialize_config(c);
    }
  } catch (const sb::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (sub == calibrate) return cmd_calibrate(o);
    if (sub == simulate) return cmd_simulate(o);
    if (sub == band) return cmd_band(o);
    if (sub == coverage) return cmd_coverage(o);
    if (sub == rates) return cmd_rates(o);
    return cmd_constants(o);
  } catch (const sb::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
