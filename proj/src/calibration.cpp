#include "shapeband/calibration.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <boost/crc.hpp>

#include "shapeband/error.hpp"
#include "shapeband/parallel.hpp"
#include "shapeband/scan.hpp"

namespace shapeband {

namespace {

constexpr std::string_view kMagic = "shapeband-calibration";
constexpr int kFormatVersion = 1;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') throw IntegrityError("calibration field '" + key + "' is not a number");
  return v;
}

std::uint32_t crc32(std::string_view text) {
  boost::crc_32_type crc;
  crc.process_bytes(text.data(), text.size());
  return crc.checksum();
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08" PRIx32, v);
  return buf;
}

}  // namespace

std::size_t default_nsim(int m) { return m <= 30 ? 2000 : 1000; }

void validate_alpha(double alpha) {
  if (!(alpha > 0.001 && alpha <= 0.5)) {
    throw ValidationError("alpha", "must lie in (0.001, 0.5], got " + format_double(alpha));
  }
}

std::vector<double> standard_normal_noise(std::size_t n, std::uint64_t seed, StreamPurpose purpose,
                                          std::uint32_t replicate) {
  auto rng = substream(seed, purpose, replicate);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = normal(rng);
  return out;
}

std::vector<double> null_statistics(const GridDesign& grid, ShapeClass pair, BandwidthPolicy policy, std::size_t nsim,
                                    std::uint64_t seed, int threads) {
  const auto kernels = KernelPair::for_class(pair, grid.d());
  const ScanPlan plan(grid, {kernels.lower, kernels.upper}, policy);
  std::vector<double> stats(nsim);
  parallel_for(nsim, threads, [&](std::size_t r) {
    const auto noise = standard_normal_noise(grid.size(), seed, StreamPurpose::calibration, static_cast<std::uint32_t>(r));
    stats[r] = tstar_components(plan, noise).value();
  });
  return stats;
}

double upper_order_statistic(std::span<const double> values, double alpha) {
  if (values.empty()) throw ValidationError("values", "no replicate statistics");
  std::vector<double> sorted(values.begin(), values.end());
  const auto n = static_cast<double>(sorted.size());
  // The small slack keeps e.g. 0.95 * 2000 at rank 1900 despite rounding.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  return sorted[rank - 1];
}

double bootstrap_quantile_se(std::span<const double> values, double alpha, std::uint64_t seed, std::size_t resamples) {
  if (values.size() < 2 || resamples < 2) return 0.0;
  auto rng = substream(seed, StreamPurpose::bootstrap, 0);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> resample(values.size());
  std::vector<double> estimates(resamples);
  for (auto& est : estimates) {
    for (auto& v : resample) v = values[pick(rng)];
    est = upper_order_statistic(resample, alpha);
  }
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= static_cast<double>(resamples);
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  return std::sqrt(ss / static_cast<double>(resamples - 1));
}

Calibration calibration_from_statistics(std::span<const double> statistics, const GridDesign& grid, ShapeClass pair,
                                        BandwidthPolicy policy, double alpha, std::uint64_t seed) {
  validate_alpha(alpha);
  if (statistics.size() < kMinReplicates) {
    throw ValidationError("nsim", "at least " + std::to_string(kMinReplicates) + " replicates are required");
  }
  for (double s : statistics) {
    if (!std::isfinite(s)) throw DataError("non-finite replicate statistic");
  }
  Calibration cal;
  cal.alpha = alpha;
  cal.kappa = upper_order_statistic(statistics, alpha);
  cal.nsim = statistics.size();
  cal.seed = seed;
  cal.m = grid.m();
  cal.d = grid.d();
  cal.kernel_pair = pair;
  cal.policy = policy;
  cal.std_error = bootstrap_quantile_se(statistics, alpha, seed);
  return cal;
}

Calibration calibrate(const GridDesign& grid, ShapeClass pair, BandwidthPolicy policy, double alpha, std::size_t nsim,
                      std::uint64_t seed, int threads) {
  validate_alpha(alpha);
  if (nsim < kMinReplicates) {
    throw ValidationError("nsim", "at least " + std::to_string(kMinReplicates) + " replicates are required, got " +
                                      std::to_string(nsim));
  }
  const auto stats = null_statistics(grid, pair, policy, nsim, seed, threads);
  return calibration_from_statistics(stats, grid, pair, policy, alpha, seed);
}

void check_context(const Calibration& cal, const CalibrationContext& expected) {
  if (cal.m != expected.m) {
    throw ContextMismatchError("m", "stored " + std::to_string(cal.m) + ", expected " + std::to_string(expected.m));
  }
  if (cal.d != expected.d) {
    throw ContextMismatchError("d", "stored " + std::to_string(cal.d) + ", expected " + std::to_string(expected.d));
  }
  if (cal.kernel_pair != expected.kernel_pair) {
    throw ContextMismatchError("kernel_pair", "stored " + to_string(cal.kernel_pair) + ", expected " +
                                                  to_string(expected.kernel_pair));
  }
  if (cal.policy != expected.policy) {
    throw ContextMismatchError("policy", "stored " + to_string(cal.policy) + ", expected " + to_string(expected.policy));
  }
  if (cal.alpha != expected.alpha) {
    throw ContextMismatchError("alpha", "stored " + format_double(cal.alpha) + ", expected " + format_double(expected.alpha));
  }
}

std::string serialize_calibration(const Calibration& cal) {
  std::ostringstream body;
  body << kMagic << ' ' << kFormatVersion << '\n';
  body << "m=" << cal.m << '\n';
  body << "d=" << cal.d << '\n';
  body << "kernel_pair=" << to_string(cal.kernel_pair) << '\n';
  body << "policy=" << to_string(cal.policy) << '\n';
  body << "alpha=" << hex_double(cal.alpha) << '\n';
  body << "kappa=" << hex_double(cal.kappa) << '\n';
  body << "kappa_decimal=" << format_double(cal.kappa) << '\n';
  body << "std_error=" << hex_double(cal.std_error) << '\n';
  body << "nsim=" << cal.nsim << '\n';
  body << "seed=" << cal.seed << '\n';
  const auto text = body.str();
  return text + "checksum=" + hex32(crc32(text)) + '\n';
}

Calibration parse_calibration(std::string_view text) {
  const auto pos = text.rfind("checksum=");
  if (pos == std::string_view::npos) throw IntegrityError("calibration record has no checksum");
  const auto body = text.substr(0, pos);
  std::string stored(text.substr(pos + 9));
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  if (stored != hex32(crc32(body))) throw IntegrityError("calibration checksum mismatch (file altered or truncated)");

  std::istringstream in{std::string(body)};
  std::string line;
  std::getline(in, line);
  if (line != std::string(kMagic) + ' ' + std::to_string(kFormatVersion)) {
    throw IntegrityError("unsupported calibration header '" + line + "'");
  }
  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IntegrityError("malformed calibration line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IntegrityError("calibration record lacks '" + key + "'");
    return it->second;
  };
  Calibration cal;
  try {
    cal.m = std::stoi(need("m"));
    cal.d = std::stoi(need("d"));
    cal.nsim = static_cast<std::size_t>(std::stoull(need("nsim")));
    cal.seed = std::stoull(need("seed"));
    cal.kernel_pair = parse_shape_class(need("kernel_pair"));
    cal.policy = parse_policy(need("policy"));
  } catch (const IntegrityError&) {
    throw;
  } catch (const std::exception& e) {
    throw IntegrityError(std::string("malformed calibration record: ") + e.what());
  }
  cal.alpha = parse_double("alpha", need("alpha"));
  cal.kappa = parse_double("kappa", need("kappa"));
  cal.std_error = parse_double("std_error", need("std_error"));
  if (!std::isfinite(cal.kappa)) throw IntegrityError("calibration kappa is not finite");
  return cal;
}

void save_calibration(const Calibration& cal, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write calibration file " + path.string());
  out << serialize_calibration(cal);
  if (!out) throw Error("failed writing calibration file " + path.string());
}

Calibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read calibration file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_calibration(buf.str());
}

Calibration load_calibration(const std::filesystem::path& path, const CalibrationContext& expected) {
  auto cal = load_calibration(path);
  check_context(cal, expected);
  return cal;
}

Calibration cached_calibration(const std::filesystem::path& dir, const GridDesign& grid, ShapeClass pair,
                               BandwidthPolicy policy, double alpha, std::size_t nsim, std::uint64_t seed, int threads) {
  std::filesystem::create_directories(dir);
  char name[160];
  std::snprintf(name, sizeof(name), "cal_%s_%s_m%d_d%d_a%s_n%zu_s%" PRIu64 ".kv", to_string(pair).c_str(),
                to_string(policy).c_str(), grid.m(), grid.d(), format_double(alpha).c_str(), nsim, seed);
  const auto path = dir / name;
  if (std::filesystem::exists(path)) {
    try {
      auto cal = load_calibration(path, {grid.m(), grid.d(), pair, policy, alpha});
      if (cal.nsim == nsim && cal.seed == seed) return cal;
    } catch (const Error&) {
      // fall through and recompute a damaged or foreign record
    }
  }
  auto cal = calibrate(grid, pair, policy, alpha, nsim, seed, threads);
  save_calibration(cal, path);
  return cal;
}

}  // namespace shapeband
