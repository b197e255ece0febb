#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "shapeband/grid.hpp"
#include "shapeband/kernels.hpp"

namespace shapeband {

/// Settings of one CLI invocation. Text form is one key=value per line.
struct RunConfig {
  std::string subcommand;
  ShapeClass cls = ShapeClass::isotonic;
  int m = 50;
  int d = 2;
  double alpha = 0.05;
  std::size_t nsim = 0;  // 0: default for m
  std::size_t replicates = 200;
  std::uint64_t seed = 1;
  std::string policy;  // empty: default for (m, d)
  double sigma = 1.0;
  int threads = 1;
  std::string function;
  std::vector<int> grids;
  std::vector<std::string> regions;
  std::string data_path;
  std::string cal_path;
  std::string out_path;

  BandwidthPolicy resolved_policy() const;
  std::size_t resolved_nsim() const;
  /// Checks every numeric field against the preconditions it feeds.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

std::string serialize_config(const RunConfig& config);
RunConfig parse_config(std::string_view text);

/// Parses "16,24,32" into integers.
std::vector<int> parse_int_list(std::string_view text);

}  // namespace shapeband
