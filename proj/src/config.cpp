#include "shapeband/config.hpp"

#include <charconv>
#include <sstream>

#include "shapeband/calibration.hpp"
#include "shapeband/error.hpp"

namespace shapeband {

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError(std::string(key), "cannot parse '" + std::string(text) + "'");
  }
  return v;
}

// Regions may contain commas, so they are stored one per line.
std::string join(const std::vector<int>& v) {
  std::string out;
  for (int x : v) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

}  // namespace

BandwidthPolicy RunConfig::resolved_policy() const {
  return policy.empty() ? default_policy(m, d) : parse_policy(policy);
}

std::size_t RunConfig::resolved_nsim() const { return nsim == 0 ? default_nsim(m) : nsim; }

void RunConfig::validate() const {
  if (m < 4) throw ValidationError("m", "must be at least 4");
  if (d < 1) throw ValidationError("d", "must be at least 1");
  validate_alpha(alpha);
  if (nsim != 0 && nsim < kMinReplicates) {
    throw ValidationError("nsim", "must be at least " + std::to_string(kMinReplicates));
  }
  if (!(sigma > 0.0) || sigma != sigma || sigma > 1e300) throw ValidationError("sigma", "must be positive and finite");
  if (threads < 1) throw ValidationError("threads", "must be positive");
  if (!policy.empty()) parse_policy(policy);
  for (int g : grids) {
    if (g < 4) throw ValidationError("grids", "grid sizes must be at least 4");
  }
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    out.push_back(parse_number<int>("grids", item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "subcommand=" << c.subcommand << '\n'
      << "class=" << to_string(c.cls) << '\n'
      << "m=" << c.m << '\n'
      << "d=" << c.d << '\n'
      << "alpha=" << format_double(c.alpha) << '\n'
      << "nsim=" << c.nsim << '\n'
      << "replicates=" << c.replicates << '\n'
      << "seed=" << c.seed << '\n'
      << "policy=" << c.policy << '\n'
      << "sigma=" << format_double(c.sigma) << '\n'
      << "threads=" << c.threads << '\n'
      << "function=" << c.function << '\n'
      << "grids=" << join(c.grids) << '\n';
  for (const auto& r : c.regions) out << "region=" << r << '\n';
  out << "data=" << c.data_path << '\n' << "cal=" << c.cal_path << '\n' << "out=" << c.out_path << '\n';
  return out.str();
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config", "malformed line '" + line + "'");
    const auto key = line.substr(0, eq);
    const std::string_view val = std::string_view(line).substr(eq + 1);
    if (key == "subcommand") c.subcommand = val;
    else if (key == "class") c.cls = parse_shape_class(val);
    else if (key == "m") c.m = parse_number<int>(key, val);
    else if (key == "d") c.d = parse_number<int>(key, val);
    else if (key == "alpha") c.alpha = parse_number<double>(key, val);
    else if (key == "nsim") c.nsim = parse_number<std::size_t>(key, val);
    else if (key == "replicates") c.replicates = parse_number<std::size_t>(key, val);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, val);
    else if (key == "policy") c.policy = val;
    else if (key == "sigma") c.sigma = parse_number<double>(key, val);
    else if (key == "threads") c.threads = parse_number<int>(key, val);
    else if (key == "function") c.function = val;
    else if (key == "grids") c.grids = val.empty() ? std::vector<int>{} : parse_int_list(val);
    else if (key == "region") c.regions.emplace_back(val);
    else if (key == "data") c.data_path = val;
    else if (key == "cal") c.cal_path = val;
    else if (key == "out") c.out_path = val;
    else throw ValidationError("config", "unknown key '" + key + "'");
  }
  return c;
}

}  // namespace shapeband
