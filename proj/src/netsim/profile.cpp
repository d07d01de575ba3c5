#include "ooload/netsim/profile.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ooload/core/error.hpp"
#include "ooload/core/rng.hpp"

namespace ooload::netsim {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(value), &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InvalidSpec("profile key '" + std::string(key) + "' has non-numeric value '" +
                      std::string(value) + "'");
  }
}

NetProfile make(std::string name, double rtt_ms, double bw, double frac, double factor,
                double jitter_ms, std::uint64_t seed) {
  NetProfile p;
  p.name = std::move(name);
  p.rtt_s = rtt_ms / 1e3;
  p.bandwidth_bytes_per_s = bw;
  p.congested_fraction = frac;
  p.congestion_factor = factor;
  p.jitter_s = jitter_ms / 1e3;
  p.seed = seed;
  return p;
}

// Per-connection link capacity of the desk-scale presets: 80 MB/s, so that 32
// connections give ~2.5 GB/s uncongested.
constexpr double kPresetLinkBandwidth = 80e6;

}  // namespace

void NetProfile::validate() const {
  if (!(rtt_s >= 0.0)) throw InvalidSpec("rtt must be >= 0");
  if (!(bandwidth_bytes_per_s >= 0.0)) throw InvalidSpec("bandwidth must be >= 0");
  if (!(congested_fraction >= 0.0 && congested_fraction <= 1.0)) {
    throw InvalidSpec("congested_fraction must lie in [0, 1]");
  }
  if (!(congestion_factor > 0.0 && congestion_factor <= 1.0)) {
    throw InvalidSpec("congestion_factor must lie in (0, 1]");
  }
  if (!(jitter_s >= 0.0)) throw InvalidSpec("jitter must be >= 0");
}

std::size_t NetProfile::congested_count(std::size_t n) const noexcept {
  // Nudge by an epsilon so that 0.25 * 32 is exactly 8 despite rounding.
  return static_cast<std::size_t>(std::floor(congested_fraction * static_cast<double>(n) + 1e-9));
}

std::vector<bool> NetProfile::congested_mask(std::size_t n) const {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    const auto ha = splitmix64(seed ^ splitmix64(a));
    const auto hb = splitmix64(seed ^ splitmix64(b));
    return ha != hb ? ha < hb : a < b;
  });
  std::vector<bool> mask(n, false);
  const std::size_t k = congested_count(n);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = true;
  return mask;
}

double NetProfile::link_bandwidth(std::size_t index, std::size_t n) const {
  if (unlimited()) return 0.0;
  const auto mask = congested_mask(n);
  return index < n && mask[index] ? bandwidth_bytes_per_s * congestion_factor : bandwidth_bytes_per_s;
}

NetProfile NetProfile::dilated(double factor) const {
  if (!(factor > 0.0)) throw InvalidSpec("time dilation factor must be > 0");
  NetProfile p = *this;
  p.rtt_s *= factor;
  p.jitter_s *= factor;
  p.bandwidth_bytes_per_s /= factor;
  return p;
}

NetProfile NetProfile::parse(std::string_view text, std::string name) {
  NetProfile p;
  p.name = std::move(name);
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidSpec("profile line " + std::to_string(line_no) + " is not key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "rtt_ms") {
      p.rtt_s = parse_double(key, value) / 1e3;
    } else if (key == "bw_bytes_per_s") {
      p.bandwidth_bytes_per_s = parse_double(key, value);
    } else if (key == "congested_fraction") {
      p.congested_fraction = parse_double(key, value);
    } else if (key == "congestion_factor") {
      p.congestion_factor = parse_double(key, value);
    } else if (key == "jitter_ms") {
      p.jitter_s = parse_double(key, value) / 1e3;
    } else if (key == "seed") {
      std::uint64_t seed = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
      if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw InvalidSpec("profile seed must be an unsigned integer");
      }
      p.seed = seed;
    } else if (key == "name") {
      p.name = std::string(value);
    } else {
      throw InvalidSpec("unknown profile key '" + std::string(key) + "'");
    }
  }
  p.validate();
  return p;
}

std::string NetProfile::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "name=" << name << '\n'
      << "rtt_ms=" << rtt_s * 1e3 << '\n'
      << "bw_bytes_per_s=" << bandwidth_bytes_per_s << '\n'
      << "congested_fraction=" << congested_fraction << '\n'
      << "congestion_factor=" << congestion_factor << '\n'
      << "jitter_ms=" << jitter_s * 1e3 << '\n'
      << "seed=" << seed << '\n';
  return out.str();
}

NetProfile NetProfile::preset(std::string_view name) {
  if (name == "identity") return make("identity", 0, 0, 0, 1, 0, 0);
  if (name == "low") return make("low", 0.5, kPresetLinkBandwidth, 0, 1, 0.02, 1);
  if (name == "med") return make("med", 20, kPresetLinkBandwidth, 0, 1, 0.5, 2);
  if (name == "high") return make("high", 150, kPresetLinkBandwidth, 0.25, 0.125, 2, 3);
  if (name == "high-clear") return make("high-clear", 150, kPresetLinkBandwidth, 0, 1, 2, 3);
  throw InvalidSpec("unknown profile preset '" + std::string(name) + "'");
}

const std::vector<std::string>& NetProfile::preset_names() {
  static const std::vector<std::string> names = {"identity", "low", "med", "high", "high-clear"};
  return names;
}

NetProfile NetProfile::resolve(const std::string& name_or_path) {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return preset(name_or_path);
  }
  std::ifstream in(name_or_path);
  if (!in) throw InvalidSpec("no preset or readable profile file named '" + name_or_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  auto stem = name_or_path;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (auto dot = stem.rfind(".profile"); dot != std::string::npos) stem = stem.substr(0, dot);
  return parse(buf.str(), stem);
}

}  // namespace ooload::netsim
