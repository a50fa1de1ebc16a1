#include "oocmem/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "oocmem/error.hpp"

namespace oocmem {
namespace {

constexpr std::array<std::string_view, 8> kKeys = {
    "ram_limit_bytes",      "preemptive_fraction", "significance_level", "swap_dir",
    "swap_file_size_bytes", "swap_policy",         "overcommit",         "worker_count",
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  raise(ErrorCode::ConfigError, std::string(key) + "='" + std::string(value) + "': " + std::string(why));
}

double parse_real(std::string_view key, std::string_view value) {
  std::string buf(value);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v)) bad(key, value, "not a number");
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  auto v = lower(value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad(key, value, "not a boolean");
}

}  // namespace

std::uint64_t parse_bytes(std::string_view text) {
  auto t = trim(text);
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr == t.data()) bad("bytes", text, "expected an integer with optional K/M/G suffix");
  auto suffix = lower(std::string_view(ptr, static_cast<std::size_t>(t.data() + t.size() - ptr)));
  unsigned shift = 0;
  if (suffix.empty() || suffix == "b") shift = 0;
  else if (suffix == "k" || suffix == "kb" || suffix == "kib") shift = 10;
  else if (suffix == "m" || suffix == "mb" || suffix == "mib") shift = 20;
  else if (suffix == "g" || suffix == "gb" || suffix == "gib") shift = 30;
  else bad("bytes", text, "unknown size suffix");
  if (shift && value > (std::numeric_limits<std::uint64_t>::max() >> shift)) bad("bytes", text, "overflow");
  return value << shift;
}

SwapPolicy parse_swap_policy(std::string_view text) {
  auto v = lower(trim(text));
  if (v == "fail") return SwapPolicy::Fail;
  if (v == "interactive") return SwapPolicy::Interactive;
  if (v == "autoextend") return SwapPolicy::AutoExtend;
  bad("swap_policy", text, "expected fail|interactive|autoextend");
}

std::string_view to_string(SwapPolicy policy) {
  switch (policy) {
    case SwapPolicy::Fail: return "fail";
    case SwapPolicy::Interactive: return "interactive";
    case SwapPolicy::AutoExtend: return "autoextend";
  }
  return "?";
}

std::uint64_t ManagerConfig::preemptive_budget_bytes() const {
  return static_cast<std::uint64_t>(std::floor(preemptive_fraction * static_cast<double>(ram_limit_bytes)));
}

void ManagerConfig::validate() const {
  if (ram_limit_bytes == 0) bad("ram_limit_bytes", "0", "must be positive");
  if (!(preemptive_fraction > 0.0 && preemptive_fraction <= 1.0))
    bad("preemptive_fraction", std::to_string(preemptive_fraction), "must lie in (0,1]");
  if (preemptive_budget_bytes() < 1)
    bad("preemptive_fraction", std::to_string(preemptive_fraction), "budget rounds to zero bytes");
  if (!(significance_level > 0.0 && significance_level < 1.0))
    bad("significance_level", std::to_string(significance_level), "must lie in (0,1)");
  if (swap_dir.empty()) bad("swap_dir", "", "must be set");
  if (swap_file_size_bytes < ram_limit_bytes)
    bad("swap_file_size_bytes", std::to_string(swap_file_size_bytes),
        "must hold the largest single block (ram_limit_bytes)");
  if (worker_count == 0) bad("worker_count", "0", "must be positive");
}

void apply_setting(ManagerConfig& config, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "ram_limit_bytes") {
    config.ram_limit_bytes = parse_bytes(value);
  } else if (key == "preemptive_fraction") {
    config.preemptive_fraction = parse_real(key, value);
  } else if (key == "significance_level") {
    config.significance_level = parse_real(key, value);
  } else if (key == "swap_dir") {
    config.swap_dir = std::filesystem::path(std::string(value));
  } else if (key == "swap_file_size_bytes") {
    config.swap_file_size_bytes = parse_bytes(value);
  } else if (key == "swap_policy") {
    config.swap_policy = parse_swap_policy(value);
  } else if (key == "overcommit") {
    config.overcommit = parse_bool(key, value);
  } else if (key == "worker_count") {
    auto n = parse_bytes(value);
    if (n > 1024) bad(key, value, "too many workers");
    config.worker_count = static_cast<unsigned>(n);
  } else {
    bad(key, value, "unknown key");
  }
}

ManagerConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ConfigError, "cannot open " + path.string());
  ManagerConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto eq = view.find('=');
    if (eq == std::string_view::npos)
      raise(ErrorCode::ConfigError, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    apply_setting(config, view.substr(0, eq), view.substr(eq + 1));
  }
  return config;
}

void apply_env_overrides(ManagerConfig& config, const EnvLookup& getenv_fn) {
  for (auto key : kKeys) {
    std::string name = "OOCMEM_";
    for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    const char* value = getenv_fn ? getenv_fn(name.c_str()) : std::getenv(name.c_str());
    if (value != nullptr) apply_setting(config, key, value);
  }
}

ManagerConfig load_config(const std::filesystem::path& path) {
  auto config = load_config_file(path);
  apply_env_overrides(config);
  config.validate();
  return config;
}

}  // namespace oocmem
