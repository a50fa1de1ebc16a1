#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include "oocmem/types.hpp"

namespace oocmem {

struct ManagerConfig {
  std::uint64_t ram_limit_bytes = 64ull << 20;
  double preemptive_fraction = 0.10;
  double significance_level = 0.01;
  std::filesystem::path swap_dir = std::filesystem::temp_directory_path();
  std::uint64_t swap_file_size_bytes = 256ull << 20;
  SwapPolicy swap_policy = SwapPolicy::AutoExtend;
  bool overcommit = false;
  unsigned worker_count = 2;

  /// floor(preemptive_fraction * ram_limit_bytes)
  std::uint64_t preemptive_budget_bytes() const;

  /// Throws ConfigError naming the first offending key.
  void validate() const;
};

/// Parses "123", "64K", "64KiB", "16M", "2G" (binary multiples). Throws
/// ConfigError on anything else, including overflow.
std::uint64_t parse_bytes(std::string_view text);

SwapPolicy parse_swap_policy(std::string_view text);
std::string_view to_string(SwapPolicy policy);

/// Applies one `key=value` pair. Unknown keys are a ConfigError.
void apply_setting(ManagerConfig& config, std::string_view key, std::string_view value);

/// Reads a key=value file. Blank lines and lines starting with '#' are
/// skipped. Returns the config with defaults for absent keys, not yet
/// validated.
ManagerConfig load_config_file(const std::filesystem::path& path);

/// Overrides keys from OOCMEM_<KEY> environment variables. The lookup is
/// injectable so tests don't have to mutate the process environment.
using EnvLookup = std::function<const char*(const char*)>;
void apply_env_overrides(ManagerConfig& config, const EnvLookup& getenv_fn = nullptr);

/// load_config_file + apply_env_overrides + validate.
ManagerConfig load_config(const std::filesystem::path& path);

}  // namespace oocmem
