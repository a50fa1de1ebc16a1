#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "oocmem/swap_store.hpp"
#include "oocmem/types.hpp"

namespace oocmem::bench {

inline constexpr std::string_view kScenarios[] = {"sequential_scan",  "random_access", "nbody_accumulate",
                                                  "matrix_transpose", "const_vs_mut",  "preemptive_onoff"};

struct ScenarioParams {
  std::string scenario;
  std::uint64_t ram_limit = 64ull << 20;
  std::uint64_t data_bytes = 256ull << 20;
  std::uint64_t element_bytes = 1ull << 20;
  /// Percent of each element rewritten per access.
  double load_percent = 10.0;
  /// Extra busy compute per element access.
  std::chrono::microseconds work{0};
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  unsigned passes = 2;
  bool preemptive = true;
  SwapPolicy policy = SwapPolicy::AutoExtend;
  std::filesystem::path swap_dir;
  /// 0 picks data_bytes + ram_limit.
  std::uint64_t swap_file_bytes = 0;
  unsigned workers = 2;
  std::chrono::microseconds io_latency{0};
  std::optional<std::filesystem::path> timeline;
  double timeline_period_ms = 10.0;
  std::optional<std::filesystem::path> raw_dump;
  ExtendPrompt prompt;
};

struct Phase {
  std::string name;
  double wall_time_ms = 0;
  std::uint64_t miss_count = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_read = 0;
};

struct Report {
  std::string scenario;
  std::string variant;
  double wall_time_ms = 0;
  std::uint64_t miss_count = 0;
  std::uint64_t prefetch_hit_count = 0;
  std::uint64_t blocked_wait_count = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t peak_resident_bytes = 0;
  std::uint64_t ram_limit_bytes = 0;
  std::uint64_t budget_violations = 0;
  std::uint64_t checksum_failures = 0;
  std::vector<Phase> phases;
  /// Scenario-specific numbers, e.g. overhead against a baseline.
  std::map<std::string, double> extra;
};

enum class Format { Text, Csv, Json };

Format parse_format(std::string_view text);
/// Throws ConfigError for unknown names or non-positive sizes.
void validate(const ScenarioParams& params);

/// Runs the scenario through the public manager interface. Paired
/// scenarios return one report per variant.
std::vector<Report> run_scenario(const ScenarioParams& params);

inline constexpr std::string_view kCsvHeader =
    "scenario,variant,wall_time_ms,miss_count,prefetch_hit_count,blocked_wait_count,bytes_written,bytes_read,"
    "peak_resident_bytes,ram_limit_bytes,budget_violations,checksum_failures";

void emit_report(std::ostream& out, const std::vector<Report>& reports, Format format);

/// Spins the CPU for the given time.
void spin_for(std::chrono::microseconds duration);

}  // namespace oocmem::bench
