#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "oocmem/types.hpp"

namespace oocmem {

enum class EventKind : std::uint8_t {
  Create,
  Destroy,
  Adhere,
  Pull,
  Release,
  Touch,
  Miss,
  PrefetchIssue,
  PreemptiveHit,
  Decay,
  Evict,
  StoreSubmit,
  LoadSubmit,
  TransferDone,
  Purge,
  PolicyFired,
  Blocked,
  Unblocked,
};

std::string_view to_string(EventKind kind);

/// Point-in-time copy of the byte accounting.
struct BudgetSnapshot {
  std::uint64_t main_memory_bytes = 0;
  std::uint64_t swap_memory_bytes = 0;
  std::uint64_t swapped_out_cumulative_bytes = 0;
  std::uint64_t swapped_in_cumulative_bytes = 0;
  std::uint64_t preemptive_used_bytes = 0;
  std::uint64_t pending_in_bytes = 0;
  std::uint64_t pending_out_bytes = 0;

  friend bool operator==(const BudgetSnapshot&, const BudgetSnapshot&) = default;
};

struct TraceEvent {
  /// Nanoseconds since the tracer was created.
  std::int64_t timestamp_ns = 0;
  EventKind kind = EventKind::Create;
  bool has_handle = false;
  bool has_bytes = false;
  bool has_snapshot = false;
  HandleId handle;
  std::uint64_t bytes = 0;
  std::array<char, 24> detail{};
  std::uint64_t thread = 0;
  /// For TransferDone: when the worker started, same clock; else 0.
  std::int64_t started_ns = 0;
  BudgetSnapshot snapshot;

  std::string_view detail_text() const;
};

/// Bounded append-only event buffer. record() is wait-free: a slot index is
/// claimed with one fetch_add and events past capacity are only counted.
class Tracer {
 public:
  explicit Tracer(std::size_t capacity);

  Tracer(const Tracer&) = delete;
  Tracer& operator=(const Tracer&) = delete;

  void set_enabled(bool enabled) { enabled_.store(enabled, std::memory_order_relaxed); }
  bool enabled() const { return enabled_.load(std::memory_order_relaxed); }

  void record(EventKind kind, std::optional<HandleId> handle = std::nullopt,
              std::optional<std::uint64_t> bytes = std::nullopt, std::string_view detail = {},
              const BudgetSnapshot* snapshot = nullptr, std::int64_t started_ns = 0);

  std::int64_t now_ns() const;
  /// Converts an absolute steady_clock value to tracer time.
  std::int64_t to_trace_time(std::int64_t steady_ns) const { return steady_ns - origin_ns_; }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const;
  std::uint64_t dropped() const { return dropped_.load(std::memory_order_relaxed); }

  /// Completed events in slot order. Slots still being written are skipped.
  std::vector<TraceEvent> events() const;

 private:
  struct Slot {
    TraceEvent event;
    std::atomic<bool> ready{false};
  };

  std::size_t capacity_;
  std::unique_ptr<Slot[]> slots_;
  std::atomic<std::size_t> next_{0};
  std::atomic<std::uint64_t> dropped_{0};
  std::atomic<bool> enabled_{true};
  std::int64_t origin_ns_;
};

inline constexpr std::string_view kTimelineHeader =
    "time_ms,main_memory_bytes,swap_memory_bytes,swapped_out_cum,swapped_in_cum,preemptive_bytes,pending_in,"
    "pending_out";

/// Samples the snapshots carried by `events` every sample_period_ms, from 0
/// up to the first sample at or after the last event. Each row holds the
/// latest snapshot at or before its time (zeros before the first). An empty
/// trace gives the header and one zero row.
void write_timeline(std::ostream& out, const std::vector<TraceEvent>& events, double sample_period_ms);
void export_timeline(const std::filesystem::path& path, const std::vector<TraceEvent>& events,
                     double sample_period_ms);

/// One JSON object per line.
void dump_events_jsonl(const std::filesystem::path& path, const std::vector<TraceEvent>& events);

}  // namespace oocmem
