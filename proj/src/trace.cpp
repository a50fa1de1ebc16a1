#include "oocmem/trace.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <thread>

#include <json.hpp>

#include "oocmem/error.hpp"

namespace oocmem {
namespace {

std::int64_t steady_now() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::uint64_t this_thread_tag() {
  thread_local const std::uint64_t tag = std::hash<std::thread::id>{}(std::this_thread::get_id());
  return tag;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Create: return "CREATE";
    case EventKind::Destroy: return "DESTROY";
    case EventKind::Adhere: return "ADHERE";
    case EventKind::Pull: return "PULL";
    case EventKind::Release: return "RELEASE";
    case EventKind::Touch: return "TOUCH";
    case EventKind::Miss: return "MISS";
    case EventKind::PrefetchIssue: return "PREFETCH_ISSUE";
    case EventKind::PreemptiveHit: return "PREEMPTIVE_HIT";
    case EventKind::Decay: return "DECAY";
    case EventKind::Evict: return "EVICT";
    case EventKind::StoreSubmit: return "STORE_SUBMIT";
    case EventKind::LoadSubmit: return "LOAD_SUBMIT";
    case EventKind::TransferDone: return "TRANSFER_DONE";
    case EventKind::Purge: return "PURGE";
    case EventKind::PolicyFired: return "POLICY_FIRED";
    case EventKind::Blocked: return "BLOCKED";
    case EventKind::Unblocked: return "UNBLOCKED";
  }
  return "?";
}

std::string_view TraceEvent::detail_text() const {
  return std::string_view(detail.data(), strnlen(detail.data(), detail.size()));
}

Tracer::Tracer(std::size_t capacity)
    : capacity_(capacity), slots_(std::make_unique<Slot[]>(capacity)), origin_ns_(steady_now()) {}

std::int64_t Tracer::now_ns() const { return steady_now() - origin_ns_; }

void Tracer::record(EventKind kind, std::optional<HandleId> handle, std::optional<std::uint64_t> bytes,
                    std::string_view detail, const BudgetSnapshot* snapshot, std::int64_t started_ns) {
  if (!enabled()) return;
  auto index = next_.fetch_add(1, std::memory_order_relaxed);
  if (index >= capacity_) {
    dropped_.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  auto& slot = slots_[index];
  auto& e = slot.event;
  e.timestamp_ns = now_ns();
  e.kind = kind;
  e.has_handle = handle.has_value();
  e.handle = handle.value_or(HandleId{});
  e.has_bytes = bytes.has_value();
  e.bytes = bytes.value_or(0);
  auto n = std::min(detail.size(), e.detail.size() - 1);
  std::memcpy(e.detail.data(), detail.data(), n);
  e.detail[n] = '\0';
  e.thread = this_thread_tag();
  e.started_ns = started_ns;
  e.has_snapshot = snapshot != nullptr;
  e.snapshot = snapshot ? *snapshot : BudgetSnapshot{};
  slot.ready.store(true, std::memory_order_release);
}

std::size_t Tracer::size() const { return std::min(next_.load(std::memory_order_relaxed), capacity_); }

std::vector<TraceEvent> Tracer::events() const {
  std::vector<TraceEvent> out;
  auto n = size();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (slots_[i].ready.load(std::memory_order_acquire)) out.push_back(slots_[i].event);
  return out;
}

void write_timeline(std::ostream& out, const std::vector<TraceEvent>& events, double sample_period_ms) {
  if (!(sample_period_ms > 0.0)) raise(ErrorCode::InvalidArgument, "sample period must be positive");

  std::vector<const TraceEvent*> snaps;
  std::int64_t last_ns = 0;
  for (const auto& e : events) {
    last_ns = std::max(last_ns, e.timestamp_ns);
    if (e.has_snapshot) snaps.push_back(&e);
  }
  // Events from several threads may interleave slightly out of order.
  std::stable_sort(snaps.begin(), snaps.end(),
                   [](const TraceEvent* a, const TraceEvent* b) { return a->timestamp_ns < b->timestamp_ns; });

  const double period_ns = sample_period_ms * 1e6;
  auto rows = static_cast<std::uint64_t>(std::ceil(static_cast<double>(last_ns) / period_ns)) + 1;

  out << kTimelineHeader << '\n';
  std::size_t next = 0;
  BudgetSnapshot cur;
  for (std::uint64_t k = 0; k < rows; ++k) {
    double t_ns = static_cast<double>(k) * period_ns;
    while (next < snaps.size() && static_cast<double>(snaps[next]->timestamp_ns) <= t_ns) cur = snaps[next++]->snapshot;
    out << static_cast<double>(k) * sample_period_ms << ',' << cur.main_memory_bytes << ',' << cur.swap_memory_bytes
        << ',' << cur.swapped_out_cumulative_bytes << ',' << cur.swapped_in_cumulative_bytes << ','
        << cur.preemptive_used_bytes << ',' << cur.pending_in_bytes << ',' << cur.pending_out_bytes << '\n';
  }
}

void export_timeline(const std::filesystem::path& path, const std::vector<TraceEvent>& events,
                     double sample_period_ms) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  write_timeline(out, events, sample_period_ms);
  out.flush();
  if (!out) raise(ErrorCode::IoFailure, "write to " + path.string() + " failed");
}

void dump_events_jsonl(const std::filesystem::path& path, const std::vector<TraceEvent>& events) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  for (const auto& e : events) {
    nlohmann::json j;
    j["t_ns"] = e.timestamp_ns;
    j["kind"] = to_string(e.kind);
    j["thread"] = e.thread;
    if (e.has_handle) j["handle"] = to_string(e.handle);
    if (e.has_bytes) j["bytes"] = e.bytes;
    if (!e.detail_text().empty()) j["detail"] = e.detail_text();
    if (e.started_ns != 0) j["started_ns"] = e.started_ns;
    if (e.has_snapshot) {
      const auto& s = e.snapshot;
      j["snapshot"] = {{"main_memory_bytes", s.main_memory_bytes},
                       {"swap_memory_bytes", s.swap_memory_bytes},
                       {"swapped_out_cum", s.swapped_out_cumulative_bytes},
                       {"swapped_in_cum", s.swapped_in_cumulative_bytes},
                       {"preemptive_bytes", s.preemptive_used_bytes},
                       {"pending_in", s.pending_in_bytes},
                       {"pending_out", s.pending_out_bytes}};
    }
    out << j.dump() << '\n';
  }
  if (!out) raise(ErrorCode::IoFailure, "write to " + path.string() + " failed");
}

}  // namespace oocmem
