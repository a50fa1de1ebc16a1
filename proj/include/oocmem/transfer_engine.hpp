#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "oocmem/ledger.hpp"
#include "oocmem/types.hpp"

namespace oocmem {

using TransferToken = std::uint64_t;

enum class Direction : std::uint8_t { SwapIn, SwapOut };
enum class TransferState : std::uint8_t { Queued, Running, Done, Failed };

/// Positional file IO used by the workers. Implementations must tolerate
/// concurrent calls on disjoint spans.
class IoBackend {
 public:
  virtual ~IoBackend() = default;
  virtual void read(const ChunkSpan& span, std::byte* dest) = 0;
  virtual void write(const ChunkSpan& span, const std::byte* src) = 0;
};

struct TransferRequest {
  Direction direction = Direction::SwapIn;
  HandleId handle;
  /// Spans are processed in order; the buffer is their concatenation.
  /// An empty list on a SwapOut means the on-disk copy is reused.
  std::vector<ChunkSpan> spans;
  std::uint64_t byte_len = 0;
  std::byte* buffer = nullptr;
  IoBackend* io = nullptr;
};

struct TransferOutcome {
  TransferToken token = 0;
  Direction direction = Direction::SwapIn;
  HandleId handle;
  std::uint64_t byte_len = 0;
  std::uint64_t bytes_transferred = 0;
  TransferState state = TransferState::Done;
  bool cancelled = false;
  std::string error;
  /// steady_clock nanoseconds; both zero for transfers that never ran.
  std::int64_t started_ns = 0;
  std::int64_t finished_ns = 0;

  bool ok() const { return state == TransferState::Done; }
};

/// Pool of transfer workers executing swap reads and writes with
/// synchronous positional IO, plus the double-booked budget ledger.
///
/// RAM for a swap-in is reserved at submit time. Ledger completion effects
/// are applied when an outcome is delivered by poll_completions(), exactly
/// once per token. Workers invoke the completion hook (if set) after each
/// finished transfer, without holding any engine lock.
class TransferEngine {
 public:
  TransferEngine(std::uint64_t ram_limit, unsigned worker_count);
  ~TransferEngine();

  TransferEngine(const TransferEngine&) = delete;
  TransferEngine& operator=(const TransferEngine&) = delete;

  /// Queues the request and returns immediately. A SwapIn that does not fit
  /// the headroom throws RamReservationFailed without side effects.
  TransferToken submit(TransferRequest request);

  std::vector<TransferOutcome> poll_completions();

  /// Blocks until the token finished. Throws TransferFailed for a failed or
  /// cancelled transfer.
  void wait_for(TransferToken token);

  /// Blocks until swap-outs completing after this call have released at
  /// least `bytes` of RAM. Throws WaitImpossible when the in-flight set
  /// cannot release that much.
  void wait_for_freed(std::uint64_t bytes);

  TransferState state(TransferToken token) const;

  /// drain=true finishes everything queued; drain=false cancels queued
  /// (never running) requests. Idempotent.
  void shutdown(bool drain);

  /// While paused, workers finish what they are running but pick up nothing
  /// new. Used to hold transfers in flight deterministically.
  void pause();
  void resume();

  void set_completion_hook(std::function<void()> hook);
  /// Returns true when the calling thread holds the caller's lock domain;
  /// waits assert it is false.
  void set_domain_probe(std::function<bool()> probe);

  BudgetLedger ledger() const;
  bool try_reserve_resident(std::uint64_t bytes);
  void release_resident(std::uint64_t bytes);
  void add_swap_used(std::uint64_t bytes);
  void sub_swap_used(std::uint64_t bytes);

  std::size_t queued_count() const;
  std::size_t in_flight_count() const;

 private:
  struct Entry {
    TransferRequest request;
    TransferState state = TransferState::Queued;
  };

  void worker_loop();
  void finish_locked(TransferToken token, Entry& entry, TransferOutcome outcome);
  void apply_ledger_locked(const TransferOutcome& outcome);
  void assert_outside_domain() const;

  mutable std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  BudgetLedger ledger_;
  std::deque<TransferToken> queue_;
  std::unordered_map<TransferToken, Entry> live_;
  std::vector<TransferOutcome> completed_;
  std::unordered_map<TransferToken, std::string> failures_;
  TransferToken next_token_ = 1;
  std::uint64_t freed_total_ = 0;
  std::size_t running_ = 0;
  bool paused_ = false;
  bool stopping_ = false;
  bool drain_ = true;
  bool shut_down_ = false;
  std::function<void()> hook_;
  std::function<bool()> domain_probe_;
  std::vector<std::thread> workers_;
};

}  // namespace oocmem
