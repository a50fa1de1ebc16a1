#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "oocmem/config.hpp"
#include "oocmem/error.hpp"
#include "oocmem/ledger.hpp"
#include "oocmem/strategy.hpp"
#include "oocmem/swap_store.hpp"
#include "oocmem/trace.hpp"
#include "oocmem/transfer_engine.hpp"
#include "oocmem/types.hpp"

namespace oocmem {

class Manager;

/// Resident payload of a pulled guard. Stays valid until the guard is
/// released.
class View {
 public:
  View() = default;
  View(std::byte* data, std::uint64_t size, bool writable) : data_(data), size_(size), writable_(writable) {}

  const std::byte* data() const { return data_; }
  /// Throws ReadOnlyView for views obtained through a read-only guard.
  std::byte* mutable_data() const;
  std::uint64_t size() const { return size_; }
  bool writable() const { return writable_; }

  template <typename T>
  std::span<const T> as() const {
    return {reinterpret_cast<const T*>(data_), static_cast<std::size_t>(size_ / sizeof(T))};
  }
  template <typename T>
  std::span<T> as_mutable() const {
    return {reinterpret_cast<T*>(mutable_data()), static_cast<std::size_t>(size_ / sizeof(T))};
  }

  friend bool operator==(const View& a, const View& b) {
    return a.data_ == b.data_ && a.size_ == b.size_ && a.writable_ == b.writable_;
  }

 private:
  std::byte* data_ = nullptr;
  std::uint64_t size_ = 0;
  bool writable_ = false;
};

/// Scoped adherence to one block. Move-only; releases on destruction.
class Guard {
 public:
  Guard() = default;
  ~Guard();
  Guard(Guard&& other) noexcept;
  Guard& operator=(Guard&& other) noexcept;
  Guard(const Guard&) = delete;
  Guard& operator=(const Guard&) = delete;

  /// Blocks until the payload is resident. Repeated calls return the same
  /// view.
  View pull();
  void release();

  bool active() const { return manager_ != nullptr; }
  bool pulled() const { return pulled_; }
  HandleId handle() const { return id_; }
  AccessMode mode() const { return mode_; }
  Loading loading() const { return loading_; }

 private:
  friend class Manager;
  Guard(Manager* m, HandleId id, AccessMode mode, Loading loading)
      : manager_(m), id_(id), mode_(mode), loading_(loading) {}

  Manager* manager_ = nullptr;
  HandleId id_;
  AccessMode mode_ = AccessMode::ReadOnly;
  Loading loading_ = Loading::Immediate;
  bool pulled_ = false;
  View view_;
};

struct ManagerStats {
  std::uint64_t misses = 0;
  std::uint64_t preemptive_hits = 0;
  std::uint64_t prefetches_issued = 0;
  std::uint64_t prefetches_abandoned = 0;
  std::uint64_t decayed = 0;
  /// Pulls that had to wait, for IO or for other guards to release.
  std::uint64_t blocked_pulls = 0;
  std::uint64_t evictions = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t purged_bytes = 0;
  std::uint64_t peak_resident_bytes = 0;
  std::uint64_t budget_violations = 0;
};

struct ManagerOptions {
  /// Defaults to the cyclic strategy.
  std::unique_ptr<Strategy> strategy;
  /// 0 disables tracing.
  std::size_t trace_capacity = 0;
  std::chrono::microseconds io_latency{0};
};

/// Owns the managed blocks and keeps their resident bytes within the RAM
/// limit by moving unpinned blocks to swap files.
///
/// A block is pinned while it has a guard created with Loading::Immediate
/// or a pulled guard. Pinned blocks are never evicted. All state lives
/// behind one mutex; transfer workers re-enter it to deliver completions.
class Manager {
 public:
  explicit Manager(ManagerConfig config, ManagerOptions options = {});
  ~Manager();

  Manager(const Manager&) = delete;
  Manager& operator=(const Manager&) = delete;

  /// New resident, dirty block of element_count * element_size bytes. The
  /// fill pattern, if given, must be element_size bytes and is repeated;
  /// otherwise the payload is zeroed. Children are destroyed with their
  /// parent, youngest first. May wait for running swap-outs to free RAM.
  HandleId create(std::uint64_t element_count, std::uint64_t element_size, std::span<const std::byte> fill = {},
                  std::optional<HandleId> parent = std::nullopt);

  template <typename T>
  HandleId create_filled(std::uint64_t count, const T& value, std::optional<HandleId> parent = std::nullopt) {
    return create(count, sizeof(T), std::as_bytes(std::span<const T, 1>(&value, 1)), parent);
  }

  /// dims {a, b, c}: an outer block of `a` HandleIds, each the outer block
  /// of a {b, c} array; the last dimension holds the elements.
  HandleId create_multi(std::span<const std::uint64_t> dims, std::uint64_t element_size,
                        std::span<const std::byte> fill = {}, std::optional<HandleId> parent = std::nullopt);

  void destroy(HandleId id);

  /// Never waits for IO. Immediate loading starts the swap-in right away.
  Guard adhere(HandleId id, AccessMode mode, Loading loading = Loading::Immediate);

  /// Pulls all guards while holding a process-wide group scope, so groups
  /// from different threads cannot deadlock against each other.
  std::vector<View> pull_group(std::span<Guard* const> guards);
  std::vector<View> pull_group(std::initializer_list<Guard*> guards) {
    return pull_group(std::span<Guard* const>(guards.begin(), guards.size()));
  }

  void set_overcommit(bool enabled);
  bool overcommit() const;
  void set_preemptive(bool enabled);
  bool preemptive() const;
  void set_swap_prompt(ExtendPrompt prompt);

  /// Moves an unpinned resident block out now. Returns false when it is
  /// pinned or not resident.
  bool evict(HandleId id);
  /// Waits until no transfer is queued or running.
  void wait_idle();

  /// Holds transfers that have not started yet. For deterministic tests.
  void pause_transfers();
  void resume_transfers();

  BlockState state(HandleId id) const;
  bool dirty(HandleId id) const;
  bool has_disk_copy(HandleId id) const;
  std::uint32_t adherence(HandleId id) const;
  std::uint64_t size_of(HandleId id) const;
  std::uint64_t element_count(HandleId id) const;
  std::optional<HandleId> parent(HandleId id) const;
  std::vector<HandleId> children(HandleId id) const;
  bool contains(HandleId id) const;
  std::size_t block_count() const;
  std::uint64_t pinned_bytes() const;

  BudgetSnapshot snapshot() const;
  BudgetLedger ledger() const;
  ManagerStats stats() const;
  const ManagerConfig& config() const { return config_; }

  Tracer* tracer() { return tracer_.get(); }
  /// Only call while no other thread uses the manager.
  const Strategy& strategy() const { return *strategy_; }
  const SwapStore& swap() const { return *store_; }

 private:
  friend class Guard;

  static constexpr std::uint32_t kNone = ~std::uint32_t{0};

  struct Block {
    std::byte* data = nullptr;
    std::uint64_t bytes = 0;
    std::uint32_t element_size = 0;
    std::uint32_t generation = 0;
    std::uint32_t parent = kNone;
    std::uint32_t adherence = 0;
    std::uint32_t pins = 0;
    BlockState state = BlockState::Resident;
    std::uint8_t live : 1 = 0;
    std::uint8_t dying : 1 = 0;
    std::uint8_t queued : 1 = 0;   // planned for swap-in, not submitted yet
    std::uint8_t wanted : 1 = 0;   // reload once the running swap-out ends
  };

  struct Failure {
    ErrorCode code;
    std::string message;
  };

  enum class Start { Started, Waiting, Evicting, Failed };

  class DomainLock;

  View pull(Guard& guard);
  void release(Guard& guard) noexcept;

  Block& block_locked(HandleId id);
  const Block& block_locked(HandleId id) const;
  HandleId id_of(std::uint32_t slot) const { return HandleId::make(slot, blocks_[slot].generation); }
  bool is_current(HandleId id) const;

  void pin_locked(Block& b);
  void unpin_locked(Block& b);

  void settle_locked();
  bool drain_locked();
  bool pump_locked();
  Start start_swap_in_locked(HandleId id, bool demand);
  void miss_locked(std::uint32_t slot);
  void evict_locked(const std::vector<HandleId>& victims);
  void fail_locked(std::uint32_t slot, ErrorCode code, std::string message);
  void destroy_one(std::unique_lock<std::mutex>& lock, HandleId id);
  void on_transfer_complete();

  BudgetSnapshot snapshot_locked() const;
  void trace(EventKind kind, std::optional<HandleId> id = std::nullopt,
             std::optional<std::uint64_t> bytes = std::nullopt, std::string_view detail = {},
             bool with_snapshot = false, std::int64_t started_ns = 0);

  ManagerConfig config_;
  std::unique_ptr<Tracer> tracer_;
  std::unique_ptr<TransferEngine> engine_;
  std::unique_ptr<SwapStore> store_;
  std::unique_ptr<Strategy> strategy_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Block> blocks_;
  std::vector<std::uint32_t> free_slots_;
  std::unordered_map<std::uint32_t, std::vector<HandleId>> children_;
  std::unordered_map<std::uint32_t, Failure> failures_;
  std::deque<HandleId> demand_;
  std::deque<HandleId> prefetch_;
  std::uint64_t pinned_bytes_ = 0;
  std::size_t live_count_ = 0;
  bool overcommit_ = false;
  ManagerStats stats_;
};

}  // namespace oocmem
