#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "oocmem/types.hpp"

namespace oocmem {

enum class Zone : std::uint8_t { Active, Preemptive, Swapped };

std::string_view to_string(Zone zone);

/// Predicate over handles. An empty function accepts everything.
using Filter = std::function<bool(HandleId)>;

/// Decides which blocks leave RAM and which come back with a miss.
///
/// Strategies keep no locks of their own; the manager calls them inside its
/// single lock domain. Zones are bookkeeping only: a block moves to Swapped
/// when it is chosen as a victim, not when the write has finished.
class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual void register_handle(HandleId id, std::uint64_t bytes) = 0;
  virtual void unregister_handle(HandleId id) = 0;

  /// The block was accessed. Throws NotResident for a Swapped block.
  virtual void touch(HandleId id) = 0;

  /// Picks victims worth at least `bytes` among blocks the filter accepts.
  /// Throws InsufficientEvictableBytes (and changes nothing) when they do
  /// not add up.
  virtual std::vector<HandleId> make_room(std::uint64_t bytes, const Filter& evictable) = 0;

  /// Missed block first, then prefetch candidates. Throws NotSwapped.
  virtual std::vector<HandleId> plan_swap_in(HandleId id, const Filter& prefetchable) = 0;

  /// Bytes of speculative blocks to drop before the next plan, 0 for none.
  virtual std::uint64_t evaluate_decay() const = 0;
  /// Drops up to `bytes` of speculative blocks (as many as available).
  virtual std::vector<HandleId> decay(std::uint64_t bytes, const Filter& evictable) = 0;

  /// Puts a block back to Swapped, e.g. when its transfer could not start.
  virtual void demote(HandleId id) = 0;
  /// Undoes a victim selection. Reinstate several victims in reverse order
  /// to restore their previous order.
  virtual void reinstate(HandleId id) = 0;

  virtual void set_prefetch_enabled(bool enabled) = 0;
  virtual bool prefetch_enabled() const = 0;

  virtual Zone zone(HandleId id) const = 0;
  virtual bool contains(HandleId id) const = 0;
  virtual std::size_t size() const = 0;

  virtual std::uint64_t preemptive_used() const = 0;
  virtual std::uint64_t preemptive_budget() const = 0;
  virtual std::uint32_t hits_since_miss() const = 0;
  /// Touches that had to move a node.
  virtual std::uint64_t relinks() const = 0;
};

/// Decay rule: with P = budget / ram_limit and N hits since the last miss,
/// decay max(2 * (budget - used), 1) bytes once P^N drops strictly below the
/// significance level. A value within 1e-12 (relative) of the level counts
/// as equal, so 0.1^2 against 0.01 does not decay.
std::uint64_t decay_bytes(std::uint64_t budget, std::uint64_t ram_limit, std::uint32_t hits,
                          double significance, std::uint64_t used);

}  // namespace oocmem
