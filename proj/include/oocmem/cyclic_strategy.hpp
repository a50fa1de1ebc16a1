#pragma once

#include <deque>
#include <optional>
#include <string>

#include "oocmem/strategy.hpp"

namespace oocmem {

/// One circular doubly linked list over every block.
///
/// Going `next` from the active cursor visits blocks from most to least
/// recently used: the resident run (active .. counteractive), then swapped
/// blocks (most recently evicted first), then prefetched blocks (oldest
/// prefetch first), and back to active. `prev` is therefore the order in
/// which a repeated scan touches blocks, so a scan only advances the cursor.
///
/// When no block is resident, active points at the first swapped block (or
/// the first prefetched one) and counteractive is empty.
class CyclicStrategy final : public Strategy {
 public:
  CyclicStrategy(std::uint64_t preemptive_budget, std::uint64_t ram_limit, double significance);

  void register_handle(HandleId id, std::uint64_t bytes) override;
  void unregister_handle(HandleId id) override;
  void touch(HandleId id) override;
  std::vector<HandleId> make_room(std::uint64_t bytes, const Filter& evictable) override;
  std::vector<HandleId> plan_swap_in(HandleId id, const Filter& prefetchable) override;
  std::uint64_t evaluate_decay() const override;
  std::vector<HandleId> decay(std::uint64_t bytes, const Filter& evictable) override;
  void demote(HandleId id) override;
  void reinstate(HandleId id) override;

  void set_prefetch_enabled(bool enabled) override { prefetch_ = enabled; }
  bool prefetch_enabled() const override { return prefetch_; }

  Zone zone(HandleId id) const override;
  bool contains(HandleId id) const override;
  std::size_t size() const override { return size_; }

  std::uint64_t preemptive_used() const override { return used_; }
  std::uint64_t preemptive_budget() const override { return budget_; }
  std::uint32_t hits_since_miss() const override { return hits_; }
  std::uint64_t relinks() const override { return relinks_; }

  std::optional<HandleId> active() const;
  std::optional<HandleId> counteractive() const;
  /// Walk from active along `next`.
  std::vector<HandleId> forward_order() const;
  /// Empty when the list, cursors, zones and byte counts are consistent;
  /// otherwise a description of the first problem found.
  std::string check_invariants() const;

 private:
  static constexpr std::uint32_t kNil = ~std::uint32_t{0};

  struct Node {
    std::uint32_t next = kNil;
    std::uint32_t prev = kNil;
    std::uint32_t generation = 0;
    Zone zone = Zone::Active;
    bool live = false;
    std::uint64_t bytes = 0;
  };

  std::uint32_t slot_of(HandleId id) const;
  HandleId id_of(std::uint32_t s) const { return HandleId::make(s, nodes_[s].generation); }
  bool accepts(const Filter& f, std::uint32_t s) const { return !f || f(id_of(s)); }

  void link(std::uint32_t a, std::uint32_t b);
  void unlink(std::uint32_t s);
  void insert_before(std::uint32_t s, std::uint32_t pos);
  /// Lays seq out between `before` and `after`; with before == kNil the
  /// sequence becomes the whole cycle.
  void lay_out(const std::vector<std::uint32_t>& seq, std::uint32_t before, std::uint32_t after);
  std::uint32_t preemptive_head() const;

  struct Pick {
    std::vector<std::uint32_t> segment;  // forward order
    std::vector<bool> victim;
    std::uint64_t bytes = 0;
  };
  Pick pick_preemptive(std::uint64_t bytes, const Filter& evictable) const;
  void drop_preemptive(const Pick& pick, std::vector<HandleId>& out);

  std::deque<Node> nodes_;
  std::uint32_t active_ = kNil;
  std::uint32_t counter_ = kNil;
  std::size_t size_ = 0;

  std::uint64_t budget_;
  std::uint64_t ram_limit_;
  double significance_;
  std::uint64_t used_ = 0;
  std::uint32_t hits_ = 0;
  std::uint64_t relinks_ = 0;
  bool prefetch_ = true;
};

}  // namespace oocmem
