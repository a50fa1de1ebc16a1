#pragma once

#include <map>
#include <unordered_map>

#include "oocmem/strategy.hpp"

namespace oocmem {

/// Evicts in creation order, never prefetches, never decays. Touches change
/// nothing. Handy for tests that want predictable victims.
class DummyStrategy final : public Strategy {
 public:
  void register_handle(HandleId id, std::uint64_t bytes) override;
  void unregister_handle(HandleId id) override;
  void touch(HandleId id) override;
  std::vector<HandleId> make_room(std::uint64_t bytes, const Filter& evictable) override;
  std::vector<HandleId> plan_swap_in(HandleId id, const Filter& prefetchable) override;
  std::uint64_t evaluate_decay() const override { return 0; }
  std::vector<HandleId> decay(std::uint64_t, const Filter&) override { return {}; }
  void demote(HandleId id) override;
  void reinstate(HandleId id) override;

  void set_prefetch_enabled(bool) override {}
  bool prefetch_enabled() const override { return false; }

  Zone zone(HandleId id) const override;
  bool contains(HandleId id) const override { return entries_.count(id) != 0; }
  std::size_t size() const override { return entries_.size(); }

  std::uint64_t preemptive_used() const override { return 0; }
  std::uint64_t preemptive_budget() const override { return 0; }
  std::uint32_t hits_since_miss() const override { return 0; }
  std::uint64_t relinks() const override { return 0; }

 private:
  struct Entry {
    std::uint64_t bytes = 0;
    std::uint64_t seq = 0;
    Zone zone = Zone::Active;
  };
  Entry& at(HandleId id);

  std::unordered_map<HandleId, Entry> entries_;
  std::map<std::uint64_t, HandleId> order_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace oocmem
