#pragma once

#include <cstdint>

namespace oocmem {

/// Byte accounting for RAM and swap. Transfers in flight are double-booked:
/// a swap-in holds its size in ram_pending_in until it lands, and a swap-out
/// keeps its size in ram_used (and freeing_soon) until the write completes.
///
/// Not synchronized; the transfer engine guards it.
class BudgetLedger {
 public:
  explicit BudgetLedger(std::uint64_t ram_limit) : ram_limit_(ram_limit) {}

  std::uint64_t ram_limit() const { return ram_limit_; }
  std::uint64_t ram_used() const { return ram_used_; }
  std::uint64_t ram_pending_in() const { return ram_pending_in_; }
  std::uint64_t swap_used() const { return swap_used_; }
  std::uint64_t swap_pending_out() const { return swap_pending_out_; }
  std::uint64_t freeing_soon() const { return freeing_soon_; }
  std::uint64_t peak_committed() const { return peak_committed_; }
  std::uint64_t violations() const { return violations_; }

  /// ram_limit - ram_used - ram_pending_in
  std::uint64_t headroom() const;

  bool try_reserve_resident(std::uint64_t bytes);
  void release_resident(std::uint64_t bytes);

  bool try_begin_swap_in(std::uint64_t bytes);
  void complete_swap_in(std::uint64_t bytes);
  void abort_swap_in(std::uint64_t bytes);

  void begin_swap_out(std::uint64_t bytes);
  void complete_swap_out(std::uint64_t bytes);
  void abort_swap_out(std::uint64_t bytes);

  void add_swap_used(std::uint64_t bytes);
  void sub_swap_used(std::uint64_t bytes);

 private:
  void observe();
  static void sub(std::uint64_t& field, std::uint64_t bytes);

  std::uint64_t ram_limit_;
  std::uint64_t ram_used_ = 0;
  std::uint64_t ram_pending_in_ = 0;
  std::uint64_t swap_used_ = 0;
  std::uint64_t swap_pending_out_ = 0;
  std::uint64_t freeing_soon_ = 0;
  std::uint64_t peak_committed_ = 0;
  std::uint64_t violations_ = 0;
};

}  // namespace oocmem
