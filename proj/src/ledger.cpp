#include "oocmem/ledger.hpp"

#include <algorithm>
#include <cassert>

namespace oocmem {

std::uint64_t BudgetLedger::headroom() const {
  auto committed = ram_used_ + ram_pending_in_;
  return committed >= ram_limit_ ? 0 : ram_limit_ - committed;
}

bool BudgetLedger::try_reserve_resident(std::uint64_t bytes) {
  if (bytes > headroom()) return false;
  ram_used_ += bytes;
  observe();
  return true;
}

void BudgetLedger::release_resident(std::uint64_t bytes) { sub(ram_used_, bytes); }

bool BudgetLedger::try_begin_swap_in(std::uint64_t bytes) {
  if (bytes > headroom()) return false;
  ram_pending_in_ += bytes;
  observe();
  return true;
}

void BudgetLedger::complete_swap_in(std::uint64_t bytes) {
  sub(ram_pending_in_, bytes);
  ram_used_ += bytes;
  observe();
}

void BudgetLedger::abort_swap_in(std::uint64_t bytes) { sub(ram_pending_in_, bytes); }

void BudgetLedger::begin_swap_out(std::uint64_t bytes) {
  swap_pending_out_ += bytes;
  freeing_soon_ += bytes;
}

void BudgetLedger::complete_swap_out(std::uint64_t bytes) {
  sub(freeing_soon_, bytes);
  sub(swap_pending_out_, bytes);
  sub(ram_used_, bytes);
}

void BudgetLedger::abort_swap_out(std::uint64_t bytes) {
  sub(freeing_soon_, bytes);
  sub(swap_pending_out_, bytes);
}

void BudgetLedger::add_swap_used(std::uint64_t bytes) { swap_used_ += bytes; }
void BudgetLedger::sub_swap_used(std::uint64_t bytes) { sub(swap_used_, bytes); }

void BudgetLedger::observe() {
  auto committed = ram_used_ + ram_pending_in_;
  peak_committed_ = std::max(peak_committed_, committed);
  if (committed > ram_limit_) ++violations_;
}

void BudgetLedger::sub(std::uint64_t& field, std::uint64_t bytes) {
  assert(field >= bytes && "ledger underflow");
  field -= std::min(field, bytes);
}

}  // namespace oocmem
