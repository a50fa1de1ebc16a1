#include <doctest.h>

#include "oocmem/ledger.hpp"

using oocmem::BudgetLedger;

TEST_CASE("swap-in is double-booked until it lands") {
  BudgetLedger l(1000);
  CHECK(l.try_begin_swap_in(100));
  CHECK(l.ram_pending_in() == 100);
  CHECK(l.headroom() == 900);
  l.complete_swap_in(100);
  CHECK(l.ram_pending_in() == 0);
  CHECK(l.ram_used() == 100);
}

TEST_CASE("reservation beyond the headroom is refused untouched") {
  BudgetLedger l(150);
  CHECK(l.try_reserve_resident(100));
  CHECK_FALSE(l.try_begin_swap_in(100));
  CHECK(l.ram_pending_in() == 0);
  CHECK_FALSE(l.try_reserve_resident(51));
  CHECK(l.try_reserve_resident(50));
  CHECK(l.headroom() == 0);
}

TEST_CASE("swap-out holds its RAM until the write completes") {
  BudgetLedger l(1000);
  REQUIRE(l.try_reserve_resident(300));
  l.begin_swap_out(300);
  CHECK(l.ram_used() == 300);
  CHECK(l.freeing_soon() == 300);
  CHECK(l.swap_pending_out() == 300);
  l.complete_swap_out(300);
  CHECK(l.ram_used() == 0);
  CHECK(l.freeing_soon() == 0);
  CHECK(l.swap_pending_out() == 0);
}

TEST_CASE("aborts roll back") {
  BudgetLedger l(1000);
  REQUIRE(l.try_begin_swap_in(200));
  l.abort_swap_in(200);
  CHECK(l.ram_pending_in() == 0);
  CHECK(l.ram_used() == 0);
  REQUIRE(l.try_reserve_resident(100));
  l.begin_swap_out(100);
  l.abort_swap_out(100);
  CHECK(l.ram_used() == 100);
  CHECK(l.freeing_soon() == 0);
}

TEST_CASE("swap usage and peak") {
  BudgetLedger l(1000);
  l.add_swap_used(64);
  l.sub_swap_used(14);
  CHECK(l.swap_used() == 50);
  REQUIRE(l.try_reserve_resident(400));
  REQUIRE(l.try_begin_swap_in(500));
  l.release_resident(400);
  CHECK(l.peak_committed() == 900);
  CHECK(l.violations() == 0);
}
