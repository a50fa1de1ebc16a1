#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "oocmem/error.hpp"
#include "oocmem/trace.hpp"
#include "temp_dir.hpp"

using namespace oocmem;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TraceEvent at_ms(double ms, std::uint64_t main_bytes, std::uint64_t out_cum = 0) {
  TraceEvent e;
  e.timestamp_ns = static_cast<std::int64_t>(ms * 1e6);
  e.kind = EventKind::TransferDone;
  e.has_snapshot = true;
  e.snapshot.main_memory_bytes = main_bytes;
  e.snapshot.swapped_out_cumulative_bytes = out_cum;
  return e;
}

}  // namespace

TEST_CASE("event kinds print in upper case") {
  CHECK(to_string(EventKind::PrefetchIssue) == "PREFETCH_ISSUE");
  CHECK(to_string(EventKind::Unblocked) == "UNBLOCKED");
}

TEST_CASE("disabled tracer records nothing") {
  Tracer t(16);
  t.set_enabled(false);
  t.record(EventKind::Create, HandleId::make(1, 0), 10);
  CHECK(t.size() == 0);
  CHECK(t.dropped() == 0);
}

TEST_CASE("fields survive recording") {
  Tracer t(16);
  BudgetSnapshot s;
  s.main_memory_bytes = 7;
  t.record(EventKind::Evict, HandleId::make(3, 1), 100, "reuse", &s);
  t.record(EventKind::Miss);
  auto ev = t.events();
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].kind == EventKind::Evict);
  CHECK(ev[0].has_handle);
  CHECK(ev[0].handle == HandleId::make(3, 1));
  CHECK(ev[0].bytes == 100);
  CHECK(ev[0].detail_text() == "reuse");
  CHECK(ev[0].has_snapshot);
  CHECK(ev[0].snapshot == s);
  CHECK_FALSE(ev[1].has_handle);
  CHECK_FALSE(ev[1].has_bytes);
  CHECK(ev[1].timestamp_ns >= ev[0].timestamp_ns);
}

TEST_CASE("long details are cut, not overrun") {
  Tracer t(4);
  t.record(EventKind::PolicyFired, std::nullopt, std::nullopt, std::string(100, 'x'));
  auto d = t.events().at(0).detail_text();
  CHECK(d.size() < 24);
  CHECK(d == std::string(d.size(), 'x'));
}

TEST_CASE("overflow counts dropped events") {
  Tracer t(100000);
  for (int k = 0; k < 1000000; ++k) t.record(EventKind::Touch);
  CHECK(t.size() == 100000);
  CHECK(t.dropped() == 900000);
}

TEST_CASE("timestamps never go backwards within a thread") {
  Tracer t(40000);
  std::vector<std::thread> pool;
  for (int k = 0; k < 4; ++k)
    pool.emplace_back([&] {
      for (int i = 0; i < 10000; ++i) t.record(EventKind::Touch);
    });
  for (auto& th : pool) th.join();
  auto ev = t.events();
  CHECK(ev.size() == 40000);
  std::map<std::uint64_t, std::int64_t> last;
  std::size_t bad = 0;
  for (const auto& e : ev) {
    auto [it, fresh] = last.emplace(e.thread, e.timestamp_ns);
    if (!fresh) {
      if (e.timestamp_ns < it->second) ++bad;
      it->second = e.timestamp_ns;
    }
  }
  CHECK(last.size() == 4);
  CHECK(bad == 0);
}

TEST_CASE("empty trace gives header and one zero row") {
  std::ostringstream out;
  write_timeline(out, {}, 10);
  auto l = lines(out.str());
  REQUIRE(l.size() == 2);
  CHECK(l[0] == kTimelineHeader);
  CHECK(l[1] == "0,0,0,0,0,0,0,0");
}

TEST_CASE("rows carry the latest snapshot at their time") {
  std::vector<TraceEvent> ev{at_ms(2, 100, 0), at_ms(12, 300, 50), at_ms(13, 200, 80), at_ms(31, 50, 90)};
  std::ostringstream out;
  write_timeline(out, ev, 10);
  auto l = lines(out.str());
  REQUIRE(l.size() == 6);
  CHECK(l[1] == "0,0,0,0,0,0,0,0");
  CHECK(l[2] == "10,100,0,0,0,0,0,0");
  CHECK(l[3] == "20,200,0,80,0,0,0,0");
  CHECK(l[4] == "30,200,0,80,0,0,0,0");
  CHECK(l[5] == "40,50,0,90,0,0,0,0");
  std::ostringstream again;
  write_timeline(again, ev, 10);
  CHECK(again.str() == out.str());
}

TEST_CASE("events without snapshots do not move the timeline") {
  TraceEvent plain;
  plain.timestamp_ns = 5'000'000;
  std::vector<TraceEvent> ev{plain, at_ms(1, 10)};
  std::ostringstream out;
  write_timeline(out, ev, 2);
  auto l = lines(out.str());
  CHECK(l.back() == "6,10,0,0,0,0,0,0");
}

TEST_CASE("timeline errors") {
  std::ostringstream out;
  CHECK_THROWS_AS(write_timeline(out, {}, 0), Error);
  try {
    export_timeline("/nonexistent-dir/x.csv", {}, 10);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoFailure);
  }
}

TEST_CASE("exports go to files") {
  TempDir dir;
  Tracer t(8);
  BudgetSnapshot s;
  s.pending_in_bytes = 4;
  t.record(EventKind::LoadSubmit, HandleId::make(2, 0), 4, "demand", &s);
  t.record(EventKind::Blocked, HandleId::make(2, 0));
  export_timeline(dir.path() / "t.csv", t.events(), 1);
  std::ifstream csv(dir.path() / "t.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == kTimelineHeader);

  dump_events_jsonl(dir.path() / "e.jsonl", t.events());
  std::ifstream in(dir.path() / "e.jsonl");
  std::vector<nlohmann::json> rows;
  for (std::string l; std::getline(in, l);) rows.push_back(nlohmann::json::parse(l));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0]["kind"] == "LOAD_SUBMIT");
  CHECK(rows[0]["detail"] == "demand");
  CHECK(rows[0]["bytes"] == 4);
  CHECK(rows[1]["kind"] == "BLOCKED");
}
