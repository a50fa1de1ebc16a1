// One line per acceptance criterion. Pass criterion numbers to run a subset.

#include <malloc.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <new>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "alloc_oracle.hpp"
#include "cyclic_reference.hpp"
#include "oocmem/bench.hpp"
#include "oocmem/chunk_allocator.hpp"
#include "oocmem/manager.hpp"
#include "oocmem/strategy.hpp"
#include "oocmem/trace.hpp"
#include "temp_dir.hpp"

// ---- heap accounting for the metadata check ----

namespace {
std::atomic<std::int64_t> g_heap_live{0};
}

void* operator new(std::size_t n) {
  void* p = std::malloc(n == 0 ? 1 : n);
  if (!p) throw std::bad_alloc();
  g_heap_live.fetch_add(static_cast<std::int64_t>(malloc_usable_size(p)), std::memory_order_relaxed);
  return p;
}
void* operator new[](std::size_t n) { return ::operator new(n); }
void* operator new(std::size_t n, const std::nothrow_t&) noexcept {
  try {
    return ::operator new(n);
  } catch (...) {
    return nullptr;
  }
}
void* operator new[](std::size_t n, const std::nothrow_t&) noexcept { return ::operator new(n, std::nothrow); }
void operator delete(void* p) noexcept {
  if (!p) return;
  g_heap_live.fetch_sub(static_cast<std::int64_t>(malloc_usable_size(p)), std::memory_order_relaxed);
  std::free(p);
}
void operator delete[](void* p) noexcept { ::operator delete(p); }
void operator delete(void* p, std::size_t) noexcept { ::operator delete(p); }
void operator delete[](void* p, std::size_t) noexcept { ::operator delete(p); }

using namespace oocmem;
using namespace std::chrono_literals;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::uint64_t fnv(const std::byte* p, std::uint64_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint64_t k = 0; k < n; ++k) h = (h ^ static_cast<std::uint8_t>(p[k])) * 1099511628211ull;
  return h;
}

ManagerConfig small_config(const TempDir& dir, std::uint64_t ram, std::uint64_t swap_file, bool overcommit = false) {
  ManagerConfig c;
  c.ram_limit_bytes = ram;
  c.swap_dir = dir.path();
  c.swap_file_size_bytes = swap_file;
  c.overcommit = overcommit;
  return c;
}

// Polls the ledger from a side thread while a workload runs.
class Sampler {
 public:
  explicit Sampler(const Manager& m) : m_(m), t_([this] { loop(); }) {}
  ~Sampler() { stop(); }
  void stop() {
    if (t_.joinable()) {
      done_ = true;
      t_.join();
    }
  }
  std::uint64_t samples() const { return samples_; }
  std::uint64_t bad() const { return bad_; }

 private:
  void loop() {
    const auto limit = m_.config().ram_limit_bytes;
    while (!done_) {
      auto l = m_.ledger();
      if (l.ram_used() + l.ram_pending_in() > limit) ++bad_;
      ++samples_;
      std::this_thread::sleep_for(20us);
    }
  }
  const Manager& m_;
  std::atomic<bool> done_{false};
  std::uint64_t samples_ = 0, bad_ = 0;
  std::thread t_;
};

// ---- 1 ----

Outcome budget_safety() {
  TempDir dir;
  std::uint64_t runs = 0, rows = 0, bad = 0;
  for (auto name : bench::kScenarios) {
    bench::ScenarioParams p;
    p.scenario = std::string(name);
    p.seed = 7;
    p.threads = name == "random_access" ? 4 : 1;
    p.swap_dir = dir.path();
    p.timeline = dir.path() / "timeline.csv";
    p.timeline_period_ms = 1;
    for (const auto& r : bench::run_scenario(p)) {
      if (r.variant == "raw") continue;
      ++runs;
      if (r.budget_violations != 0 || r.peak_resident_bytes > p.ram_limit) ++bad;
    }
    std::ifstream in(*p.timeline);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<std::uint64_t> c;
      std::istringstream row(line);
      for (std::string v; std::getline(row, v, ',');) c.push_back(std::stoull(v));
      if (c.size() != 8 || c[1] + c[6] > p.ram_limit) ++bad;
      ++rows;
    }
  }

  // Threaded fuzz with a sampling thread.
  Manager m(small_config(dir, 256 << 10, 1 << 20, true));
  std::vector<HandleId> ids;
  std::mt19937_64 rng(1);
  for (int k = 0; k < 64; ++k) ids.push_back(m.create(1024 + rng() % (31 << 10), 1));
  std::uint64_t samples;
  {
    Sampler s(m);
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t)
      pool.emplace_back([&, t] {
        std::mt19937_64 r(100 + t);
        for (int op = 0; op < 2000; ++op) {
          auto g = m.adhere(ids[r() % ids.size()], r() % 2 ? AccessMode::ReadWrite : AccessMode::ReadOnly,
                            Loading::Deferred);
          auto v = g.pull();
          if (v.writable()) v.mutable_data()[r() % v.size()] = std::byte(op);
        }
      });
    for (auto& th : pool) th.join();
    s.stop();
    samples = s.samples();
    bad += s.bad();
  }
  bad += m.stats().budget_violations;
  return {bad == 0, fmt("%llu managed runs, %llu timeline rows, %llu ledger samples, %llu violations",
                        (unsigned long long)runs, (unsigned long long)rows, (unsigned long long)samples,
                        (unsigned long long)bad)};
}

// ---- 2 ----

Outcome data_integrity() {
  TempDir dir;
  const std::uint64_t ram = 64 << 10;
  Manager m(small_config(dir, ram, ram));
  std::mt19937_64 rng(2);

  struct Live {
    HandleId id;
    std::uint64_t sum;
  };
  std::vector<Live> live;
  std::uint64_t mismatches = 0, split3 = 0, cycles = 0;

  auto write_random = [&](Live& l) {
    auto g = m.adhere(l.id, AccessMode::ReadWrite);
    auto v = g.pull();
    if (fnv(v.data(), v.size()) != l.sum) ++mismatches;
    auto n = 1 + rng() % 64;
    for (std::uint64_t k = 0; k < n; ++k) v.mutable_data()[rng() % v.size()] = std::byte(rng());
    l.sum = fnv(v.data(), v.size());
  };
  auto verify = [&](const Live& l) {
    auto g = m.adhere(l.id, AccessMode::ReadOnly);
    auto v = g.pull();
    if (fnv(v.data(), v.size()) != l.sum) ++mismatches;
  };
  auto make = [&](std::uint64_t bytes) {
    Live l{m.create(bytes, 1), 0};
    {
      auto g = m.adhere(l.id, AccessMode::ReadWrite);
      auto v = g.pull();
      for (std::uint64_t k = 0; k < bytes; ++k) v.mutable_data()[k] = std::byte(rng());
      l.sum = fnv(v.data(), v.size());
    }
    live.push_back(l);
  };
  auto evict = [&](const Live& l) {
    m.evict(l.id);
    m.wait_idle();
    if (m.swap().spans_of(l.id).size() >= 3) ++split3;
  };

  // Fill the swap file with 1 KiB copies, then punch holes so that larger
  // blocks have to split.
  for (int k = 0; k < 64; ++k) make(1024);
  for (auto& l : live) evict(l);
  for (std::size_t k = 0; k < live.size(); k += 2) m.destroy(live[k].id);
  std::erase_if(live, [&](const Live& l) { return !m.contains(l.id); });

  while (cycles < 1000) {
    auto op = rng() % 10;
    if (op == 0 && live.size() < 48) {
      make(256 + rng() % (12 << 10));
      continue;
    }
    if (op == 1 && live.size() > 8) {
      auto k = rng() % live.size();
      verify(live[k]);
      m.destroy(live[k].id);
      live.erase(live.begin() + static_cast<long>(k));
      continue;
    }
    auto& l = live[rng() % live.size()];
    write_random(l);
    evict(l);
    verify(l);
    ++cycles;
  }
  for (const auto& l : live) verify(l);
  auto st = m.stats();
  bool ok = mismatches == 0 && split3 > 0 && st.budget_violations == 0;
  return {ok, fmt("%llu cycles, %llu mismatches, %llu evictions split into >= 3 spans, %llu B written",
                  (unsigned long long)cycles, (unsigned long long)mismatches, (unsigned long long)split3,
                  (unsigned long long)st.bytes_written)};
}

// ---- 3 ----

Outcome strategy_oracle() {
  std::uint64_t divergences = 0, events = 0, misses = 0, victims = 0, hits = 0;
  bool counts_match = true;
  std::string first;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    oracle::TraceConfig cfg;
    cfg.seed = 1000 + seed;
    cfg.events = 10000;
    cfg.prefetch = seed != 4;
    auto r = oracle::run_trace(cfg);
    divergences += r.divergences;
    if (first.empty()) first = r.first_divergence;
    counts_match = counts_match && r.misses == r.model_misses;
    events += r.events;
    misses += r.misses;
    victims += r.victims;
    hits += r.preemptive_hits;
  }
  auto d = fmt("%llu events over 4 traces, %llu misses, %llu victims, %llu prefetch hits, %llu divergences",
               (unsigned long long)events, (unsigned long long)misses, (unsigned long long)victims,
               (unsigned long long)hits, (unsigned long long)divergences);
  if (!first.empty()) d += " (" + first + ")";
  return {divergences == 0 && counts_match && misses > 0 && victims > 0, d};
}

// ---- 4 ----

Outcome prefetch_benefit() {
  TempDir dir;
  bench::ScenarioParams p;
  p.scenario = "preemptive_onoff";
  p.element_bytes = 64 << 10;
  p.data_bytes = 1024 * p.element_bytes;
  p.ram_limit = p.data_bytes / 4;
  p.work = 1000us;
  p.passes = 1;
  p.io_latency = 200us;
  p.swap_dir = dir.path();
  auto r = bench::run_scenario(p);
  const auto& on = r.at(0);
  const auto& off = r.at(1);
  bool ok = 2 * on.blocked_wait_count <= off.blocked_wait_count && on.wall_time_ms <= off.wall_time_ms &&
            on.checksum_failures + off.checksum_failures == 0;
  return {ok, fmt("blocked on/off %llu/%llu (gate <= 50%%), wall on/off %.0f/%.0f ms, 200 us emulated latency",
                  (unsigned long long)on.blocked_wait_count, (unsigned long long)off.blocked_wait_count,
                  on.wall_time_ms, off.wall_time_ms)};
}

// ---- 5 ----

bool decays_exact(std::uint64_t budget, std::uint64_t ram, unsigned n) {
  __int128 lhs = 100, rhs = 1;
  for (unsigned k = 0; k < n; ++k) {
    lhs *= budget;
    rhs *= ram;
  }
  return lhs < rhs;
}

Outcome decay_rule() {
  const std::uint64_t ram = 1000;
  std::uint64_t cases = 0, deviations = 0;
  for (std::uint64_t budget : {50u, 100u, 200u})
    for (unsigned n = 0; n <= 10; ++n)
      for (std::uint64_t used = 0; used <= budget; used += 5) {
        auto want = decays_exact(budget, ram, n) ? std::max<std::uint64_t>(2 * (budget - used), 1) : 0;
        if (decay_bytes(budget, ram, n, 0.01, used) != want) ++deviations;
        ++cases;
      }
  bool boundary = decay_bytes(100, 1000, 2, 0.01, 0) == 0;
  return {deviations == 0 && boundary, fmt("%llu (P, N, used) cases, %llu deviations, P=0.1 N=2 %s",
                                           (unsigned long long)cases, (unsigned long long)deviations,
                                           boundary ? "no decay" : "decays")};
}

// ---- 6 ----

const bench::Phase& phase(const bench::Report& r, std::string_view name) {
  for (const auto& p : r.phases)
    if (p.name == name) return p;
  throw std::runtime_error("missing phase " + std::string(name));
}

Outcome const_saving() {
  TempDir dir;
  bool ok = true;
  std::string d;
  for (std::uint64_t mib : {1u, 4u, 10u}) {
    bench::ScenarioParams p;
    p.scenario = "const_vs_mut";
    p.element_bytes = mib << 20;
    p.ram_limit = 16 * p.element_bytes;
    p.data_bytes = 64 * p.element_bytes;
    p.swap_dir = dir.path();
    // Best of three against scheduler noise.
    double ro_ms = 1e300, rw_ms = 1e300;
    std::uint64_t ro_written = 0, rw_written = ~0ull;
    for (int rep = 0; rep < 3; ++rep) {
      auto r = bench::run_scenario(p);
      const auto& ro = phase(r.at(0), "measured");
      const auto& rw = phase(r.at(1), "measured");
      ro_ms = std::min(ro_ms, ro.wall_time_ms);
      rw_ms = std::min(rw_ms, rw.wall_time_ms);
      ro_written = std::max(ro_written, ro.bytes_written);
      rw_written = std::min(rw_written, rw.bytes_written);
    }
    ok = ok && ro_written == 0 && rw_written >= p.data_bytes - p.ram_limit && ro_ms <= rw_ms;
    d += fmt("%s%llu MiB: written const/mut %llu/%llu MiB, wall %.0f/%.0f ms", d.empty() ? "" : "; ",
             (unsigned long long)mib, (unsigned long long)(ro_written >> 20), (unsigned long long)(rw_written >> 20),
             ro_ms, rw_ms);
  }
  return {ok, d};
}

// ---- 7 ----

Outcome no_swap_overhead() {
  TempDir dir;
  bool ok = true;
  std::string d;
  for (std::uint64_t mib : {1u, 4u}) {
    bench::ScenarioParams p;
    p.scenario = "nbody_accumulate";
    p.element_bytes = mib << 20;
    p.data_bytes = 64ull << 20;
    p.ram_limit = 2 * p.data_bytes;
    p.passes = 4;
    p.swap_dir = dir.path();
    double raw_ms = 1e300, managed_ms = 1e300;
    std::uint64_t io = 0, bad = 0;
    for (int rep = 0; rep < 3; ++rep) {
      auto r = bench::run_scenario(p);
      raw_ms = std::min(raw_ms, r.at(0).wall_time_ms);
      managed_ms = std::min(managed_ms, r.at(1).wall_time_ms);
      io += r.at(1).bytes_written + r.at(1).bytes_read + r.at(1).miss_count;
      bad += r.at(1).checksum_failures;
    }
    double overhead = managed_ms / raw_ms - 1;
    ok = ok && io == 0 && bad == 0 && overhead <= 0.25;
    d += fmt("%s%llu MiB blocks: swap IO %llu, overhead %+.1f%% (gate 25%%)", d.empty() ? "" : "; ",
             (unsigned long long)mib, (unsigned long long)io, overhead * 100);
  }
  return {ok, d};
}

// ---- 8 ----

Outcome allocator_fuzz() {
  ChunkAllocator a;
  oracle::BitmapAllocator o;
  for (int f = 0; f < 4; ++f) {
    a.add_file(4096);
    o.add_file(4096);
  }
  std::mt19937_64 rng(8);
  std::vector<std::vector<ChunkSpan>> live;
  std::uint64_t ops = 0, mismatches = 0, splits = 0, live_bytes = 0;
  for (; ops < 100000; ++ops) {
    if (live.empty() || rng() % 5 < 3) {
      const auto bytes = 1 + rng() % 700;
      auto got = a.allocate(bytes);
      auto want = o.allocate(bytes);
      if (got.has_value() != want.has_value() || (got && *got != *want)) ++mismatches;
      if (got) {
        if (got->size() > 1) ++splits;
        live_bytes += bytes;
        live.push_back(*got);
      }
    } else {
      const auto k = rng() % live.size();
      a.free(live[k]);
      for (const auto& s : live[k]) {
        if (!o.free(s)) ++mismatches;
        live_bytes -= s.length;
      }
      live.erase(live.begin() + static_cast<long>(k));
    }
    if (!a.check_invariants() || a.free_bytes() != o.free_bytes() ||
        a.free_bytes() + live_bytes != a.provisioned_bytes() || a.allocated_bytes() != live_bytes)
      ++mismatches;
  }
  return {mismatches == 0 && splits > 0, fmt("%llu ops, %llu split allocations, %llu mismatches",
                                             (unsigned long long)ops, (unsigned long long)splits,
                                             (unsigned long long)mismatches)};
}

// ---- 9 ----

Outcome metadata_overhead() {
  TempDir dir;
  const std::uint64_t count = 10000, bytes = 1024;
  Manager m(small_config(dir, 1 << 20, 16 << 20));
  auto before = g_heap_live.load();
  std::vector<HandleId> ids;
  ids.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) ids.push_back(m.create(bytes, 1));
  for (auto id : ids) m.evict(id);
  m.wait_idle();
  std::uint64_t swapped = 0;
  for (auto id : ids) swapped += m.state(id) == BlockState::Swapped;
  auto meta = g_heap_live.load() - before - static_cast<std::int64_t>(ids.capacity() * sizeof(HandleId));
  double ratio = static_cast<double>(meta) / static_cast<double>(count * bytes);
  return {swapped == count && ratio <= 0.10,
          fmt("%llu swapped blocks of 1 KiB, %lld B of heap metadata, %.2f%% of payload (gate 10%%)",
              (unsigned long long)swapped, (long long)meta, ratio * 100)};
}

// ---- 10 ----

Outcome deadlock_freedom() {
  auto work = std::async(std::launch::async, [] {
    std::uint64_t pulls = 0, violations = 0;
    for (int rep = 0; rep < 100; ++rep) {
      TempDir dir;
      const std::uint64_t ram = 64 << 10;
      Manager m(small_config(dir, ram, 4 * ram, true));
      std::vector<HandleId> ids;
      for (int k = 0; k < 16; ++k) ids.push_back(m.create(ram / 8, 1));
      std::atomic<std::uint64_t> done{0};
      std::vector<std::thread> pool;
      for (int t = 0; t < 8; ++t)
        pool.emplace_back([&, t] {
          std::mt19937 rng(rep * 8 + t);
          for (int op = 0; op < 20; ++op) {
            std::vector<Guard> guards;
            auto n = 2 + rng() % 3;
            for (unsigned k = 0; k < n; ++k)
              guards.push_back(m.adhere(ids[rng() % ids.size()],
                                        rng() % 2 ? AccessMode::ReadWrite : AccessMode::ReadOnly, Loading::Deferred));
            std::vector<Guard*> ptrs;
            for (auto& g : guards) ptrs.push_back(&g);
            auto views = m.pull_group(ptrs);
            for (auto& v : views)
              if (v.writable()) v.mutable_data()[0] = std::byte(op);
            ++done;
          }
        });
      for (auto& th : pool) th.join();
      pulls += done;
      violations += m.stats().budget_violations;
    }
    return std::pair{pulls, violations};
  });
  if (work.wait_for(60s) != std::future_status::ready) {
    std::printf("FAIL 10 deadlock freedom: not finished within 60 s\n");
    std::fflush(stdout);
    std::_Exit(1);
  }
  auto [pulls, violations] = work.get();
  return {violations == 0, fmt("100 repetitions x 8 threads, %llu group pulls, handles 2x the limit, 0 timeouts",
                               (unsigned long long)pulls)};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "budget safety", budget_safety},
      {2, "data integrity", data_integrity},
      {3, "cyclic strategy oracle", strategy_oracle},
      {4, "prefetch benefit", prefetch_benefit},
      {5, "decay rule", decay_rule},
      {6, "const-access saving", const_saving},
      {7, "no-swap overhead", no_swap_overhead},
      {8, "allocator correctness", allocator_fuzz},
      {9, "metadata overhead", metadata_overhead},
      {10, "deadlock freedom", deadlock_freedom},
  };
  std::set<int> only;
  for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.number)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.number, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
