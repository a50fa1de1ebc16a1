#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include "oocmem/bench.hpp"
#include "oocmem/error.hpp"
#include "oocmem/manager.hpp"

namespace oocmem::bench {

using Clock = std::chrono::steady_clock;

void spin_for(std::chrono::microseconds duration) {
  if (duration.count() <= 0) return;
  const auto until = Clock::now() + duration;
  volatile std::uint64_t sink = 0;
  while (Clock::now() < until)
    for (int k = 0; k < 64; ++k) sink = sink * 6364136223846793005ull + 1;
}

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void fill_pattern(std::byte* data, std::uint64_t bytes, std::uint64_t key) {
  const std::uint64_t words = bytes / 8;
  for (std::uint64_t k = 0; k < words; ++k) {
    const std::uint64_t w = mix(key * 0x100000001b3ull + k);
    std::memcpy(data + k * 8, &w, 8);
  }
}

std::uint64_t digest(const std::byte* data, std::uint64_t bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const std::uint64_t words = bytes / 8;
  for (std::uint64_t k = 0; k < words; ++k) {
    std::uint64_t w;
    std::memcpy(&w, data + k * 8, 8);
    h = (h ^ w) * 0x100000001b3ull;
  }
  return h;
}

// Rewrites the leading load% of the element.
void rewrite(std::byte* data, std::uint64_t bytes, double load_percent, std::uint64_t salt) {
  const auto count = static_cast<std::uint64_t>(static_cast<double>(bytes) * load_percent / 100.0);
  for (std::uint64_t r = 0; r < count; ++r) data[r % bytes] = static_cast<std::byte>((r * 131 + salt) & 0xff);
}

std::filesystem::path variant_path(const std::filesystem::path& path, const std::string& variant) {
  if (variant.empty()) return path;
  auto name = path.stem().string() + "-" + variant + path.extension().string();
  return path.parent_path() / name;
}

ManagerConfig make_config(const ScenarioParams& p) {
  ManagerConfig c;
  c.ram_limit_bytes = p.ram_limit;
  if (!p.swap_dir.empty()) c.swap_dir = p.swap_dir;
  c.swap_file_size_bytes = p.swap_file_bytes ? p.swap_file_bytes : p.data_bytes + p.ram_limit;
  c.swap_policy = p.policy;
  c.worker_count = p.workers;
  return c;
}

class Run {
 public:
  Run(const ScenarioParams& p, std::string variant, bool preemptive) : p_(p), m_(make_config(p), options(p)) {
    report_.scenario = p.scenario;
    report_.variant = std::move(variant);
    report_.ram_limit_bytes = p.ram_limit;
    m_.set_preemptive(preemptive);
    if (p.prompt) m_.set_swap_prompt(p.prompt);
    start_ = Clock::now();
  }

  Manager& m() { return m_; }
  Report& report() { return report_; }

  template <typename F>
  void phase(std::string name, F&& body) {
    const auto before = m_.stats();
    const auto t0 = Clock::now();
    body();
    const auto after = m_.stats();
    report_.phases.push_back(Phase{std::move(name), ms_since(t0), after.misses - before.misses,
                                   after.bytes_written - before.bytes_written, after.bytes_read - before.bytes_read});
  }

  Phase& last_phase() { return report_.phases.back(); }

  Report finish() {
    report_.wall_time_ms = ms_since(start_);
    const auto s = m_.stats();
    report_.miss_count = s.misses;
    report_.prefetch_hit_count = s.preemptive_hits;
    report_.blocked_wait_count = s.blocked_pulls;
    report_.bytes_written = s.bytes_written;
    report_.bytes_read = s.bytes_read;
    report_.peak_resident_bytes = s.peak_resident_bytes;
    report_.budget_violations = s.budget_violations;
    if (auto* t = m_.tracer()) {
      const auto events = t->events();
      if (p_.timeline) export_timeline(variant_path(*p_.timeline, report_.variant), events, p_.timeline_period_ms);
      if (p_.raw_dump) dump_events_jsonl(variant_path(*p_.raw_dump, report_.variant), events);
    }
    return report_;
  }

 private:
  static ManagerOptions options(const ScenarioParams& p) {
    ManagerOptions o;
    if (p.timeline || p.raw_dump) o.trace_capacity = std::size_t{1} << 18;
    o.io_latency = p.io_latency;
    return o;
  }

  const ScenarioParams& p_;
  Manager m_;
  Report report_;
  Clock::time_point start_;
};

std::uint64_t element_count(const ScenarioParams& p) { return std::max<std::uint64_t>(1, p.data_bytes / p.element_bytes); }

// Creates n filled elements and returns their ids and digests.
void allocate(Run& run, const ScenarioParams& p, std::uint64_t n, std::vector<HandleId>& ids,
              std::vector<std::uint64_t>& sums) {
  ids.reserve(n);
  sums.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    ids.push_back(run.m().create(p.element_bytes, 1));
    auto g = run.m().adhere(ids.back(), AccessMode::ReadWrite);
    auto v = g.pull();
    fill_pattern(v.mutable_data(), v.size(), i);
    sums.push_back(digest(v.data(), v.size()));
  }
}

void destroy_all(Run& run, const std::vector<HandleId>& ids) {
  for (auto id : ids) run.m().destroy(id);
}

bool verify_read(Run& run, HandleId id, std::uint64_t expected) {
  auto g = run.m().adhere(id, AccessMode::ReadOnly);
  auto v = g.pull();
  return digest(v.data(), v.size()) == expected;
}

Report sequential_scan(const ScenarioParams& p) {
  Run run(p, "", p.preemptive);
  std::vector<HandleId> ids;
  std::vector<std::uint64_t> sums;
  const auto n = element_count(p);
  std::uint64_t failures = 0;
  run.phase("allocate", [&] { allocate(run, p, n, ids, sums); });
  for (unsigned pass = 0; pass < p.passes; ++pass)
    run.phase("scan" + std::to_string(pass), [&] {
      for (std::uint64_t i = 0; i < n; ++i) {
        if (!verify_read(run, ids[i], sums[i])) ++failures;
        spin_for(p.work);
      }
    });
  run.phase("destroy", [&] { destroy_all(run, ids); });
  run.report().checksum_failures = failures;
  return run.finish();
}

Report random_access(const ScenarioParams& p) {
  Run run(p, "", p.preemptive);
  std::vector<HandleId> ids;
  std::vector<std::uint64_t> sums;
  const auto n = element_count(p);
  const auto seed = *p.seed;
  std::atomic<std::uint64_t> failures{0};
  run.phase("allocate", [&] { allocate(run, p, n, ids, sums); });
  run.phase("access", [&] {
    std::vector<std::mutex> locks(n);
    const std::uint64_t total = n * p.passes;
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&](unsigned t) {
      try {
        std::mt19937_64 rng(seed + t);
        std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
        const std::uint64_t share = total / p.threads + (t < total % p.threads ? 1 : 0);
        for (std::uint64_t k = 0; k < share; ++k) {
          const auto i = pick(rng);
          std::lock_guard lk(locks[i]);
          auto g = run.m().adhere(ids[i], AccessMode::ReadWrite);
          auto v = g.pull();
          if (digest(v.data(), v.size()) != sums[i]) failures.fetch_add(1);
          rewrite(v.mutable_data(), v.size(), p.load_percent, k + t);
          sums[i] = digest(v.data(), v.size());
          spin_for(p.work);
        }
      } catch (...) {
        std::lock_guard lk(error_mutex);
        if (!error) error = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < p.threads; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  });
  run.phase("verify", [&] {
    for (std::uint64_t i = 0; i < n; ++i)
      if (!verify_read(run, ids[i], sums[i])) failures.fetch_add(1);
  });
  run.phase("destroy", [&] { destroy_all(run, ids); });
  run.report().checksum_failures = failures.load();
  run.report().extra["seed"] = static_cast<double>(seed);
  return run.finish();
}

// Damped oscillators. Each step appends a position and a velocity array
// computed from the previous pair.
struct Nbody {
  std::uint64_t steps;
  std::uint64_t count;
  static constexpr double dt = 1e-3;

  static void init(std::span<double> x, std::span<double> v) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = std::sin(static_cast<double>(k) * 0.01);
      v[k] = std::cos(static_cast<double>(k) * 0.01);
    }
  }
  static void step(std::span<const double> x0, std::span<const double> v0, std::span<double> x1,
                   std::span<double> v1) {
    for (std::size_t k = 0; k < x0.size(); ++k) {
      v1[k] = v0[k] - dt * x0[k] - dt * 0.01 * v0[k];
      x1[k] = x0[k] + dt * v1[k];
    }
  }
  static double energy(std::span<const double> x, std::span<const double> v) {
    double e = 0;
    for (std::size_t k = 0; k < x.size(); ++k) e += 0.5 * (x[k] * x[k] + v[k] * v[k]);
    return e;
  }
};

Nbody nbody_shape(const ScenarioParams& p) {
  const std::uint64_t count = p.element_bytes / sizeof(double);
  return {std::max<std::uint64_t>(1, p.data_bytes / (2 * count * sizeof(double))), count};
}

Report nbody_managed(const ScenarioParams& p, double& total) {
  Run run(p, "managed", p.preemptive);
  const auto shape = nbody_shape(p);
  std::vector<HandleId> xs, vs;
  run.phase("integrate", [&] {
    for (std::uint64_t s = 0; s < shape.steps; ++s) {
      xs.push_back(run.m().create(shape.count, sizeof(double)));
      vs.push_back(run.m().create(shape.count, sizeof(double)));
      auto x1 = run.m().adhere(xs.back(), AccessMode::ReadWrite);
      auto v1 = run.m().adhere(vs.back(), AccessMode::ReadWrite);
      if (s == 0) {
        auto views = run.m().pull_group({&x1, &v1});
        Nbody::init(views[0].as_mutable<double>(), views[1].as_mutable<double>());
      } else {
        auto x0 = run.m().adhere(xs[s - 1], AccessMode::ReadOnly);
        auto v0 = run.m().adhere(vs[s - 1], AccessMode::ReadOnly);
        auto views = run.m().pull_group({&x0, &v0, &x1, &v1});
        Nbody::step(views[0].as<double>(), views[1].as<double>(), views[2].as_mutable<double>(),
                    views[3].as_mutable<double>());
      }
      spin_for(p.work);
    }
  });
  run.phase("readback", [&] {
    total = 0;
    for (std::uint64_t s = 0; s < shape.steps; ++s) {
      auto x = run.m().adhere(xs[s], AccessMode::ReadOnly);
      auto v = run.m().adhere(vs[s], AccessMode::ReadOnly);
      auto views = run.m().pull_group({&x, &v});
      total += Nbody::energy(views[0].as<double>(), views[1].as<double>());
    }
  });
  run.phase("destroy", [&] {
    destroy_all(run, xs);
    destroy_all(run, vs);
  });
  return run.finish();
}

Report nbody_raw(const ScenarioParams& p, double& total) {
  const auto shape = nbody_shape(p);
  Report r;
  r.scenario = p.scenario;
  r.variant = "raw";
  r.ram_limit_bytes = p.ram_limit;
  const auto t0 = Clock::now();
  std::vector<std::unique_ptr<double[]>> xs, vs;
  auto phase_start = Clock::now();
  for (std::uint64_t s = 0; s < shape.steps; ++s) {
    xs.push_back(std::make_unique<double[]>(shape.count));
    vs.push_back(std::make_unique<double[]>(shape.count));
    std::span<double> x1(xs.back().get(), shape.count), v1(vs.back().get(), shape.count);
    if (s == 0)
      Nbody::init(x1, v1);
    else
      Nbody::step(std::span<const double>(xs[s - 1].get(), shape.count),
                  std::span<const double>(vs[s - 1].get(), shape.count), x1, v1);
    spin_for(p.work);
  }
  r.phases.push_back({"integrate", ms_since(phase_start), 0, 0, 0});
  phase_start = Clock::now();
  total = 0;
  for (std::uint64_t s = 0; s < shape.steps; ++s)
    total += Nbody::energy(std::span<const double>(xs[s].get(), shape.count),
                           std::span<const double>(vs[s].get(), shape.count));
  r.phases.push_back({"readback", ms_since(phase_start), 0, 0, 0});
  phase_start = Clock::now();
  xs.clear();
  vs.clear();
  r.phases.push_back({"destroy", ms_since(phase_start), 0, 0, 0});
  r.wall_time_ms = ms_since(t0);
  r.peak_resident_bytes = shape.steps * 2 * shape.count * sizeof(double);
  return r;
}

std::vector<Report> nbody_accumulate(const ScenarioParams& p) {
  double raw_total = 0, managed_total = 0;
  auto raw = nbody_raw(p, raw_total);
  auto managed = nbody_managed(p, managed_total);
  if (managed_total != raw_total) managed.checksum_failures = 1;
  managed.extra["energy"] = managed_total;
  raw.extra["energy"] = raw_total;
  managed.extra["overhead"] = raw.wall_time_ms > 0 ? managed.wall_time_ms / raw.wall_time_ms - 1.0 : 0.0;
  return {std::move(raw), std::move(managed)};
}

Report matrix_transpose(const ScenarioParams& p) {
  Run run(p, "", p.preemptive);
  const auto b = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(p.element_bytes / sizeof(double))));
  const std::uint64_t block_bytes = b * b * sizeof(double);
  const auto nb = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::sqrt(
                                                 static_cast<double>(p.data_bytes / block_bytes))));
  const std::uint64_t N = nb * b;
  std::vector<HandleId> ids(nb * nb);
  std::uint64_t failures = 0;
  auto at = [&](std::uint64_t i, std::uint64_t j) { return ids[i * nb + j]; };

  run.phase("allocate", [&] {
    for (std::uint64_t i = 0; i < nb; ++i)
      for (std::uint64_t j = 0; j < nb; ++j) {
        ids[i * nb + j] = run.m().create(b * b, sizeof(double));
        auto g = run.m().adhere(ids[i * nb + j], AccessMode::ReadWrite);
        auto a = g.pull().as_mutable<double>();
        for (std::uint64_t r = 0; r < b; ++r)
          for (std::uint64_t c = 0; c < b; ++c) a[r * b + c] = static_cast<double>((i * b + r) * N + j * b + c);
      }
  });
  run.phase("transpose", [&] {
    for (std::uint64_t i = 0; i < nb; ++i)
      for (std::uint64_t j = i; j < nb; ++j) {
        if (i == j) {
          auto g = run.m().adhere(at(i, i), AccessMode::ReadWrite);
          auto a = g.pull().as_mutable<double>();
          for (std::uint64_t r = 0; r < b; ++r)
            for (std::uint64_t c = r + 1; c < b; ++c) std::swap(a[r * b + c], a[c * b + r]);
        } else {
          auto gx = run.m().adhere(at(i, j), AccessMode::ReadWrite);
          auto gy = run.m().adhere(at(j, i), AccessMode::ReadWrite);
          auto views = run.m().pull_group({&gx, &gy});
          auto x = views[0].as_mutable<double>();
          auto y = views[1].as_mutable<double>();
          for (std::uint64_t r = 0; r < b; ++r)
            for (std::uint64_t c = 0; c < b; ++c) std::swap(x[r * b + c], y[c * b + r]);
        }
        spin_for(p.work);
      }
  });
  run.phase("verify", [&] {
    for (std::uint64_t i = 0; i < nb; ++i)
      for (std::uint64_t j = 0; j < nb; ++j) {
        auto g = run.m().adhere(at(i, j), AccessMode::ReadOnly);
        auto a = g.pull().as<double>();
        bool ok = true;
        for (std::uint64_t r = 0; r < b && ok; ++r)
          for (std::uint64_t c = 0; c < b; ++c)
            if (a[r * b + c] != static_cast<double>((j * b + c) * N + i * b + r)) {
              ok = false;
              break;
            }
        if (!ok) ++failures;
      }
  });
  run.phase("destroy", [&] { destroy_all(run, ids); });
  run.report().checksum_failures = failures;
  run.report().extra["blocks_per_side"] = static_cast<double>(nb);
  run.report().extra["block_side"] = static_cast<double>(b);
  return run.finish();
}

Report const_vs_mut_variant(const ScenarioParams& p, bool mutable_access) {
  Run run(p, mutable_access ? "mutable" : "const", p.preemptive);
  std::vector<HandleId> ids;
  std::vector<std::uint64_t> sums;
  const auto n = element_count(p);
  std::uint64_t failures = 0;
  run.phase("allocate", [&] { allocate(run, p, n, ids, sums); });
  run.phase("warm", [&] {
    for (std::uint64_t i = 0; i < n; ++i)
      if (!verify_read(run, ids[i], sums[i])) ++failures;
  });
  run.phase("measured", [&] {
    for (std::uint64_t i = 0; i < n; ++i) {
      auto g = run.m().adhere(ids[i], mutable_access ? AccessMode::ReadWrite : AccessMode::ReadOnly);
      auto v = g.pull();
      if (digest(v.data(), v.size()) != sums[i]) ++failures;
      spin_for(p.work);
    }
  });
  run.phase("destroy", [&] { destroy_all(run, ids); });
  run.report().checksum_failures = failures;
  return run.finish();
}

Report preemptive_variant(const ScenarioParams& p, bool on) {
  Run run(p, on ? "on" : "off", on);
  std::vector<HandleId> ids;
  std::vector<std::uint64_t> sums;
  const auto n = element_count(p);
  std::uint64_t failures = 0;
  run.phase("allocate", [&] { allocate(run, p, n, ids, sums); });
  run.phase("access", [&] {
    const std::uint64_t iterations = n * p.passes;
    for (std::uint64_t it = 0; it < iterations; ++it) {
      const auto i = it % n;
      auto g = run.m().adhere(ids[i], AccessMode::ReadWrite);
      auto v = g.pull();
      if (digest(v.data(), v.size()) != sums[i]) ++failures;
      rewrite(v.mutable_data(), v.size(), p.load_percent, it);
      sums[i] = digest(v.data(), v.size());
      spin_for(p.work);
    }
  });
  run.phase("destroy", [&] { destroy_all(run, ids); });
  run.report().checksum_failures = failures;
  return run.finish();
}

std::uint64_t pinned_elements(std::string_view scenario, unsigned threads) {
  if (scenario == "nbody_accumulate") return 4;
  if (scenario == "matrix_transpose") return 2;
  if (scenario == "random_access") return threads;
  return 1;
}

}  // namespace

void validate(const ScenarioParams& p) {
  if (std::find(std::begin(kScenarios), std::end(kScenarios), p.scenario) == std::end(kScenarios))
    raise(ErrorCode::ConfigError, "scenario: unknown '" + p.scenario + "'");
  if (p.ram_limit == 0) raise(ErrorCode::ConfigError, "ram_limit: must be positive");
  if (p.data_bytes == 0) raise(ErrorCode::ConfigError, "data_bytes: must be positive");
  if (p.element_bytes < 64 || p.element_bytes % 8 != 0)
    raise(ErrorCode::ConfigError, "element_bytes: must be a multiple of 8 and at least 64");
  if (p.element_bytes > p.data_bytes) raise(ErrorCode::ConfigError, "element_bytes: larger than data_bytes");
  if (!(p.load_percent >= 0 && p.load_percent <= 100)) raise(ErrorCode::ConfigError, "load: must be in [0, 100]");
  if (p.scenario == "random_access" && !p.seed) raise(ErrorCode::ConfigError, "seed: required for random_access");
  if (p.threads == 0) raise(ErrorCode::ConfigError, "threads: must be positive");
  if (p.passes == 0) raise(ErrorCode::ConfigError, "passes: must be positive");
  if (!(p.timeline_period_ms > 0)) raise(ErrorCode::ConfigError, "timeline_period_ms: must be positive");
  if (pinned_elements(p.scenario, p.threads) * p.element_bytes > p.ram_limit)
    raise(ErrorCode::ConfigError, "ram_limit: too small for the elements this scenario pins at once");
}

std::vector<Report> run_scenario(const ScenarioParams& p) {
  validate(p);
  if (p.scenario == "sequential_scan") return {sequential_scan(p)};
  if (p.scenario == "random_access") return {random_access(p)};
  if (p.scenario == "nbody_accumulate") return nbody_accumulate(p);
  if (p.scenario == "matrix_transpose") return {matrix_transpose(p)};
  if (p.scenario == "const_vs_mut") return {const_vs_mut_variant(p, false), const_vs_mut_variant(p, true)};
  return {preemptive_variant(p, true), preemptive_variant(p, false)};
}

}  // namespace oocmem::bench
