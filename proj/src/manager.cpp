#include "oocmem/manager.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <new>

#include "oocmem/cyclic_strategy.hpp"

namespace oocmem {
namespace {

thread_local int t_domain_depth = 0;

// One scope for every group pull in the process.
std::mutex g_group_mutex;

bool resident(BlockState s) { return s == BlockState::Resident || s == BlockState::PreemptiveResident; }

}  // namespace

class Manager::DomainLock {
 public:
  explicit DomainLock(std::mutex& m) : lock(m) { ++t_domain_depth; }
  ~DomainLock() { --t_domain_depth; }
  DomainLock(const DomainLock&) = delete;
  DomainLock& operator=(const DomainLock&) = delete;

  std::unique_lock<std::mutex> lock;
};

// ---- View / Guard ----

std::byte* View::mutable_data() const {
  if (!writable_) raise(ErrorCode::ReadOnlyView, "view was pulled read-only");
  return data_;
}

Guard::~Guard() { release(); }

Guard::Guard(Guard&& other) noexcept
    : manager_(std::exchange(other.manager_, nullptr)),
      id_(other.id_),
      mode_(other.mode_),
      loading_(other.loading_),
      pulled_(std::exchange(other.pulled_, false)),
      view_(std::exchange(other.view_, View{})) {}

Guard& Guard::operator=(Guard&& other) noexcept {
  if (this != &other) {
    release();
    manager_ = std::exchange(other.manager_, nullptr);
    id_ = other.id_;
    mode_ = other.mode_;
    loading_ = other.loading_;
    pulled_ = std::exchange(other.pulled_, false);
    view_ = std::exchange(other.view_, View{});
  }
  return *this;
}

View Guard::pull() {
  if (manager_ == nullptr) raise(ErrorCode::InvalidArgument, "pull on a released guard");
  if (pulled_) return view_;
  return manager_->pull(*this);
}

void Guard::release() {
  if (manager_ == nullptr) return;
  manager_->release(*this);
  manager_ = nullptr;
  pulled_ = false;
  view_ = View{};
}

// ---- construction ----

Manager::Manager(ManagerConfig config, ManagerOptions options) : config_(std::move(config)) {
  config_.validate();
  overcommit_ = config_.overcommit;
  if (options.trace_capacity > 0) tracer_ = std::make_unique<Tracer>(options.trace_capacity);
  engine_ = std::make_unique<TransferEngine>(config_.ram_limit_bytes, config_.worker_count);
  SwapStoreConfig sc;
  sc.dir = config_.swap_dir;
  sc.file_size = config_.swap_file_size_bytes;
  sc.policy = config_.swap_policy;
  sc.io_latency = options.io_latency;
  store_ = std::make_unique<SwapStore>(sc, *engine_);
  strategy_ = options.strategy ? std::move(options.strategy)
                               : std::make_unique<CyclicStrategy>(config_.preemptive_budget_bytes(),
                                                                  config_.ram_limit_bytes,
                                                                  config_.significance_level);

  store_->set_purge_listener([this](std::uint32_t slot, std::uint64_t bytes) {
    stats_.purged_bytes += bytes;
    trace(EventKind::Purge, id_of(slot), bytes);
  });
  store_->set_extend_listener(
      [this](std::uint32_t file) { trace(EventKind::PolicyFired, std::nullopt, config_.swap_file_size_bytes,
                                         "extend file " + std::to_string(file)); });
  engine_->set_domain_probe([] { return t_domain_depth > 0; });
  engine_->set_completion_hook([this] { on_transfer_complete(); });
}

Manager::~Manager() {
  engine_->set_completion_hook(nullptr);
  engine_->shutdown(true);
  engine_->poll_completions();
  for (auto& b : blocks_) delete[] b.data;
}

// ---- lookup helpers ----

bool Manager::is_current(HandleId id) const {
  auto s = id.slot();
  return s < blocks_.size() && blocks_[s].live && blocks_[s].generation == id.generation();
}

Manager::Block& Manager::block_locked(HandleId id) {
  if (!is_current(id) || blocks_[id.slot()].dying) raise(ErrorCode::UnknownHandle, "no block " + to_string(id));
  return blocks_[id.slot()];
}

const Manager::Block& Manager::block_locked(HandleId id) const {
  if (!is_current(id) || blocks_[id.slot()].dying) raise(ErrorCode::UnknownHandle, "no block " + to_string(id));
  return blocks_[id.slot()];
}

void Manager::pin_locked(Block& b) {
  if (b.pins++ == 0) pinned_bytes_ += b.bytes;
}

void Manager::unpin_locked(Block& b) {
  if (--b.pins == 0) pinned_bytes_ -= b.bytes;
}

BudgetSnapshot Manager::snapshot_locked() const {
  auto led = engine_->ledger();
  BudgetSnapshot s;
  s.main_memory_bytes = led.ram_used();
  s.swap_memory_bytes = led.swap_used();
  s.swapped_out_cumulative_bytes = store_->bytes_written();
  s.swapped_in_cumulative_bytes = store_->bytes_read();
  s.preemptive_used_bytes = strategy_->preemptive_used();
  s.pending_in_bytes = led.ram_pending_in();
  s.pending_out_bytes = led.swap_pending_out();
  return s;
}

void Manager::trace(EventKind kind, std::optional<HandleId> id, std::optional<std::uint64_t> bytes,
                    std::string_view detail, bool with_snapshot, std::int64_t started_ns) {
  if (!tracer_ || !tracer_->enabled()) return;
  if (with_snapshot) {
    auto snap = snapshot_locked();
    tracer_->record(kind, id, bytes, detail, &snap, started_ns);
  } else {
    tracer_->record(kind, id, bytes, detail, nullptr, started_ns);
  }
}

// ---- transfer plumbing ----

void Manager::on_transfer_complete() {
  DomainLock dl(mutex_);
  settle_locked();
  cv_.notify_all();
}

void Manager::settle_locked() {
  for (;;) {
    bool progress = drain_locked();
    progress = pump_locked() || progress;
    if (!progress) return;
  }
}

bool Manager::drain_locked() {
  auto outcomes = engine_->poll_completions();
  if (outcomes.empty()) return false;
  for (auto& o : outcomes) {
    auto slot = o.handle.slot();
    auto& b = blocks_[slot];
    if (o.direction == Direction::SwapOut) {
      if (o.ok()) {
        delete[] b.data;
        b.data = nullptr;
        b.state = BlockState::Swapped;
        if (b.wanted) {
          b.wanted = 0;
          miss_locked(slot);
        }
      } else {
        b.state = BlockState::Resident;
        b.wanted = 0;
        store_->discard(o.handle);
        strategy_->reinstate(o.handle);
      }
    } else {
      if (o.ok()) {
        bool pre = strategy_->zone(o.handle) == Zone::Preemptive;
        b.state = pre ? BlockState::PreemptiveResident : BlockState::Resident;
        if (!pre) store_->set_cached(o.handle, true);
      } else {
        delete[] b.data;
        b.data = nullptr;
        b.state = BlockState::Swapped;
        strategy_->demote(o.handle);
        fail_locked(slot, ErrorCode::TransferFailed, o.error);
      }
    }
    if (tracer_ && tracer_->enabled()) {
      trace(EventKind::TransferDone, o.handle, o.bytes_transferred,
            o.direction == Direction::SwapIn ? (o.ok() ? "in" : "in failed") : (o.ok() ? "out" : "out failed"), true,
            o.started_ns ? tracer_->to_trace_time(o.started_ns) : 0);
    }
  }
  cv_.notify_all();
  return true;
}

void Manager::fail_locked(std::uint32_t slot, ErrorCode code, std::string message) {
  failures_[slot] = Failure{code, std::move(message)};
  cv_.notify_all();
}

bool Manager::pump_locked() {
  bool progress = false;
  auto pending = [&](HandleId id) {
    return is_current(id) && blocks_[id.slot()].queued && blocks_[id.slot()].state == BlockState::Swapped;
  };

  while (!demand_.empty()) {
    auto id = demand_.front();
    if (!pending(id)) {
      demand_.pop_front();
      continue;
    }
    auto r = start_swap_in_locked(id, true);
    if (r == Start::Started || r == Start::Failed) {
      demand_.pop_front();
      progress = true;
      continue;
    }
    return progress || r == Start::Evicting;
  }

  while (!prefetch_.empty()) {
    auto id = prefetch_.front();
    if (!pending(id)) {
      prefetch_.pop_front();
      continue;
    }
    auto r = start_swap_in_locked(id, false);
    if (r == Start::Started || r == Start::Failed) {
      prefetch_.pop_front();
      progress = true;
      continue;
    }
    return progress || r == Start::Evicting;
  }
  return progress;
}

Manager::Start Manager::start_swap_in_locked(HandleId id, bool demand) {
  auto slot = id.slot();
  auto& b = blocks_[slot];
  auto led = engine_->ledger();

  auto give_up = [&](ErrorCode code, std::string message) {
    b.queued = 0;
    strategy_->demote(id);
    if (demand) {
      fail_locked(slot, code, std::move(message));
    } else {
      ++stats_.prefetches_abandoned;
    }
    return Start::Failed;
  };

  if (led.headroom() >= b.bytes) {
    auto* buffer = new std::byte[b.bytes];
    try {
      store_->load(id, std::span<std::byte>(buffer, b.bytes));
    } catch (const Error& e) {
      delete[] buffer;
      if (e.code() == ErrorCode::RamReservationFailed) return Start::Waiting;
      return give_up(e.code(), e.what());
    }
    b.data = buffer;
    b.state = BlockState::SwappingIn;
    b.queued = 0;
    if (!demand) ++stats_.prefetches_issued;
    trace(demand ? EventKind::LoadSubmit : EventKind::PrefetchIssue, id, b.bytes, {}, true);
    return Start::Started;
  }

  auto deficit = b.bytes - led.headroom();
  if (led.freeing_soon() >= deficit) return Start::Waiting;

  auto evictable = [this](HandleId h) {
    const auto& v = blocks_[h.slot()];
    return v.pins == 0 && resident(v.state);
  };
  std::vector<HandleId> victims;
  try {
    victims = strategy_->make_room(deficit - led.freeing_soon(), evictable);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientEvictableBytes) throw;
    return demand ? Start::Waiting : give_up(e.code(), e.what());
  }
  try {
    evict_locked(victims);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::OutOfSwapSpace) throw;
    return give_up(e.code(), e.what());
  }
  return Start::Evicting;
}

void Manager::miss_locked(std::uint32_t slot) {
  auto id = id_of(slot);
  auto& b = blocks_[slot];
  ++stats_.misses;
  trace(EventKind::Miss, id, b.bytes);

  auto evictable = [this](HandleId h) {
    const auto& v = blocks_[h.slot()];
    return v.pins == 0 && resident(v.state);
  };
  if (strategy_->prefetch_enabled()) {
    if (auto bytes = strategy_->evaluate_decay(); bytes > 0) {
      auto victims = strategy_->decay(bytes, evictable);
      if (!victims.empty()) {
        stats_.decayed += victims.size();
        trace(EventKind::Decay, std::nullopt, bytes);
        evict_locked(victims);
      }
    }
  }

  auto plan = strategy_->plan_swap_in(id, [this](HandleId h) {
    const auto& v = blocks_[h.slot()];
    return v.state == BlockState::Swapped && !v.queued && !v.wanted && !v.dying;
  });
  b.queued = 1;
  demand_.push_back(id);
  for (std::size_t i = 1; i < plan.size(); ++i) {
    blocks_[plan[i].slot()].queued = 1;
    prefetch_.push_back(plan[i]);
  }
}

void Manager::evict_locked(const std::vector<HandleId>& victims) {
  std::vector<HandleId> dirty;
  for (auto id : victims) {
    auto& b = blocks_[id.slot()];
    if (!store_->has_copy(id)) {
      dirty.push_back(id);
      continue;
    }
    store_->store(id, std::span<const std::byte>(b.data, b.bytes), true);
    b.state = BlockState::SwappingOut;
    ++stats_.evictions;
    trace(EventKind::Evict, id, 0, "clean");
  }
  for (std::size_t i = 0; i < dirty.size(); ++i) {
    auto id = dirty[i];
    auto& b = blocks_[id.slot()];
    try {
      store_->store(id, std::span<const std::byte>(b.data, b.bytes), false);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SwapFull) throw;
      for (std::size_t j = dirty.size(); j-- > i;) strategy_->reinstate(dirty[j]);
      raise(ErrorCode::OutOfSwapSpace, e.what());
    }
    b.state = BlockState::SwappingOut;
    ++stats_.evictions;
    trace(EventKind::Evict, id, b.bytes, "dirty");
    trace(EventKind::StoreSubmit, id, b.bytes, {}, true);
  }
}

// ---- public operations ----

HandleId Manager::create(std::uint64_t element_count, std::uint64_t element_size, std::span<const std::byte> fill,
                         std::optional<HandleId> parent) {
  if (element_count == 0 || element_size == 0)
    raise(ErrorCode::InvalidArgument, "element count and size must be positive");
  if (element_size > std::numeric_limits<std::uint32_t>::max())
    raise(ErrorCode::InvalidArgument, "element size above 4 GiB");
  if (element_count > std::numeric_limits<std::uint64_t>::max() / element_size ||
      element_count * element_size > config_.ram_limit_bytes)
    raise(ErrorCode::SizeExceedsRamLimit, "block of " + std::to_string(element_count) + " x " +
                                              std::to_string(element_size) + " bytes exceeds the RAM limit of " +
                                              std::to_string(config_.ram_limit_bytes));
  if (!fill.empty() && fill.size() != element_size)
    raise(ErrorCode::InvalidArgument, "fill pattern must be one element long");
  const std::uint64_t bytes = element_count * element_size;

  DomainLock dl(mutex_);
  auto& lock = dl.lock;
  if (parent) block_locked(*parent);

  auto evictable = [this](HandleId h) {
    const auto& v = blocks_[h.slot()];
    return v.pins == 0 && resident(v.state);
  };
  bool waited = false;
  for (;;) {
    settle_locked();
    if (pinned_bytes_ + bytes > config_.ram_limit_bytes) {
      if (!overcommit_)
        raise(ErrorCode::OutOfMemoryRequest, "pinned blocks leave no room for " + std::to_string(bytes) + " bytes");
    } else if (engine_->try_reserve_resident(bytes)) {
      break;
    } else {
      auto led = engine_->ledger();
      auto deficit = bytes - led.headroom();
      if (led.freeing_soon() < deficit) {
        try {
          evict_locked(strategy_->make_room(deficit - led.freeing_soon(), evictable));
          continue;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InsufficientEvictableBytes) throw;
        }
      }
    }
    if (!waited) trace(EventKind::Blocked, std::nullopt, bytes, "create");
    waited = true;
    cv_.wait(lock);
  }
  if (waited) trace(EventKind::Unblocked, std::nullopt, bytes, "create");

  std::uint32_t slot;
  if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(blocks_.size());
    blocks_.emplace_back();
  }
  auto& b = blocks_[slot];
  std::byte* data = nullptr;
  try {
    data = new std::byte[bytes];
  } catch (const std::bad_alloc&) {
    free_slots_.push_back(slot);
    engine_->release_resident(bytes);
    throw;
  }
  if (fill.empty()) {
    std::memset(data, 0, bytes);
  } else {
    for (std::uint64_t off = 0; off < bytes; off += element_size) std::memcpy(data + off, fill.data(), element_size);
  }

  auto generation = b.generation;
  b = Block{};
  b.generation = generation;
  b.data = data;
  b.bytes = bytes;
  b.element_size = static_cast<std::uint32_t>(element_size);
  b.state = BlockState::Resident;
  b.live = 1;
  auto id = HandleId::make(slot, generation);
  strategy_->register_handle(id, bytes);
  if (parent) {
    b.parent = parent->slot();
    children_[parent->slot()].push_back(id);
  }
  ++live_count_;
  trace(EventKind::Create, id, bytes, {}, true);
  return id;
}

HandleId Manager::create_multi(std::span<const std::uint64_t> dims, std::uint64_t element_size,
                               std::span<const std::byte> fill, std::optional<HandleId> parent) {
  if (dims.empty()) raise(ErrorCode::InvalidArgument, "no dimensions");
  if (dims.size() == 1) return create(dims[0], element_size, fill, parent);
  auto outer = create(dims[0], sizeof(HandleId), {}, parent);
  std::vector<HandleId> inner;
  inner.reserve(dims[0]);
  try {
    for (std::uint64_t i = 0; i < dims[0]; ++i) inner.push_back(create_multi(dims.subspan(1), element_size, fill, outer));
    auto g = adhere(outer, AccessMode::ReadWrite, Loading::Immediate);
    auto v = g.pull();
    std::memcpy(v.mutable_data(), inner.data(), inner.size() * sizeof(HandleId));
  } catch (...) {
    destroy(outer);
    throw;
  }
  return outer;
}

void Manager::destroy(HandleId id) {
  DomainLock dl(mutex_);
  block_locked(id);

  // Children first, youngest first; refuse before touching anything.
  std::vector<HandleId> order;
  auto collect = [&](auto&& self, HandleId h) -> void {
    if (auto it = children_.find(h.slot()); it != children_.end())
      for (auto c = it->second.rbegin(); c != it->second.rend(); ++c) self(self, *c);
    order.push_back(h);
  };
  collect(collect, id);
  for (auto h : order)
    if (blocks_[h.slot()].adherence > 0) raise(ErrorCode::HandleStillAdhered, to_string(h) + " has living guards");

  for (auto h : order) blocks_[h.slot()].dying = 1;
  for (auto h : order) destroy_one(dl.lock, h);
  cv_.notify_all();
}

void Manager::destroy_one(std::unique_lock<std::mutex>& lock, HandleId id) {
  auto slot = id.slot();
  for (;;) {
    settle_locked();
    auto s = blocks_[slot].state;
    if (s != BlockState::SwappingIn && s != BlockState::SwappingOut) break;
    cv_.wait(lock);
  }
  auto& b = blocks_[slot];
  if (b.data) {
    delete[] b.data;
    b.data = nullptr;
    engine_->release_resident(b.bytes);
  }
  store_->discard(id);
  strategy_->unregister_handle(id);
  failures_.erase(slot);
  children_.erase(slot);
  if (b.parent != kNone) {
    auto it = children_.find(b.parent);
    if (it != children_.end()) {
      auto& v = it->second;
      v.erase(std::remove(v.begin(), v.end(), id), v.end());
      if (v.empty()) children_.erase(it);
    }
  }
  trace(EventKind::Destroy, id, b.bytes, {}, true);
  auto generation = b.generation + 1;
  b = Block{};
  b.generation = generation;
  free_slots_.push_back(slot);
  --live_count_;
}

Guard Manager::adhere(HandleId id, AccessMode mode, Loading loading) {
  DomainLock dl(mutex_);
  auto& b = block_locked(id);
  ++b.adherence;
  trace(EventKind::Adhere, id, b.bytes, loading == Loading::Immediate ? "immediate" : "deferred");
  if (loading == Loading::Immediate) {
    pin_locked(b);
    if (b.state == BlockState::Swapped && !b.queued) {
      miss_locked(id.slot());
      settle_locked();
    } else if (b.state == BlockState::SwappingOut) {
      b.wanted = 1;
    } else if (b.state == BlockState::Swapped && b.queued) {
      demand_.push_back(id);
      settle_locked();
    }
  }
  return Guard(this, id, mode, loading);
}

View Manager::pull(Guard& guard) {
  DomainLock dl(mutex_);
  auto& lock = dl.lock;
  auto id = guard.id_;
  block_locked(id);
  auto slot = id.slot();
  bool self_pin = guard.loading_ == Loading::Immediate;
  bool waited = false;

  // Budget of pinned data.
  for (;;) {
    const auto& b = blocks_[slot];
    std::uint64_t others = pinned_bytes_ - (b.pins > 0 ? b.bytes : 0);
    if (others + b.bytes <= config_.ram_limit_bytes) break;
    if (!overcommit_)
      raise(ErrorCode::OutOfMemoryRequest, "pulling " + std::to_string(b.bytes) + " bytes with " +
                                               std::to_string(others) + " bytes pinned exceeds the RAM limit");
    if (!waited) {
      ++stats_.blocked_pulls;
      trace(EventKind::Blocked, id, b.bytes, "overcommit");
    }
    waited = true;
    cv_.wait(lock);
  }
  if (!self_pin) pin_locked(blocks_[slot]);

  // Residency.
  bool waited_io = false;
  try {
    for (;;) {
      settle_locked();
      auto& b = blocks_[slot];
      if (auto it = failures_.find(slot); it != failures_.end()) {
        auto f = std::move(it->second);
        failures_.erase(it);
        raise(f.code, f.message);
      }
      if (resident(b.state)) break;
      if (b.state == BlockState::Swapped) {
        if (!b.queued) {
          miss_locked(slot);
          continue;
        }
        if (std::find(demand_.begin(), demand_.end(), id) == demand_.end()) {
          demand_.push_back(id);
          continue;
        }
      } else if (b.state == BlockState::SwappingOut) {
        b.wanted = 1;
      }
      if (!waited_io) {
        if (!waited) ++stats_.blocked_pulls;
        trace(EventKind::Blocked, id, b.bytes, "io");
      }
      waited = waited_io = true;
      cv_.wait(lock);
    }
  } catch (...) {
    if (!self_pin) unpin_locked(blocks_[slot]);
    cv_.notify_all();
    throw;
  }
  if (waited) trace(EventKind::Unblocked, id, blocks_[slot].bytes);

  auto& b = blocks_[slot];
  bool was_preemptive = strategy_->zone(id) == Zone::Preemptive;
  strategy_->touch(id);
  if (was_preemptive) {
    ++stats_.preemptive_hits;
    trace(EventKind::PreemptiveHit, id, b.bytes);
  }
  b.state = BlockState::Resident;
  if (guard.mode_ == AccessMode::ReadWrite) {
    store_->discard(id);
  } else if (store_->has_copy(id)) {
    store_->set_cached(id, true);
  }
  trace(EventKind::Pull, id, b.bytes, guard.mode_ == AccessMode::ReadWrite ? "rw" : "ro");

  guard.pulled_ = true;
  guard.view_ = View(b.data, b.bytes, guard.mode_ == AccessMode::ReadWrite);
  return guard.view_;
}

void Manager::release(Guard& guard) noexcept {
  DomainLock dl(mutex_);
  if (!is_current(guard.id_)) return;
  auto& b = blocks_[guard.id_.slot()];
  if (b.adherence == 0) return;
  --b.adherence;
  if (guard.pulled_ || guard.loading_ == Loading::Immediate) unpin_locked(b);
  trace(EventKind::Release, guard.id_, b.bytes);
  try {
    settle_locked();
  } catch (...) {
    // Completions are retried by the next caller.
  }
  cv_.notify_all();
}

std::vector<View> Manager::pull_group(std::span<Guard* const> guards) {
  std::vector<HandleId> ids;
  {
    DomainLock dl(mutex_);
    std::uint64_t total = 0;
    for (auto* g : guards) {
      if (g == nullptr || !g->active()) raise(ErrorCode::InvalidArgument, "inactive guard in group");
      if (std::find(ids.begin(), ids.end(), g->id_) != ids.end()) continue;
      ids.push_back(g->id_);
      total += block_locked(g->id_).bytes;
    }
    if (total > config_.ram_limit_bytes)
      raise(ErrorCode::GroupExceedsRamLimit, "group of " + std::to_string(total) + " bytes exceeds the RAM limit");
  }
  std::lock_guard group(g_group_mutex);
  std::vector<View> views;
  views.reserve(guards.size());
  for (auto* g : guards) views.push_back(g->pull());
  return views;
}

void Manager::set_overcommit(bool enabled) {
  DomainLock dl(mutex_);
  overcommit_ = enabled;
  cv_.notify_all();
}

bool Manager::overcommit() const {
  DomainLock dl(mutex_);
  return overcommit_;
}

void Manager::set_preemptive(bool enabled) {
  DomainLock dl(mutex_);
  strategy_->set_prefetch_enabled(enabled);
}

bool Manager::preemptive() const {
  DomainLock dl(mutex_);
  return strategy_->prefetch_enabled();
}

void Manager::set_swap_prompt(ExtendPrompt prompt) {
  DomainLock dl(mutex_);
  store_->set_prompt(std::move(prompt));
}

bool Manager::evict(HandleId id) {
  DomainLock dl(mutex_);
  auto& b = block_locked(id);
  settle_locked();
  if (b.pins > 0 || !resident(b.state)) return false;
  strategy_->demote(id);
  evict_locked({id});
  settle_locked();
  return true;
}

void Manager::wait_idle() {
  DomainLock dl(mutex_);
  for (;;) {
    settle_locked();
    if (engine_->in_flight_count() == 0 && demand_.empty() && prefetch_.empty()) {
      // A finished transfer may still sit unpolled.
      if (!drain_locked()) return;
      continue;
    }
    cv_.wait(dl.lock);
  }
}

void Manager::pause_transfers() { engine_->pause(); }

void Manager::resume_transfers() { engine_->resume(); }

// ---- queries ----

BlockState Manager::state(HandleId id) const {
  DomainLock dl(mutex_);
  return block_locked(id).state;
}

bool Manager::dirty(HandleId id) const {
  DomainLock dl(mutex_);
  block_locked(id);
  return !store_->has_copy(id);
}

bool Manager::has_disk_copy(HandleId id) const {
  DomainLock dl(mutex_);
  block_locked(id);
  return store_->has_copy(id);
}

std::uint32_t Manager::adherence(HandleId id) const {
  DomainLock dl(mutex_);
  return block_locked(id).adherence;
}

std::uint64_t Manager::size_of(HandleId id) const {
  DomainLock dl(mutex_);
  return block_locked(id).bytes;
}

std::uint64_t Manager::element_count(HandleId id) const {
  DomainLock dl(mutex_);
  const auto& b = block_locked(id);
  return b.bytes / b.element_size;
}

std::optional<HandleId> Manager::parent(HandleId id) const {
  DomainLock dl(mutex_);
  const auto& b = block_locked(id);
  if (b.parent == kNone) return std::nullopt;
  return id_of(b.parent);
}

std::vector<HandleId> Manager::children(HandleId id) const {
  DomainLock dl(mutex_);
  block_locked(id);
  auto it = children_.find(id.slot());
  return it == children_.end() ? std::vector<HandleId>{} : it->second;
}

bool Manager::contains(HandleId id) const {
  DomainLock dl(mutex_);
  return is_current(id) && !blocks_[id.slot()].dying;
}

std::size_t Manager::block_count() const {
  DomainLock dl(mutex_);
  return live_count_;
}

std::uint64_t Manager::pinned_bytes() const {
  DomainLock dl(mutex_);
  return pinned_bytes_;
}

BudgetSnapshot Manager::snapshot() const {
  DomainLock dl(mutex_);
  return snapshot_locked();
}

BudgetLedger Manager::ledger() const { return engine_->ledger(); }

ManagerStats Manager::stats() const {
  DomainLock dl(mutex_);
  auto s = stats_;
  auto led = engine_->ledger();
  s.bytes_written = store_->bytes_written();
  s.bytes_read = store_->bytes_read();
  s.peak_resident_bytes = led.peak_committed();
  s.budget_violations = led.violations();
  return s;
}

}  // namespace oocmem
