#include "oocmem/cyclic_strategy.hpp"

#include <algorithm>
#include <cmath>

#include "oocmem/error.hpp"

namespace oocmem {

std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::Active: return "active";
    case Zone::Preemptive: return "preemptive";
    case Zone::Swapped: return "swapped";
  }
  return "?";
}

std::uint64_t decay_bytes(std::uint64_t budget, std::uint64_t ram_limit, std::uint32_t hits,
                          double significance, std::uint64_t used) {
  if (ram_limit == 0) return 0;
  double p = static_cast<double>(budget) / static_cast<double>(ram_limit);
  double value = 1.0;
  for (std::uint32_t i = 0; i < hits && value > 0.0; ++i) value *= p;
  bool below = value < significance && (significance - value) > 1e-12 * significance;
  if (!below) return 0;
  std::uint64_t free = budget > used ? budget - used : 0;
  return std::max<std::uint64_t>(2 * free, 1);
}

CyclicStrategy::CyclicStrategy(std::uint64_t preemptive_budget, std::uint64_t ram_limit, double significance)
    : budget_(preemptive_budget), ram_limit_(ram_limit), significance_(significance) {}

std::uint32_t CyclicStrategy::slot_of(HandleId id) const {
  auto s = id.slot();
  if (s >= nodes_.size() || !nodes_[s].live || nodes_[s].generation != id.generation())
    raise(ErrorCode::UnknownHandle, "strategy does not know " + to_string(id));
  return s;
}

void CyclicStrategy::link(std::uint32_t a, std::uint32_t b) {
  nodes_[a].next = b;
  nodes_[b].prev = a;
}

void CyclicStrategy::unlink(std::uint32_t s) {
  link(nodes_[s].prev, nodes_[s].next);
  nodes_[s].next = nodes_[s].prev = kNil;
}

void CyclicStrategy::insert_before(std::uint32_t s, std::uint32_t pos) {
  auto p = nodes_[pos].prev;
  link(p, s);
  link(s, pos);
}

void CyclicStrategy::lay_out(const std::vector<std::uint32_t>& seq, std::uint32_t before, std::uint32_t after) {
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) link(seq[i], seq[i + 1]);
  if (before == kNil) {
    link(seq.back(), seq.front());
  } else {
    link(before, seq.front());
    link(seq.back(), after);
  }
}

std::uint32_t CyclicStrategy::preemptive_head() const {
  if (size_ == 0) return kNil;
  auto tail = nodes_[active_].prev;
  if (nodes_[tail].zone != Zone::Preemptive) return kNil;
  if (nodes_[active_].zone == Zone::Preemptive) return active_;
  auto cur = tail;
  while (nodes_[nodes_[cur].prev].zone == Zone::Preemptive) cur = nodes_[cur].prev;
  return cur;
}

void CyclicStrategy::register_handle(HandleId id, std::uint64_t bytes) {
  auto s = id.slot();
  if (s >= nodes_.size()) nodes_.resize(s + 1);
  auto& n = nodes_[s];
  if (n.live) raise(ErrorCode::DuplicateRegistration, to_string(id) + " is already registered");
  n = Node{};
  n.generation = id.generation();
  n.live = true;
  n.bytes = bytes;
  n.zone = Zone::Active;
  if (size_ == 0) {
    n.next = n.prev = s;
    active_ = counter_ = s;
  } else {
    insert_before(s, active_);
    active_ = s;
    if (counter_ == kNil) counter_ = s;
  }
  ++size_;
}

void CyclicStrategy::unregister_handle(HandleId id) {
  auto s = slot_of(id);
  auto& n = nodes_[s];
  if (size_ == 1) {
    active_ = counter_ = kNil;
  } else {
    if (s == active_) {
      if (s == counter_) counter_ = kNil;
      active_ = n.next;
    } else if (s == counter_) {
      counter_ = n.prev;
    }
    unlink(s);
  }
  if (n.zone == Zone::Preemptive) used_ -= n.bytes;
  n.live = false;
  n.next = n.prev = kNil;
  --size_;
}

void CyclicStrategy::touch(HandleId id) {
  auto s = slot_of(id);
  auto& n = nodes_[s];
  if (n.zone == Zone::Swapped) raise(ErrorCode::NotResident, to_string(id) + " is swapped out");

  if (s != active_) {
    if (s == counter_) counter_ = n.prev;
    if (s != nodes_[active_].prev) {
      unlink(s);
      insert_before(s, active_);
      ++relinks_;
    }
    active_ = s;
  }

  if (n.zone == Zone::Preemptive) {
    n.zone = Zone::Active;
    used_ -= n.bytes;
    ++hits_;
    if (counter_ == kNil) counter_ = s;
  }
}

CyclicStrategy::Pick CyclicStrategy::pick_preemptive(std::uint64_t bytes, const Filter& evictable) const {
  Pick pick;
  auto head = preemptive_head();
  if (head == kNil || bytes == 0) return pick;
  auto cur = head;
  do {
    bool take = accepts(evictable, cur);
    pick.segment.push_back(cur);
    pick.victim.push_back(take);
    if (take) pick.bytes += nodes_[cur].bytes;
    cur = nodes_[cur].next;
  } while (pick.bytes < bytes && cur != head && nodes_[cur].zone == Zone::Preemptive);
  return pick;
}

// Victims go to the swapped tail, which sits right before the first
// prefetched node.
void CyclicStrategy::drop_preemptive(const Pick& pick, std::vector<HandleId>& out) {
  if (pick.bytes == 0) return;
  std::vector<std::uint32_t> order;
  order.reserve(pick.segment.size());
  for (std::size_t i = 0; i < pick.segment.size(); ++i)
    if (pick.victim[i]) order.push_back(pick.segment[i]);
  auto first_kept = order.size();
  for (std::size_t i = 0; i < pick.segment.size(); ++i)
    if (!pick.victim[i]) order.push_back(pick.segment[i]);

  bool whole = pick.segment.size() == size_;
  bool had_active = std::find(pick.segment.begin(), pick.segment.end(), active_) != pick.segment.end();
  if (first_kept != 0 && first_kept != order.size()) {
    auto before = whole ? kNil : nodes_[pick.segment.front()].prev;
    auto after = whole ? kNil : nodes_[pick.segment.back()].next;
    lay_out(order, before, after);
  }
  for (std::size_t i = 0; i < first_kept; ++i) {
    auto& n = nodes_[order[i]];
    n.zone = Zone::Swapped;
    used_ -= n.bytes;
    out.push_back(id_of(order[i]));
  }
  if (had_active) active_ = order.front();
}

std::vector<HandleId> CyclicStrategy::make_room(std::uint64_t bytes, const Filter& evictable) {
  std::vector<HandleId> victims;
  if (bytes == 0) return victims;

  // Resident run, from counteractive towards active.
  std::vector<std::uint32_t> visited;
  std::vector<bool> take;
  std::uint64_t sum = 0;
  if (counter_ != kNil) {
    auto cur = counter_;
    for (;;) {
      bool t = accepts(evictable, cur);
      visited.push_back(cur);
      take.push_back(t);
      if (t) sum += nodes_[cur].bytes;
      if (sum >= bytes || cur == active_) break;
      cur = nodes_[cur].prev;
    }
  }
  Pick pre;
  if (sum < bytes) {
    pre = pick_preemptive(bytes - sum, evictable);
    sum += pre.bytes;
  }
  if (sum < bytes)
    raise(ErrorCode::InsufficientEvictableBytes,
          "need " + std::to_string(bytes) + " bytes, only " + std::to_string(sum) + " are evictable");

  std::vector<std::uint32_t> kept, gone;
  for (std::size_t i = visited.size(); i-- > 0;) (take[i] ? gone : kept).push_back(visited[i]);
  for (std::size_t i = 0; i < visited.size(); ++i)
    if (take[i]) victims.push_back(id_of(visited[i]));

  if (!gone.empty()) {
    auto front = visited.back();
    bool from_active = front == active_;
    bool whole = visited.size() == size_;
    auto before = whole ? kNil : nodes_[front].prev;
    auto after = whole ? kNil : nodes_[counter_].next;
    std::vector<std::uint32_t> order = kept;
    order.insert(order.end(), gone.begin(), gone.end());
    if (!kept.empty()) lay_out(order, before, after);
    for (auto s : gone) nodes_[s].zone = Zone::Swapped;
    if (from_active) {
      active_ = kept.empty() ? gone.front() : kept.front();
      counter_ = kept.empty() ? kNil : kept.back();
    } else {
      counter_ = kept.empty() ? before : kept.back();
    }
  }
  drop_preemptive(pre, victims);
  return victims;
}

std::vector<HandleId> CyclicStrategy::plan_swap_in(HandleId id, const Filter& prefetchable) {
  auto s = slot_of(id);
  if (nodes_[s].zone != Zone::Swapped) raise(ErrorCode::NotSwapped, to_string(id) + " is not swapped out");

  std::vector<std::uint32_t> chain{s};
  std::uint64_t added = 0;
  if (prefetch_) {
    for (auto cur = nodes_[s].prev; cur != s && nodes_[cur].zone == Zone::Swapped; cur = nodes_[cur].prev) {
      if (!accepts(prefetchable, cur)) break;
      if (used_ + added + nodes_[cur].bytes > budget_) break;
      chain.push_back(cur);
      added += nodes_[cur].bytes;
    }
  }

  if (std::find(chain.begin(), chain.end(), active_) == chain.end()) {
    // chain.back() is the forward-most node of the segment, s the last.
    link(nodes_[chain.back()].prev, nodes_[s].next);
    std::vector<std::uint32_t> segment(chain.rbegin(), chain.rend());
    auto before = nodes_[active_].prev;
    lay_out(segment, before, active_);
  }

  active_ = s;
  nodes_[s].zone = Zone::Active;
  if (counter_ == kNil) counter_ = s;
  std::vector<HandleId> plan;
  plan.reserve(chain.size());
  for (auto c : chain) {
    if (c != s) nodes_[c].zone = Zone::Preemptive;
    plan.push_back(id_of(c));
  }
  used_ += added;
  hits_ = 0;
  return plan;
}

std::uint64_t CyclicStrategy::evaluate_decay() const {
  return decay_bytes(budget_, ram_limit_, hits_, significance_, used_);
}

std::vector<HandleId> CyclicStrategy::decay(std::uint64_t bytes, const Filter& evictable) {
  std::vector<HandleId> victims;
  drop_preemptive(pick_preemptive(bytes, evictable), victims);
  return victims;
}

void CyclicStrategy::demote(HandleId id) {
  auto s = slot_of(id);
  auto& n = nodes_[s];
  switch (n.zone) {
    case Zone::Swapped:
      return;
    case Zone::Preemptive: {
      auto head = preemptive_head();
      if (s != head) {
        unlink(s);
        bool head_was_active = head == active_;
        insert_before(s, head);
        if (head_was_active) active_ = s;
      }
      n.zone = Zone::Swapped;
      used_ -= n.bytes;
      return;
    }
    case Zone::Active:
      if (s == counter_) {
        counter_ = s == active_ ? kNil : n.prev;
      } else {
        if (s == active_) active_ = n.next;
        auto target = nodes_[counter_].next;
        unlink(s);
        insert_before(s, target);
      }
      n.zone = Zone::Swapped;
      return;
  }
}

void CyclicStrategy::reinstate(HandleId id) {
  auto s = slot_of(id);
  auto& n = nodes_[s];
  if (n.zone != Zone::Swapped) return;
  if (counter_ == kNil) {
    if (s != active_) {
      unlink(s);
      insert_before(s, active_);
      active_ = s;
    }
  } else if (nodes_[counter_].next != s) {
    auto target = nodes_[counter_].next;
    unlink(s);
    insert_before(s, target);
  }
  n.zone = Zone::Active;
  counter_ = s;
}

Zone CyclicStrategy::zone(HandleId id) const { return nodes_[slot_of(id)].zone; }

bool CyclicStrategy::contains(HandleId id) const {
  auto s = id.slot();
  return s < nodes_.size() && nodes_[s].live && nodes_[s].generation == id.generation();
}

std::optional<HandleId> CyclicStrategy::active() const {
  if (active_ == kNil) return std::nullopt;
  return id_of(active_);
}

std::optional<HandleId> CyclicStrategy::counteractive() const {
  if (counter_ == kNil) return std::nullopt;
  return id_of(counter_);
}

std::vector<HandleId> CyclicStrategy::forward_order() const {
  std::vector<HandleId> out;
  if (active_ == kNil) return out;
  auto cur = active_;
  do {
    out.push_back(id_of(cur));
    cur = nodes_[cur].next;
  } while (cur != active_ && out.size() <= size_);
  return out;
}

std::string CyclicStrategy::check_invariants() const {
  if (size_ == 0) {
    if (active_ != kNil || counter_ != kNil) return "empty list with cursors set";
    if (used_ != 0) return "empty list with preemptive bytes";
    return {};
  }
  if (active_ == kNil || active_ >= nodes_.size() || !nodes_[active_].live) return "bad active cursor";

  std::size_t count = 0;
  std::uint64_t pre = 0;
  std::uint32_t last_active = kNil;
  int phase = 0;  // 0 resident, 1 swapped, 2 prefetched
  auto cur = active_;
  do {
    const auto& n = nodes_[cur];
    if (!n.live) return "dead node " + std::to_string(cur) + " in cycle";
    if (n.next >= nodes_.size() || nodes_[n.next].prev != cur)
      return "next/prev mismatch at " + std::to_string(cur);
    int p = n.zone == Zone::Active ? 0 : n.zone == Zone::Swapped ? 1 : 2;
    if (p < phase) return "zone order broken at " + std::to_string(cur);
    phase = p;
    if (n.zone == Zone::Active) last_active = cur;
    if (n.zone == Zone::Preemptive) pre += n.bytes;
    cur = n.next;
    if (++count > size_) return "cycle longer than size";
  } while (cur != active_);
  if (count != size_) return "cycle of " + std::to_string(count) + " nodes, size " + std::to_string(size_);

  std::size_t live = 0;
  for (const auto& n : nodes_) live += n.live;
  if (live != size_) return "live nodes outside the cycle";
  if (counter_ != last_active) return "counteractive is not the last resident node";
  if (pre != used_) return "preemptive bytes " + std::to_string(pre) + " but used " + std::to_string(used_);
  if (used_ > budget_) return "preemptive budget exceeded";
  return {};
}

}  // namespace oocmem
