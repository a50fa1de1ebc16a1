#include "oocmem/dummy_strategy.hpp"

#include "oocmem/error.hpp"

namespace oocmem {

DummyStrategy::Entry& DummyStrategy::at(HandleId id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) raise(ErrorCode::UnknownHandle, "strategy does not know " + to_string(id));
  return it->second;
}

void DummyStrategy::register_handle(HandleId id, std::uint64_t bytes) {
  if (entries_.count(id)) raise(ErrorCode::DuplicateRegistration, to_string(id) + " is already registered");
  auto seq = next_seq_++;
  entries_.emplace(id, Entry{bytes, seq, Zone::Active});
  order_.emplace(seq, id);
}

void DummyStrategy::unregister_handle(HandleId id) {
  auto& e = at(id);
  order_.erase(e.seq);
  entries_.erase(id);
}

void DummyStrategy::touch(HandleId id) {
  if (at(id).zone == Zone::Swapped) raise(ErrorCode::NotResident, to_string(id) + " is swapped out");
}

std::vector<HandleId> DummyStrategy::make_room(std::uint64_t bytes, const Filter& evictable) {
  std::vector<HandleId> victims;
  if (bytes == 0) return victims;
  std::uint64_t sum = 0;
  for (const auto& [seq, id] : order_) {
    const auto& e = entries_.at(id);
    if (e.zone != Zone::Active || (evictable && !evictable(id))) continue;
    victims.push_back(id);
    sum += e.bytes;
    if (sum >= bytes) break;
  }
  if (sum < bytes)
    raise(ErrorCode::InsufficientEvictableBytes,
          "need " + std::to_string(bytes) + " bytes, only " + std::to_string(sum) + " are evictable");
  for (auto id : victims) entries_.at(id).zone = Zone::Swapped;
  return victims;
}

std::vector<HandleId> DummyStrategy::plan_swap_in(HandleId id, const Filter&) {
  auto& e = at(id);
  if (e.zone != Zone::Swapped) raise(ErrorCode::NotSwapped, to_string(id) + " is not swapped out");
  e.zone = Zone::Active;
  return {id};
}

void DummyStrategy::demote(HandleId id) { at(id).zone = Zone::Swapped; }
void DummyStrategy::reinstate(HandleId id) { at(id).zone = Zone::Active; }

Zone DummyStrategy::zone(HandleId id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) raise(ErrorCode::UnknownHandle, "strategy does not know " + to_string(id));
  return it->second.zone;
}

}  // namespace oocmem
