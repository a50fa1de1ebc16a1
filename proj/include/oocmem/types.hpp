#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace oocmem {

/// Identifies one managed block. The low half is a dense slot index reused
/// after destruction; the high half is a generation counter so stale ids are
/// rejected instead of aliasing a newer block.
struct HandleId {
  std::uint64_t value = 0;

  static constexpr HandleId make(std::uint32_t slot, std::uint32_t generation) {
    return HandleId{(std::uint64_t{generation} << 32) | slot};
  }
  constexpr std::uint32_t slot() const { return static_cast<std::uint32_t>(value); }
  constexpr std::uint32_t generation() const { return static_cast<std::uint32_t>(value >> 32); }

  friend constexpr auto operator<=>(HandleId, HandleId) = default;
};

std::string to_string(HandleId id);

enum class BlockState : std::uint8_t {
  Resident,
  PreemptiveResident,
  Swapped,
  SwappingIn,
  SwappingOut,
};

enum class AccessMode : std::uint8_t { ReadOnly, ReadWrite };
enum class Loading : std::uint8_t { Immediate, Deferred };

enum class SwapPolicy : std::uint8_t { Fail, Interactive, AutoExtend };

/// A contiguous region of one swap file.
struct ChunkSpan {
  std::uint32_t file_index = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  std::uint64_t end() const { return offset + length; }
  friend bool operator==(const ChunkSpan&, const ChunkSpan&) = default;
};

std::string to_string(const ChunkSpan& span);
std::string_view to_string(BlockState state);

}  // namespace oocmem

template <>
struct std::hash<oocmem::HandleId> {
  std::size_t operator()(oocmem::HandleId id) const noexcept { return std::hash<std::uint64_t>{}(id.value); }
};
