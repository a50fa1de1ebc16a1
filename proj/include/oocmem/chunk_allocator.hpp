#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "oocmem/types.hpp"

namespace oocmem {

/// First-fit free-list allocator over a set of equally addressable files.
///
/// Free space is kept per file as an offset-ordered, fully coalesced map.
/// Allocated regions are not recorded individually; whatever is not free is
/// allocated. That keeps the per-block metadata to the spans its owner holds.
class ChunkAllocator {
 public:
  /// Adds a file of `size` bytes, entirely free. Returns its index.
  std::uint32_t add_file(std::uint64_t size);

  /// Stage 1 (single first-fit span) then stage 2 (greedy split across gaps
  /// in scan order). Returns nullopt without side effects when the free
  /// total is too small.
  std::optional<std::vector<ChunkSpan>> allocate(std::uint64_t bytes);

  /// Returns spans to the free list, coalescing with neighbours. Throws
  /// UnknownSpan for spans outside any file or of zero length, DoubleFree
  /// for spans overlapping free space. Validates all spans before freeing.
  void free(std::span<const ChunkSpan> spans);

  std::uint32_t file_count() const { return static_cast<std::uint32_t>(files_.size()); }
  std::uint64_t file_size(std::uint32_t file) const { return files_.at(file).size; }
  std::uint64_t provisioned_bytes() const { return provisioned_; }
  std::uint64_t free_bytes() const { return free_total_; }
  std::uint64_t allocated_bytes() const { return provisioned_ - free_total_; }

  /// Free spans of one file in offset order.
  std::vector<ChunkSpan> free_list(std::uint32_t file) const;

  /// Sorted, coalesced, in bounds, and totals match. For tests.
  bool check_invariants() const;

 private:
  struct File {
    std::uint64_t size = 0;
    std::uint64_t free = 0;
    std::map<std::uint64_t, std::uint64_t> gaps;  // offset -> length
  };

  void take(std::uint32_t file, std::uint64_t offset, std::uint64_t length);
  bool overlaps_free(const ChunkSpan& span) const;

  std::vector<File> files_;
  std::uint64_t provisioned_ = 0;
  std::uint64_t free_total_ = 0;
};

}  // namespace oocmem
