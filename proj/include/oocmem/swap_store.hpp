#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <set>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "oocmem/chunk_allocator.hpp"
#include "oocmem/transfer_engine.hpp"
#include "oocmem/types.hpp"

namespace oocmem {

struct SwapStoreConfig {
  std::filesystem::path dir;
  std::uint64_t file_size = 0;
  SwapPolicy policy = SwapPolicy::Fail;
  /// Added to every span read or write. Emulates a slower disk.
  std::chrono::microseconds io_latency{0};
};

/// What the interactive policy is asked when the swap is full.
struct ExtendRequest {
  std::uint64_t bytes_needed = 0;
  std::uint64_t provisioned_bytes = 0;
  std::uint64_t free_bytes = 0;
  std::uint64_t file_size = 0;
};
/// Returns true to provision more swap files, false to fail the allocation.
using ExtendPrompt = std::function<bool(const ExtendRequest&)>;

/// Disk side of the manager: a pool of sparse swap files, the free-list
/// allocator over them, and the per-block span lists. A block's spans double
/// as its clean copy once it is resident again; such copies can be purged
/// under allocation pressure.
///
/// Not synchronized except for the file IO entry points, which the transfer
/// workers call concurrently.
class SwapStore final : public IoBackend {
 public:
  SwapStore(SwapStoreConfig config, TransferEngine& engine);
  ~SwapStore() override;

  SwapStore(const SwapStore&) = delete;
  SwapStore& operator=(const SwapStore&) = delete;

  /// First fit, then split across gaps, then purge clean copies, then the
  /// swap policy. Throws SwapFull when all of that fails.
  std::vector<ChunkSpan> allocate_spans(std::uint64_t bytes);
  void free_spans(std::span<const ChunkSpan> spans);

  /// Writes the payload out. With reuse_clean and an existing copy nothing
  /// is written and the returned token is already complete.
  TransferToken store(HandleId id, std::span<const std::byte> payload, bool reuse_clean);
  /// Reads the block's spans into dest. The spans stay allocated.
  TransferToken load(HandleId id, std::span<std::byte> dest);

  /// Frees cached copies (oldest stored first) until bytes_wanted bytes were
  /// released or none are left. Returns the bytes released.
  std::uint64_t purge_clean_copies(std::uint64_t bytes_wanted);

  bool has_copy(HandleId id) const;
  std::vector<ChunkSpan> spans_of(HandleId id) const;
  /// Drops the block's copy and frees its spans.
  void discard(HandleId id);
  /// Marks the copy as a cache of data that is also resident, which makes
  /// it eligible for purging.
  void set_cached(HandleId id, bool cached);
  bool is_cached(HandleId id) const;
  std::uint64_t cached_bytes() const { return cached_bytes_; }

  void set_prompt(ExtendPrompt prompt) { prompt_ = std::move(prompt); }
  void set_purge_listener(std::function<void(std::uint32_t slot, std::uint64_t bytes)> listener) {
    purge_listener_ = std::move(listener);
  }
  void set_extend_listener(std::function<void(std::uint32_t)> listener) {
    extend_listener_ = std::move(listener);
  }

  const ChunkAllocator& allocator() const { return allocator_; }
  std::vector<std::filesystem::path> file_paths() const;
  std::uint64_t bytes_written() const { return bytes_written_.load(); }
  std::uint64_t bytes_read() const { return bytes_read_.load(); }

  void read(const ChunkSpan& span, std::byte* dest) override;
  void write(const ChunkSpan& span, const std::byte* src) override;

 private:
  struct Entry {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint32_t file : 24 = 0;
    std::uint32_t has_copy : 1 = 0;
    std::uint32_t cached : 1 = 0;
    std::uint32_t multi : 1 = 0;
    std::uint32_t seq = 0;
  };

  Entry& entry(HandleId id);
  const Entry* find(HandleId id) const;
  void add_file();
  void set_spans(Entry& e, std::uint32_t slot, std::vector<ChunkSpan> spans);
  std::vector<ChunkSpan> spans_of(const Entry& e, std::uint32_t slot) const;
  void drop_copy(Entry& e, std::uint32_t slot);
  int fd_for(std::uint32_t file) const;

  SwapStoreConfig config_;
  TransferEngine& engine_;
  ChunkAllocator allocator_;
  std::deque<Entry> entries_;
  // Blocks split across several spans keep all of them here.
  std::unordered_map<std::uint32_t, std::vector<ChunkSpan>> split_spans_;
  // Purge candidates, ordered by store sequence.
  std::set<std::pair<std::uint32_t, std::uint32_t>> cached_;
  std::uint64_t cached_bytes_ = 0;
  std::uint32_t next_seq_ = 0;

  mutable std::shared_mutex files_mutex_;
  std::vector<int> fds_;
  std::vector<std::filesystem::path> paths_;

  std::atomic<std::uint64_t> bytes_written_{0};
  std::atomic<std::uint64_t> bytes_read_{0};
  ExtendPrompt prompt_;
  std::function<void(std::uint32_t, std::uint64_t)> purge_listener_;
  std::function<void(std::uint32_t)> extend_listener_;
};

}  // namespace oocmem
