#include "oocmem/chunk_allocator.hpp"

#include <cassert>

#include "oocmem/error.hpp"

namespace oocmem {

std::uint32_t ChunkAllocator::add_file(std::uint64_t size) {
  if (size == 0) raise(ErrorCode::InvalidArgument, "swap file of zero bytes");
  File f;
  f.size = size;
  f.free = size;
  f.gaps.emplace(0, size);
  files_.push_back(std::move(f));
  provisioned_ += size;
  free_total_ += size;
  return static_cast<std::uint32_t>(files_.size() - 1);
}

void ChunkAllocator::take(std::uint32_t file, std::uint64_t offset, std::uint64_t length) {
  auto& f = files_[file];
  auto it = f.gaps.find(offset);
  assert(it != f.gaps.end() && it->second >= length);
  auto remaining = it->second - length;
  f.gaps.erase(it);
  if (remaining > 0) f.gaps.emplace(offset + length, remaining);
  f.free -= length;
  free_total_ -= length;
}

std::optional<std::vector<ChunkSpan>> ChunkAllocator::allocate(std::uint64_t bytes) {
  if (bytes == 0) raise(ErrorCode::InvalidArgument, "allocation of zero bytes");
  if (bytes > free_total_) return std::nullopt;

  for (std::uint32_t i = 0; i < files_.size(); ++i) {
    if (files_[i].free < bytes) continue;
    for (const auto& [offset, length] : files_[i].gaps) {
      if (length >= bytes) {
        ChunkSpan span{i, offset, bytes};
        take(i, offset, bytes);
        return std::vector<ChunkSpan>{span};
      }
    }
  }

  // No single gap is large enough; spread over gaps in scan order.
  std::vector<ChunkSpan> spans;
  std::uint64_t left = bytes;
  for (std::uint32_t i = 0; i < files_.size() && left > 0; ++i) {
    for (const auto& [offset, length] : files_[i].gaps) {
      auto n = std::min(length, left);
      spans.push_back({i, offset, n});
      left -= n;
      if (left == 0) break;
    }
  }
  assert(left == 0);
  for (const auto& s : spans) take(s.file_index, s.offset, s.length);
  return spans;
}

bool ChunkAllocator::overlaps_free(const ChunkSpan& span) const {
  const auto& gaps = files_[span.file_index].gaps;
  auto it = gaps.upper_bound(span.offset);
  if (it != gaps.end() && it->first < span.end()) return true;
  if (it != gaps.begin()) {
    --it;
    if (it->first + it->second > span.offset) return true;
  }
  return false;
}

void ChunkAllocator::free(std::span<const ChunkSpan> spans) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.length == 0 || s.file_index >= files_.size() || s.end() > files_[s.file_index].size ||
        s.end() < s.offset)
      raise(ErrorCode::UnknownSpan, "span " + to_string(s) + " is not inside a swap file");
    if (overlaps_free(s)) raise(ErrorCode::DoubleFree, "span " + to_string(s) + " is already free");
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = spans[j];
      if (o.file_index == s.file_index && o.offset < s.end() && s.offset < o.end())
        raise(ErrorCode::DoubleFree, "span " + to_string(s) + " listed twice");
    }
  }

  for (const auto& s : spans) {
    auto& f = files_[s.file_index];
    auto offset = s.offset;
    auto length = s.length;
    auto next = f.gaps.lower_bound(offset);
    if (next != f.gaps.end() && next->first == offset + length) {
      length += next->second;
      next = f.gaps.erase(next);
    }
    if (next != f.gaps.begin()) {
      auto prev = std::prev(next);
      if (prev->first + prev->second == offset) {
        offset = prev->first;
        length += prev->second;
        f.gaps.erase(prev);
      }
    }
    f.gaps.emplace(offset, length);
    f.free += s.length;
    free_total_ += s.length;
  }
}

std::vector<ChunkSpan> ChunkAllocator::free_list(std::uint32_t file) const {
  std::vector<ChunkSpan> out;
  for (const auto& [offset, length] : files_.at(file).gaps) out.push_back({file, offset, length});
  return out;
}

bool ChunkAllocator::check_invariants() const {
  std::uint64_t total_free = 0;
  std::uint64_t total_size = 0;
  for (const auto& f : files_) {
    std::uint64_t sum = 0;
    std::optional<std::uint64_t> prev_end;
    for (const auto& [offset, length] : f.gaps) {
      if (length == 0 || offset + length > f.size) return false;
      if (prev_end && offset <= *prev_end) return false;  // overlapping or touching
      prev_end = offset + length;
      sum += length;
    }
    if (sum != f.free) return false;
    total_free += sum;
    total_size += f.size;
  }
  return total_free == free_total_ && total_size == provisioned_;
}

}  // namespace oocmem
